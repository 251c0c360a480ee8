//! On-disk formats for tournament outputs.
//!
//! Four artifacts, all plain text: `rounds.csv` (one flat record per
//! completed round, fixed column order, header doubles as the schema
//! version), `transcripts.jsonl` (one JSON document per round with the full
//! turn-by-turn record), `aborts.log` (one line per round that failed), and
//! `run_manifest.json` (fingerprint, code version, wall-clock bounds, and
//! counts — the only artifact that carries timestamps, so result files stay
//! byte-reproducible).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::classify_outcome;

use super::{AbortRecord, RoundRecord, TranscriptDoc};

/// Exact `rounds.csv` header. Any other first line is a different schema.
pub const ROUNDS_CSV_HEADER: &str = "round_id,seller_model,buyer_model,seller_persona,buyer_persona,end_reason,final_price,winner,turns_used,win_baseline,seed,fingerprint";

/// Errors from reading or writing result files.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} has an unrecognized schema: expected header {expected:?}, found {found:?}")]
    SchemaMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {reason}")]
    CorruptRow {
        path: String,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes records in their given order with the fixed header.
pub fn write_rounds_csv(path: &Path, records: &[RoundRecord]) -> Result<(), StoreError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| StoreError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    for record in records {
        writer.serialize(record).map_err(|e| StoreError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads `rounds.csv`, gating on the exact header and validating every row's
/// internal consistency (outcome classification, price presence).
pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundRecord>, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let found = text.lines().next().unwrap_or("").trim_end().to_string();
    if found != ROUNDS_CSV_HEADER {
        return Err(StoreError::SchemaMismatch {
            path: path.display().to_string(),
            expected: ROUNDS_CSV_HEADER.to_string(),
            found,
        });
    }

    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<RoundRecord>().enumerate() {
        let line = i + 2;
        let corrupt = |reason: String| StoreError::CorruptRow {
            path: path.display().to_string(),
            line,
            reason,
        };
        let record = row.map_err(|e| corrupt(e.to_string()))?;
        let winner = classify_outcome(record.end_reason, record.final_price, record.win_baseline)
            .map_err(|e| corrupt(e.to_string()))?;
        if winner != record.winner {
            return Err(corrupt(format!(
                "winner column says {} but price {:?} against baseline {} gives {}",
                record.winner, record.final_price, record.win_baseline, winner
            )));
        }
        if record.turns_used == 0 {
            return Err(corrupt("turns_used must be at least 1".to_string()));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes one JSON document per line.
pub fn write_transcripts(path: &Path, docs: &[TranscriptDoc]) -> Result<(), StoreError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    for doc in docs {
        let line = serde_json::to_string(doc).expect("transcript serializes");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Reads a transcript file, reporting the line number of any bad document.
pub fn read_transcripts(path: &Path) -> Result<Vec<TranscriptDoc>, StoreError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|e| StoreError::CorruptRow {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Appends abort lines in a greppable `round_id<TAB>context<TAB>error` shape.
pub fn write_aborts(path: &Path, aborts: &[AbortRecord]) -> Result<(), StoreError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    for a in aborts {
        writeln!(
            file,
            "{}\tseller={}:{} buyer={}:{} seed={}\t{}",
            a.round_id,
            a.seller_model,
            a.seller_persona,
            a.buyer_model,
            a.buyer_persona,
            a.seed,
            a.error
        )
        .map_err(io_err(path))?;
    }
    Ok(())
}

/// Run-level metadata. This is the only output that records wall-clock
/// time, keeping `rounds.csv` and `transcripts.jsonl` identical across
/// reruns of the same plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub fingerprint: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub rounds_completed: usize,
    pub rounds_aborted: usize,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::CorruptRow {
        path: path.display().to_string(),
        line: 1,
        reason: e.to_string(),
    })
}
