//! Command-line surface. Argument parsing is all that lives in the binary;
//! each subcommand here orchestrates library calls and maps failures onto a
//! stable exit-code contract:
//!
//! * 0: success
//! * 1: user or configuration error
//! * 2: data or schema error
//! * 3: internal error

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{write_analysis, AnalysisError, GbtParams};
use crate::config::{load_config, ConfigError, ConfigFactory};
use crate::engine::Action;
use crate::personas::PersonaRegistry;
use crate::tournament::{
    read_rounds_csv, read_transcripts, run_tournament, verify_transcript, write_aborts,
    write_manifest, write_rounds_csv, write_transcripts, RunManifest, StoreError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// A failed subcommand, classified for the exit-code contract.
#[derive(Debug)]
pub enum CommandError {
    User(String),
    Data(String),
    Internal(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::User(_) => EXIT_USER,
            CommandError::Data(_) => EXIT_DATA,
            CommandError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CommandError::User(m) | CommandError::Data(m) | CommandError::Internal(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "haggle",
    version,
    about = "Buy-and-sell negotiation tournaments between scripted or LLM agents"
)]
pub struct Cli {
    /// Override the config's base seed (run only).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the config's worker-thread count (run only).
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn as_str(self) -> &'static str {
        match self {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
            LogLevel::Trace => "trace",
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the tournament described by a config file.
    Run { config: PathBuf },
    /// Aggregate a results file and attribute price swings to personas.
    Analyze {
        rounds: PathBuf,
        /// Directory for tables, heatmap, attribution, and the text report.
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        #[arg(long, default_value_t = GbtParams::default().n_trees)]
        trees: usize,
        #[arg(long, default_value_t = GbtParams::default().max_depth)]
        depth: usize,
        #[arg(long, default_value_t = GbtParams::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value_t = GbtParams::default().min_samples_leaf)]
        min_leaf: usize,
    },
    /// Print one stored round turn by turn and verify it replays exactly.
    Replay {
        transcripts: PathBuf,
        #[arg(long)]
        round: String,
    },
    /// Persona catalog.
    Personas {
        #[command(subcommand)]
        command: PersonaCommand,
    },
}

#[derive(Subcommand)]
pub enum PersonaCommand {
    /// List the built-in personas with traits and variant counts.
    List,
}

/// Full CLI entry point: parses, dispatches, prints failures to stderr, and
/// returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    init_logging(cli.log_level);
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, cli.seed, cli.parallelism),
        Command::Analyze {
            rounds,
            out,
            trees,
            depth,
            learning_rate,
            min_leaf,
        } => cmd_analyze(
            rounds,
            out,
            &GbtParams {
                n_trees: *trees,
                max_depth: *depth,
                learning_rate: *learning_rate,
                min_samples_leaf: *min_leaf,
            },
        ),
        Command::Replay { transcripts, round } => cmd_replay(transcripts, round),
        Command::Personas {
            command: PersonaCommand::List,
        } => cmd_personas_list(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}

fn init_logging(level: LogLevel) {
    let _ =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level.as_str()))
            .format_timestamp(None)
            .try_init();
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn config_failure(err: ConfigError) -> CommandError {
    match &err {
        ConfigError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            CommandError::User(err.to_string())
        }
        ConfigError::Io { .. } => CommandError::Internal(err.to_string()),
        ConfigError::Parse { .. } | ConfigError::Invalid { .. } | ConfigError::Gateway { .. } => {
            CommandError::User(err.to_string())
        }
    }
}

fn store_failure(err: StoreError) -> CommandError {
    match &err {
        StoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            CommandError::User(err.to_string())
        }
        StoreError::Io { .. } => CommandError::Internal(err.to_string()),
        StoreError::SchemaMismatch { .. } | StoreError::CorruptRow { .. } => {
            CommandError::Data(err.to_string())
        }
    }
}

fn analysis_failure(err: AnalysisError) -> CommandError {
    match &err {
        AnalysisError::InvalidParams(_) => CommandError::User(err.to_string()),
        AnalysisError::Io { .. } => CommandError::Internal(err.to_string()),
        _ => CommandError::Data(err.to_string()),
    }
}

/// Executes a config end to end and writes `rounds.csv`,
/// `transcripts.jsonl`, `aborts.log`, and `run_manifest.json` into its
/// output directory. Succeeds if at least one round completed.
pub fn cmd_run(
    config_path: &Path,
    seed_override: Option<u64>,
    parallelism_override: Option<usize>,
) -> Result<(), CommandError> {
    let started_unix = now_unix();
    let mut config = load_config(config_path).map_err(config_failure)?;
    if let Some(seed) = seed_override {
        config.base_seed = seed;
    }
    if let Some(parallelism) = parallelism_override {
        config.parallelism = parallelism;
    }
    config
        .validate(PersonaRegistry::builtin())
        .map_err(config_failure)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        CommandError::User(format!(
            "config field output_dir: cannot create {}: {e}",
            config.output_dir.display()
        ))
    })?;

    let factory = ConfigFactory::from_config(&config).map_err(config_failure)?;
    let plan = config.plan();
    let output = run_tournament(&plan, &factory, config.parallelism)
        .map_err(|e| CommandError::Internal(e.to_string()))?;

    let io_fail = |e: StoreError| CommandError::Internal(e.to_string());
    let rounds_path = config.output_dir.join("rounds.csv");
    write_rounds_csv(&rounds_path, &output.records).map_err(io_fail)?;
    let transcripts_path = config.output_dir.join("transcripts.jsonl");
    write_transcripts(&transcripts_path, &output.transcripts).map_err(io_fail)?;
    let aborts_path = config.output_dir.join("aborts.log");
    write_aborts(&aborts_path, &output.aborts).map_err(io_fail)?;
    let manifest = RunManifest {
        fingerprint: plan.fingerprint(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: now_unix(),
        rounds_completed: output.records.len(),
        rounds_aborted: output.aborts.len(),
    };
    write_manifest(&config.output_dir.join("run_manifest.json"), &manifest).map_err(io_fail)?;

    println!(
        "completed {} rounds ({} aborted) -> {}",
        output.records.len(),
        output.aborts.len(),
        rounds_path.display()
    );
    if output.records.is_empty() {
        return Err(CommandError::Internal(
            "every round aborted; see aborts.log".to_string(),
        ));
    }
    Ok(())
}

/// Loads a results file and writes the full analysis bundle under `out`.
pub fn cmd_analyze(
    rounds_path: &Path,
    out_dir: &Path,
    params: &GbtParams,
) -> Result<(), CommandError> {
    params.validate().map_err(analysis_failure)?;
    let records = read_rounds_csv(rounds_path).map_err(store_failure)?;
    if records.is_empty() {
        return Err(CommandError::Data(format!(
            "{} contains no rounds",
            rounds_path.display()
        )));
    }
    let outputs = write_analysis(&records, out_dir, params).map_err(analysis_failure)?;
    println!(
        "analyzed {} rounds -> {}",
        records.len(),
        outputs.report.display()
    );
    Ok(())
}

fn describe_action(action: &Action) -> String {
    match action {
        Action::Propose { price } => format!("propose {price}"),
        Action::Accept => "accept".to_string(),
        Action::Reject => "reject".to_string(),
    }
}

/// Prints a stored round turn by turn, then replays it through the engine
/// and reports whether the stored outcome is reproduced.
pub fn cmd_replay(transcripts_path: &Path, round_id: &str) -> Result<(), CommandError> {
    let docs = read_transcripts(transcripts_path).map_err(store_failure)?;
    let doc = docs
        .iter()
        .find(|d| d.round_id == round_id)
        .ok_or_else(|| {
            CommandError::User(format!(
                "round {round_id:?} not found in {} ({} rounds present)",
                transcripts_path.display(),
                docs.len()
            ))
        })?;

    println!(
        "round {} | seller {}:{} | buyer {}:{} | seed {}",
        doc.round_id,
        doc.seller_model,
        doc.seller_persona,
        doc.buyer_model,
        doc.buyer_persona,
        doc.seed
    );
    for turn in &doc.transcript {
        println!(
            "  turn {:>2} {:<6} {:<12} | {}",
            turn.turn,
            turn.actor.label(),
            describe_action(&turn.action),
            turn.message
        );
    }
    println!(
        "stored outcome: {} after {} turns, final price {}, winner {}",
        doc.outcome.end_reason.label(),
        doc.outcome.turns_used,
        doc.outcome
            .final_price
            .map(|p| p.to_string())
            .unwrap_or_else(|| "-".to_string()),
        doc.outcome.winner.label()
    );
    match verify_transcript(doc) {
        Ok(_) => {
            println!("verdict: OK");
            Ok(())
        }
        Err(err) => {
            println!("verdict: ReplayMismatch");
            Err(CommandError::Data(format!("round {round_id}: {err}")))
        }
    }
}

/// Prints the built-in persona catalog.
pub fn cmd_personas_list() -> Result<(), CommandError> {
    for spec in PersonaRegistry::builtin().iter() {
        let traits = if spec.traits.is_empty() {
            "no trait instructions".to_string()
        } else {
            spec.traits
                .iter()
                .map(|(dim, level)| format!("{dim}={level}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!(
            "{:<12} {:<12} variants={} | {} | {}",
            spec.name,
            spec.display_name,
            spec.variants.len(),
            traits,
            spec.summary
        );
    }
    Ok(())
}
