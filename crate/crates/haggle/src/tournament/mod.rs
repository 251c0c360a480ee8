//! Tournament harness: expands an experiment matrix into seeded matches,
//! plays them (in parallel if asked), and collects flat records plus full
//! transcripts.
//!
//! Every match gets a seed derived from the base seed and its position in
//! the expansion, so a partial rerun or a different `parallelism` produces
//! the same records for deterministic agents. A round whose agent fails is
//! logged as an abort and excluded from results; it never takes the
//! tournament down.

mod store;

pub use store::{
    read_manifest, read_rounds_csv, read_transcripts, write_aborts, write_manifest,
    write_rounds_csv, write_transcripts, RunManifest, StoreError, ROUNDS_CSV_HEADER,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{Agent, AgentError, Observation, ScriptedAgent, ScriptedPolicy};
use crate::engine::{
    EndReason, EngineError, NegotiationState, Price, Role, RoundConfig, RoundOutcome, TurnRecord,
    Winner,
};

/// Errors from planning or executing a tournament.
#[derive(Debug, Error)]
pub enum TournamentError {
    #[error("empty matrix axis: {0}")]
    EmptyAxis(String),
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
}

/// One side of a match: which model plays it and under which persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideSpec {
    pub model: String,
    pub persona: String,
}

/// One scheduled round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpec {
    /// Position in the expansion; also the source of `round_id`.
    pub index: u64,
    pub seller: SideSpec,
    pub buyer: SideSpec,
    /// 0-based repetition of this cell.
    pub repetition: u32,
    /// Derived seed: stable under partial reruns and reordering.
    pub seed: u64,
}

impl MatchSpec {
    pub fn round_id(&self) -> String {
        format!("r{:06}", self.index)
    }
}

/// splitmix64 finalizer over (base, index): cheap, well-mixed per-match seeds.
fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands the full cartesian product seller_model x buyer_model x
/// seller_persona x buyer_persona x repetitions, in that nesting order.
pub fn expand_matrix(
    models: &[String],
    personas: &[String],
    repetitions: u32,
    base_seed: u64,
) -> Result<Vec<MatchSpec>, TournamentError> {
    if models.is_empty() {
        return Err(TournamentError::EmptyAxis("models".to_string()));
    }
    if personas.is_empty() {
        return Err(TournamentError::EmptyAxis("personas".to_string()));
    }
    if repetitions == 0 {
        return Err(TournamentError::EmptyAxis("repetitions".to_string()));
    }
    let mut specs = Vec::with_capacity(
        models.len() * models.len() * personas.len() * personas.len() * repetitions as usize,
    );
    let mut index = 0u64;
    for seller_model in models {
        for buyer_model in models {
            for seller_persona in personas {
                for buyer_persona in personas {
                    for repetition in 0..repetitions {
                        specs.push(MatchSpec {
                            index,
                            seller: SideSpec {
                                model: seller_model.clone(),
                                persona: seller_persona.clone(),
                            },
                            buyer: SideSpec {
                                model: buyer_model.clone(),
                                persona: buyer_persona.clone(),
                            },
                            repetition,
                            seed: derive_seed(base_seed, index),
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// The full experiment description; hashes to the run fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentPlan {
    pub round_config: RoundConfig,
    pub models: Vec<String>,
    pub personas: Vec<String>,
    pub repetitions: u32,
    pub base_seed: u64,
}

impl TournamentPlan {
    pub fn expand(&self) -> Result<Vec<MatchSpec>, TournamentError> {
        expand_matrix(
            &self.models,
            &self.personas,
            self.repetitions,
            self.base_seed,
        )
    }

    /// Short content hash of the plan, stamped on every record so results
    /// can be traced back to the exact configuration that produced them.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("plan serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Flat per-round result row, the unit of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: String,
    pub seller_model: String,
    pub buyer_model: String,
    pub seller_persona: String,
    pub buyer_persona: String,
    pub end_reason: EndReason,
    pub final_price: Option<Price>,
    pub winner: Winner,
    pub turns_used: u32,
    pub win_baseline: Price,
    pub seed: u64,
    pub fingerprint: String,
}

/// Full record of one round: everything needed to replay and audit it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptDoc {
    pub round_id: String,
    pub seller_model: String,
    pub buyer_model: String,
    pub seller_persona: String,
    pub buyer_persona: String,
    pub seed: u64,
    pub config: RoundConfig,
    pub transcript: Vec<TurnRecord>,
    pub outcome: RoundOutcome,
}

/// One round that could not be completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub round_id: String,
    pub seller_model: String,
    pub buyer_model: String,
    pub seller_persona: String,
    pub buyer_persona: String,
    pub seed: u64,
    pub error: String,
}

/// Builds the two agents for a match. Implementations must be shareable
/// across worker threads.
pub trait AgentFactory: Sync {
    fn make_agent(
        &self,
        role: Role,
        side: &SideSpec,
        seed: u64,
    ) -> Result<Box<dyn Agent>, TournamentError>;
}

/// Factory for preset concession-ladder agents, persona-keyed.
///
/// With `jitter` on, each match perturbs its presets with a generator seeded
/// from the match seed, so repetitions of a cell differ while the whole
/// tournament stays replayable.
#[derive(Debug, Clone)]
pub struct ScriptedFactory {
    pub jitter: bool,
}

impl AgentFactory for ScriptedFactory {
    fn make_agent(
        &self,
        role: Role,
        side: &SideSpec,
        seed: u64,
    ) -> Result<Box<dyn Agent>, TournamentError> {
        let mut policy = ScriptedPolicy::preset(role, &side.persona)
            .ok_or_else(|| TournamentError::UnknownPersona(side.persona.clone()))?;
        if self.jitter {
            // Separate streams per role so the two sides never share draws.
            let stream = match role {
                Role::Seller => seed,
                Role::Buyer => seed.wrapping_add(0x5EED),
            };
            policy = policy.with_jitter(&mut ChaCha8Rng::seed_from_u64(stream));
        }
        Ok(Box::new(ScriptedAgent::new(
            policy,
            format!("scripted:{}", side.persona),
        )))
    }
}

/// Plays one round to completion, observation in, move out, until the
/// engine closes the state.
pub fn run_round(
    config: &RoundConfig,
    seller: &mut dyn Agent,
    buyer: &mut dyn Agent,
) -> Result<NegotiationState, AgentError> {
    let mut state = NegotiationState::new(config.clone()).map_err(engine_abort)?;
    while let Some(role) = state.expected_actor() {
        let agent: &mut dyn Agent = match role {
            Role::Seller => seller,
            Role::Buyer => buyer,
        };
        let obs = Observation::capture(&state, role)?;
        let mv = agent.decide(&obs)?;
        state = state
            .apply(role, &mv.reasoning, &mv.message, mv.action)
            .map_err(engine_abort)?;
    }
    Ok(state)
}

fn engine_abort(err: EngineError) -> AgentError {
    AgentError::BadObservation(err.to_string())
}

/// Everything a tournament produces, in spec order.
#[derive(Debug, Default)]
pub struct TournamentOutput {
    pub records: Vec<RoundRecord>,
    pub transcripts: Vec<TranscriptDoc>,
    pub aborts: Vec<AbortRecord>,
}

#[allow(clippy::result_large_err)]
fn play_spec(
    plan: &TournamentPlan,
    fingerprint: &str,
    factory: &dyn AgentFactory,
    spec: &MatchSpec,
) -> Result<(RoundRecord, TranscriptDoc), AbortRecord> {
    let abort = |error: String| AbortRecord {
        round_id: spec.round_id(),
        seller_model: spec.seller.model.clone(),
        buyer_model: spec.buyer.model.clone(),
        seller_persona: spec.seller.persona.clone(),
        buyer_persona: spec.buyer.persona.clone(),
        seed: spec.seed,
        error,
    };
    let mut seller = factory
        .make_agent(Role::Seller, &spec.seller, spec.seed)
        .map_err(|e| abort(e.to_string()))?;
    let mut buyer = factory
        .make_agent(Role::Buyer, &spec.buyer, spec.seed)
        .map_err(|e| abort(e.to_string()))?;
    let state = run_round(&plan.round_config, seller.as_mut(), buyer.as_mut())
        .map_err(|e| abort(e.to_string()))?;
    let outcome = state.outcome().expect("run_round returns a closed state");

    let record = RoundRecord {
        round_id: spec.round_id(),
        seller_model: spec.seller.model.clone(),
        buyer_model: spec.buyer.model.clone(),
        seller_persona: spec.seller.persona.clone(),
        buyer_persona: spec.buyer.persona.clone(),
        end_reason: outcome.end_reason,
        final_price: outcome.final_price,
        winner: outcome.winner,
        turns_used: outcome.turns_used,
        win_baseline: plan.round_config.win_baseline,
        seed: spec.seed,
        fingerprint: fingerprint.to_string(),
    };
    let transcript = TranscriptDoc {
        round_id: spec.round_id(),
        seller_model: spec.seller.model.clone(),
        buyer_model: spec.buyer.model.clone(),
        seller_persona: spec.seller.persona.clone(),
        buyer_persona: spec.buyer.persona.clone(),
        seed: spec.seed,
        config: plan.round_config.clone(),
        transcript: state.transcript().to_vec(),
        outcome,
    };
    Ok((record, transcript))
}

/// Runs every match in the plan on up to `parallelism` worker threads.
///
/// Results come back in expansion order regardless of scheduling, so two
/// runs of the same plan with deterministic agents produce byte-identical
/// output files whatever the parallelism.
#[allow(clippy::result_large_err)]
pub fn run_tournament(
    plan: &TournamentPlan,
    factory: &dyn AgentFactory,
    parallelism: usize,
) -> Result<TournamentOutput, TournamentError> {
    use rayon::prelude::*;

    plan.round_config
        .validate()
        .map_err(|e| TournamentError::EmptyAxis(e.to_string()))?;
    let specs = plan.expand()?;
    let fingerprint = plan.fingerprint();
    log::info!(
        "running {} rounds across {} threads (fingerprint {fingerprint})",
        specs.len(),
        parallelism.max(1)
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool construction");
    let results: Vec<Result<(RoundRecord, TranscriptDoc), AbortRecord>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| play_spec(plan, &fingerprint, factory, spec))
            .collect()
    });

    let mut output = TournamentOutput::default();
    for result in results {
        match result {
            Ok((record, transcript)) => {
                output.records.push(record);
                output.transcripts.push(transcript);
            }
            Err(abort) => {
                log::warn!("round {} aborted: {}", abort.round_id, abort.error);
                output.aborts.push(abort);
            }
        }
    }
    log::info!(
        "tournament finished: {} completed, {} aborted",
        output.records.len(),
        output.aborts.len()
    );
    Ok(output)
}

/// Replay verification failure.
#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay diverged: {0}")]
    Mismatch(String),
    #[error("recorded action sequence is illegal: {0}")]
    Engine(#[from] EngineError),
}

/// Re-applies a stored transcript through the engine and checks that it
/// reproduces the stored outcome exactly.
pub fn verify_transcript(doc: &TranscriptDoc) -> Result<RoundOutcome, ReplayError> {
    let mut state = NegotiationState::new(doc.config.clone())?;
    for rec in &doc.transcript {
        state = state.apply(rec.actor, &rec.reasoning, &rec.message, rec.action)?;
    }
    let outcome = state
        .outcome()
        .ok_or_else(|| ReplayError::Mismatch("replayed round did not close".to_string()))?;
    if outcome != doc.outcome {
        return Err(ReplayError::Mismatch(format!(
            "stored outcome {:?} but replay gives {outcome:?}",
            doc.outcome
        )));
    }
    if state.transcript() != doc.transcript {
        return Err(ReplayError::Mismatch(
            "replayed transcript differs from stored transcript".to_string(),
        ));
    }
    Ok(outcome)
}

/// Loads and validates a results file (see [`read_rounds_csv`]).
pub fn load_results(path: &std::path::Path) -> Result<Vec<RoundRecord>, StoreError> {
    read_rounds_csv(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentMove;
    use std::collections::BTreeSet;

    fn plan(models: &[&str], personas: &[&str], repetitions: u32) -> TournamentPlan {
        TournamentPlan {
            round_config: RoundConfig::default(),
            models: models.iter().map(|s| s.to_string()).collect(),
            personas: personas.iter().map(|s| s.to_string()).collect(),
            repetitions,
            base_seed: 42,
        }
    }

    #[test]
    fn expansion_counts_match_enumeration() {
        // Oracle: the cartesian set built independently with a BTreeSet.
        let p = plan(&["a", "b"], &["x", "y"], 1);
        let specs = p.expand().unwrap();
        assert_eq!(specs.len(), 16);
        let combos: BTreeSet<_> = specs
            .iter()
            .map(|s| {
                (
                    s.seller.model.clone(),
                    s.buyer.model.clone(),
                    s.seller.persona.clone(),
                    s.buyer.persona.clone(),
                    s.repetition,
                )
            })
            .collect();
        assert_eq!(combos.len(), 16);

        let models: Vec<String> = (0..6).map(|i| format!("m{i}")).collect();
        let personas: Vec<String> = (0..7).map(|i| format!("p{i}")).collect();
        let big = expand_matrix(&models, &personas, 1, 0).unwrap();
        assert_eq!(big.len(), 1764);
        assert_eq!(big.len(), 6 * 6 * 7 * 7);
    }

    #[test]
    fn empty_axes_are_rejected() {
        assert!(matches!(
            expand_matrix(&[], &["x".into()], 1, 0),
            Err(TournamentError::EmptyAxis(_))
        ));
        assert!(matches!(
            expand_matrix(&["m".into()], &[], 1, 0),
            Err(TournamentError::EmptyAxis(_))
        ));
        assert!(matches!(
            expand_matrix(&["m".into()], &["x".into()], 0, 0),
            Err(TournamentError::EmptyAxis(_))
        ));
    }

    #[test]
    fn derived_seeds_are_stable_and_spread() {
        let p = plan(&["a", "b"], &["x", "y"], 3);
        let first = p.expand().unwrap();
        let second = p.expand().unwrap();
        assert_eq!(first, second);
        let seeds: BTreeSet<u64> = first.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), first.len(), "seeds collide");

        let other = TournamentPlan {
            base_seed: 43,
            ..p.clone()
        };
        let moved = other.expand().unwrap();
        assert!(first.iter().zip(&moved).all(|(a, b)| a.seed != b.seed));
    }

    #[test]
    fn fingerprint_tracks_plan_content() {
        let p = plan(&["a"], &["x"], 1);
        assert_eq!(p.fingerprint(), p.fingerprint());
        let q = plan(&["a"], &["x", "y"], 1);
        assert_ne!(p.fingerprint(), q.fingerprint());
    }

    fn scripted_plan(repetitions: u32) -> TournamentPlan {
        plan(
            &["scripted"],
            &["competitive", "control", "cooperative", "altruistic"],
            repetitions,
        )
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let p = scripted_plan(1);
        let factory = ScriptedFactory { jitter: true };
        let serial = run_tournament(&p, &factory, 1).unwrap();
        let parallel = run_tournament(&p, &factory, 4).unwrap();
        assert_eq!(serial.records.len(), 16);
        assert_eq!(serial.records, parallel.records);
        assert_eq!(serial.transcripts, parallel.transcripts);
        assert!(serial.aborts.is_empty());
    }

    #[test]
    fn every_transcript_replays_to_its_outcome() {
        let output =
            run_tournament(&scripted_plan(2), &ScriptedFactory { jitter: true }, 2).unwrap();
        assert_eq!(output.transcripts.len(), 32);
        for doc in &output.transcripts {
            let outcome = verify_transcript(doc).unwrap();
            assert_eq!(outcome, doc.outcome);
        }
    }

    #[test]
    fn tampered_transcript_fails_replay() {
        let output =
            run_tournament(&scripted_plan(1), &ScriptedFactory { jitter: false }, 1).unwrap();
        let mut doc = output
            .transcripts
            .iter()
            .find(|d| d.outcome.final_price.is_some())
            .unwrap()
            .clone();
        doc.outcome.final_price = Some(doc.outcome.final_price.unwrap() + 1);
        assert!(matches!(
            verify_transcript(&doc),
            Err(ReplayError::Mismatch(_))
        ));
    }

    /// Factory whose buyer agents always fail for one persona.
    struct SabotagedFactory;

    impl AgentFactory for SabotagedFactory {
        fn make_agent(
            &self,
            role: Role,
            side: &SideSpec,
            seed: u64,
        ) -> Result<Box<dyn Agent>, TournamentError> {
            if role == Role::Buyer && side.persona == "control" {
                Ok(Box::new(FailingAgent))
            } else {
                ScriptedFactory { jitter: false }.make_agent(role, side, seed)
            }
        }
    }

    struct FailingAgent;

    impl Agent for FailingAgent {
        fn name(&self) -> &str {
            "failing"
        }
        fn decide(&mut self, _obs: &Observation) -> Result<AgentMove, AgentError> {
            Err(AgentError::Exhausted {
                attempts: 2,
                last: "scripted sabotage".to_string(),
            })
        }
    }

    #[test]
    fn failing_agents_abort_without_stopping_the_run() {
        let p = plan(&["scripted"], &["competitive", "control"], 1);
        let output = run_tournament(&p, &SabotagedFactory, 2).unwrap();
        // 4 cells; the two with a control buyer abort.
        assert_eq!(output.records.len(), 2);
        assert_eq!(output.aborts.len(), 2);
        assert!(output
            .aborts
            .iter()
            .all(|a| a.buyer_persona == "control" && a.error.contains("sabotage")));
        assert!(output
            .records
            .iter()
            .all(|r| r.buyer_persona == "competitive"));
    }

    #[test]
    fn unknown_persona_aborts_that_round() {
        let p = plan(&["scripted"], &["competitive", "stoic"], 1);
        let output = run_tournament(&p, &ScriptedFactory { jitter: false }, 1).unwrap();
        assert_eq!(output.records.len(), 1);
        assert_eq!(output.aborts.len(), 3);
    }

    #[test]
    fn round_trip_through_disk_formats() {
        let dir = tempfile::tempdir().unwrap();
        let output =
            run_tournament(&scripted_plan(1), &ScriptedFactory { jitter: true }, 1).unwrap();

        let rounds = dir.path().join("rounds.csv");
        write_rounds_csv(&rounds, &output.records).unwrap();
        assert_eq!(read_rounds_csv(&rounds).unwrap(), output.records);
        let header = std::fs::read_to_string(&rounds).unwrap();
        assert!(header.starts_with(ROUNDS_CSV_HEADER));

        let transcripts = dir.path().join("transcripts.jsonl");
        write_transcripts(&transcripts, &output.transcripts).unwrap();
        assert_eq!(read_transcripts(&transcripts).unwrap(), output.transcripts);
    }

    #[test]
    fn schema_and_row_corruption_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let output =
            run_tournament(&scripted_plan(1), &ScriptedFactory { jitter: false }, 1).unwrap();
        let rounds = dir.path().join("rounds.csv");
        write_rounds_csv(&rounds, &output.records).unwrap();

        // Header tampering is a schema error.
        let text = std::fs::read_to_string(&rounds).unwrap();
        let reordered = text.replacen("round_id,seller_model", "seller_model,round_id", 1);
        std::fs::write(&rounds, &reordered).unwrap();
        assert!(matches!(
            read_rounds_csv(&rounds),
            Err(StoreError::SchemaMismatch { .. })
        ));

        // A winner that contradicts the price is a corrupt row, with line.
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let target = lines
            .iter()
            .position(|l| l.contains("agreement") && !l.contains(",draw,"))
            .unwrap();
        lines[target] = if lines[target].contains(",seller,") {
            lines[target].replace(",seller,", ",buyer,")
        } else {
            lines[target].replace(",buyer,", ",seller,")
        };
        std::fs::write(&rounds, lines.join("\n")).unwrap();
        match read_rounds_csv(&rounds) {
            Err(StoreError::CorruptRow { line, .. }) => assert_eq!(line, target + 1),
            other => panic!("expected CorruptRow, got {other:?}"),
        }

        // A priceless seller win can never appear.
        let mut records = output.records.clone();
        let idx = records
            .iter()
            .position(|r| r.winner != Winner::Draw)
            .unwrap();
        records[idx].final_price = None;
        write_rounds_csv(&rounds, &records).unwrap();
        assert!(matches!(
            read_rounds_csv(&rounds),
            Err(StoreError::CorruptRow { .. })
        ));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest {
            fingerprint: "abc123".to_string(),
            code_version: "0.1.0".to_string(),
            started_unix: 1_700_000_000,
            finished_unix: 1_700_000_123,
            rounds_completed: 16,
            rounds_aborted: 0,
        };
        let path = dir.path().join("run_manifest.json");
        write_manifest(&path, &manifest).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), manifest);
    }
}
