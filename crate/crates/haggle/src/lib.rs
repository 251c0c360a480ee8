//! Buy-and-sell negotiation harness.
//!
//! Two agents haggle over a single item under asymmetric information: the
//! seller knows its production cost, the buyer knows their payment limit,
//! and neither sees the other's number. Rounds run on a strict alternating
//! turn protocol ([`engine`]); agents are either deterministic concession
//! policies or LLM-backed personas ([`agents`], [`personas`]); tournaments
//! expand a config matrix into seeded matches and persist results
//! ([`tournament`]); analysis aggregates outcomes, fits boosted trees over
//! match features, and attributes win-rate swings to personas with exact
//! Shapley values ([`analysis`]).
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability, from a single scripted round up to a full
//! tournament-and-attribution pipeline.

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod gateway;
pub mod personas;
pub mod tournament;

pub use engine::{Action, EngineError, NegotiationState, Role, RoundConfig, RoundOutcome, Winner};
pub use personas::{
    get_persona, render_persona_block, render_persona_variant, PersonaRegistry, PersonaSpec,
};
