//! Negotiating agents: what they see, what they return, and the two
//! implementations (deterministic concession policies and LLM players).
//!
//! An [`Observation`] is the information firewall of the game. It carries one
//! side's private valuation, the public dialogue, and that agent's own prior
//! reasoning, and nothing of the opponent's private state. Both agent kinds
//! decide from an observation alone, so neither can cheat.

mod llm;
mod scripted;

pub use llm::{build_prompt, llm_decide, parse_move, LlmAgent, MOVE_BLOCK_CONTRACT};
pub use scripted::{scripted_decide, ScriptedAgent, ScriptedPolicy};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, ActionKind, NegotiationState, Price, Role};
use crate::gateway::GatewayError;

/// Errors surfaced while an agent chooses a move.
#[derive(Debug, Error)]
pub enum AgentError {
    /// Reply text did not contain a well-formed move block.
    #[error("malformed reply: {reason}")]
    MalformedReply { reason: String, raw: String },
    /// Move block parsed but named a move the rules do not allow here.
    #[error("illegal move: {reason}")]
    IllegalMove { reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    /// Reply retry budget spent without a usable move.
    #[error("no usable move after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("bad observation: {0}")]
    BadObservation(String),
}

/// One public exchange visible to both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub turn: u32,
    pub actor: Role,
    pub message: String,
    pub action: Action,
}

/// Everything one agent may legally see when choosing its next move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub role: Role,
    pub item_name: String,
    pub currency_name: String,
    /// Seller's cost or buyer's limit, depending on `role`.
    pub private_value: Price,
    pub price_min: Price,
    pub price_max: Price,
    pub max_turns: u32,
    /// 1-based index of the turn being decided.
    pub turn: u32,
    pub turns_remaining: u32,
    /// Live offer on the table, if any, and who made it.
    pub standing_offer: Option<(Price, Role)>,
    /// Public messages and actions so far, both sides.
    pub dialogue: Vec<DialogueTurn>,
    /// This agent's own private reasoning from its earlier turns.
    pub own_reasoning: Vec<String>,
    pub legal: BTreeSet<ActionKind>,
}

impl Observation {
    /// Projects the full round state down to what `role` may see. Fails if
    /// it is not that role's turn.
    pub fn capture(state: &NegotiationState, role: Role) -> Result<Observation, AgentError> {
        match state.expected_actor() {
            Some(actor) if actor == role => {}
            Some(actor) => {
                return Err(AgentError::BadObservation(format!(
                    "it is the {actor}'s turn, not the {role}'s"
                )))
            }
            None => {
                return Err(AgentError::BadObservation(
                    "round is already closed".to_string(),
                ))
            }
        }
        let config = state.config();
        Ok(Observation {
            role,
            item_name: config.item_name.clone(),
            currency_name: config.currency_name.clone(),
            private_value: match role {
                Role::Seller => config.seller_cost,
                Role::Buyer => config.buyer_limit,
            },
            price_min: config.price_min,
            price_max: config.price_max,
            max_turns: config.max_turns,
            turn: state.turns_taken() + 1,
            turns_remaining: state.turns_remaining(),
            standing_offer: state.standing_offer(),
            dialogue: state
                .transcript()
                .iter()
                .map(|rec| DialogueTurn {
                    turn: rec.turn,
                    actor: rec.actor,
                    message: rec.message.clone(),
                    action: rec.action,
                })
                .collect(),
            own_reasoning: state
                .transcript()
                .iter()
                .filter(|rec| rec.actor == role)
                .map(|rec| rec.reasoning.clone())
                .collect(),
            legal: state.legal_actions(),
        })
    }

    /// The opponent's most recent offer, if one is standing.
    pub fn opponent_offer(&self) -> Option<Price> {
        match self.standing_offer {
            Some((price, by)) if by != self.role => Some(price),
            _ => None,
        }
    }
}

/// A fully decided move: private reasoning, public message, and the action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMove {
    pub reasoning: String,
    pub message: String,
    pub action: Action,
}

/// Anything that can play one side of a round.
pub trait Agent {
    /// Identity recorded in transcripts and results, e.g. `scripted:selfish`
    /// or a model name.
    fn name(&self) -> &str;

    fn decide(&mut self, obs: &Observation) -> Result<AgentMove, AgentError>;
}
