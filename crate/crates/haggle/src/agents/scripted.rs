//! Deterministic concession-ladder policies.
//!
//! A scripted player walks a price ladder from its opening offer toward its
//! reserve, one step per own proposal, and accepts as soon as the opponent's
//! standing offer meets its acceptance threshold. It never rejects, so a
//! scripted-vs-scripted round always ends in agreement or at the turn limit.
//! Given the same policy and observation the decision is identical, which
//! makes whole tournaments replayable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, AgentMove, Observation};
use crate::engine::{Action, ActionKind, Price, Role};

/// Concession-ladder parameters for one side.
///
/// For a seller the ladder descends from `open_price` toward `reserve`; for
/// a buyer it ascends. `accept_threshold` is the worst opponent offer the
/// policy will take (at or above it for sellers, at or below for buyers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    pub role: Role,
    pub open_price: Price,
    pub step: Price,
    pub reserve: Price,
    pub accept_threshold: Price,
}

impl ScriptedPolicy {
    /// Built-in parameterization of each persona's bargaining style for one
    /// side of the table. Aggressive personas open far from the midpoint and
    /// hold out for better thresholds; yielding personas start close and
    /// accept early.
    pub fn preset(role: Role, persona: &str) -> Option<ScriptedPolicy> {
        let (open_price, step, reserve, accept_threshold) = match (role, persona) {
            (Role::Seller, "competitive") => (89, 10, 52, 55),
            (Role::Seller, "cunning") => (88, 7, 49, 49),
            (Role::Seller, "selfish") => (79, 10, 50, 53),
            (Role::Seller, "control") => (74, 8, 44, 44),
            (Role::Seller, "desperate") => (64, 8, 45, 46),
            (Role::Seller, "cooperative") => (70, 8, 41, 42),
            (Role::Seller, "altruistic") => (56, 9, 42, 43),
            (Role::Buyer, "competitive") => (14, 10, 51, 49),
            (Role::Buyer, "cunning") => (13, 9, 51, 48),
            (Role::Buyer, "selfish") => (19, 10, 52, 52),
            (Role::Buyer, "control") => (27, 8, 53, 52),
            (Role::Buyer, "desperate") => (30, 10, 58, 55),
            (Role::Buyer, "cooperative") => (32, 11, 60, 58),
            (Role::Buyer, "altruistic") => (36, 9, 58, 56),
            _ => return None,
        };
        Some(ScriptedPolicy {
            role,
            open_price,
            step,
            reserve,
            accept_threshold,
        })
    }

    /// Perturbs the ladder slightly (opening by up to 2, the rest by up
    /// to 1) while keeping it pointed the right way. Used to de-duplicate
    /// repeated matches of the same pairing.
    pub fn with_jitter<R: Rng>(self, rng: &mut R) -> ScriptedPolicy {
        let shift = |v: Price, span: i64, rng: &mut R| -> Price {
            (v as i64 + rng.gen_range(-span..=span)).max(0) as Price
        };
        let open_price = shift(self.open_price, 2, rng);
        let step = shift(self.step, 1, rng).max(1);
        let reserve = shift(self.reserve, 1, rng);
        let accept_threshold = shift(self.accept_threshold, 1, rng);
        match self.role {
            Role::Seller => ScriptedPolicy {
                role: self.role,
                open_price: open_price.max(reserve),
                step,
                reserve,
                accept_threshold: accept_threshold.max(reserve),
            },
            Role::Buyer => ScriptedPolicy {
                role: self.role,
                open_price: open_price.min(reserve),
                step,
                reserve,
                accept_threshold: accept_threshold.min(reserve),
            },
        }
    }

    /// Price of this side's `n`-th proposal (0-based), before bounds clamping.
    fn ladder(&self, n: u32) -> Price {
        match self.role {
            Role::Seller => self
                .open_price
                .saturating_sub(n * self.step)
                .max(self.reserve),
            Role::Buyer => (self.open_price + n * self.step).min(self.reserve),
        }
    }

    fn offer_acceptable(&self, offer: Price) -> bool {
        match self.role {
            Role::Seller => offer >= self.accept_threshold,
            Role::Buyer => offer <= self.accept_threshold,
        }
    }
}

/// Chooses a move for `policy` in the observed situation.
///
/// Accepts an acceptable standing offer, otherwise proposes the next ladder
/// price. Deterministic: the same inputs always produce the same move.
pub fn scripted_decide(policy: &ScriptedPolicy, obs: &Observation) -> AgentMove {
    debug_assert_eq!(policy.role, obs.role);

    if let Some(offer) = obs.opponent_offer() {
        if policy.offer_acceptable(offer) && obs.legal.contains(&ActionKind::Accept) {
            return AgentMove {
                reasoning: format!(
                    "offer {offer} meets my threshold {}",
                    policy.accept_threshold
                ),
                message: format!("Deal at {offer} {}.", obs.currency_name),
                action: Action::Accept,
            };
        }
    }

    let own_proposals = obs
        .dialogue
        .iter()
        .filter(|d| d.actor == obs.role && matches!(d.action, Action::Propose { .. }))
        .count() as u32;
    let price = policy
        .ladder(own_proposals)
        .clamp(obs.price_min, obs.price_max);
    let message = match obs.role {
        Role::Seller => format!(
            "I can let the {} go for {price} {}.",
            obs.item_name, obs.currency_name
        ),
        Role::Buyer => format!(
            "I'll pay {price} {} for the {}.",
            obs.currency_name, obs.item_name
        ),
    };
    AgentMove {
        reasoning: format!(
            "ladder step {own_proposals}: offer {price}, holding reserve {}",
            policy.reserve
        ),
        message,
        action: Action::Propose { price },
    }
}

/// [`Agent`] wrapper around a [`ScriptedPolicy`].
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    policy: ScriptedPolicy,
    name: String,
}

impl ScriptedAgent {
    pub fn new(policy: ScriptedPolicy, name: impl Into<String>) -> Self {
        ScriptedAgent {
            policy,
            name: name.into(),
        }
    }

    /// Preset persona policy named `scripted:{persona}`.
    pub fn preset(role: Role, persona: &str) -> Option<Self> {
        ScriptedPolicy::preset(role, persona)
            .map(|policy| ScriptedAgent::new(policy, format!("scripted:{persona}")))
    }

    pub fn policy(&self) -> &ScriptedPolicy {
        &self.policy
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, obs: &Observation) -> Result<AgentMove, AgentError> {
        Ok(scripted_decide(&self.policy, obs))
    }
}
