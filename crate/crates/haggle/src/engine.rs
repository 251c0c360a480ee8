//! Turn-based negotiation state machine.
//!
//! One round is a strict alternation of turns between a seller and a buyer
//! haggling over a single item priced in an integer currency. The seller
//! opens, each turn carries exactly one action (propose, accept, or reject),
//! and the round closes on acceptance, rejection, or the turn cap. States are
//! immutable snapshots: [`NegotiationState::apply`] returns a new state, so
//! replaying a recorded action sequence is bit-exact.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer currency amount (the game's fictional unit).
pub type Price = u32;

/// Errors surfaced by the negotiation state machine.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid round config: {0}")]
    InvalidConfig(String),
    #[error("out of turn: expected {expected}, got {got}")]
    OutOfTurn { expected: Role, got: Role },
    #[error("illegal action {kind} in current state")]
    IllegalAction { kind: ActionKind },
    #[error("price {price} outside [{min}, {max}]")]
    PriceOutOfRange {
        price: Price,
        min: Price,
        max: Price,
    },
    #[error("inconsistent outcome: {0}")]
    InconsistentOutcome(String),
}

/// Which side of the table an agent sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Seller,
    Buyer,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::Seller => Role::Buyer,
            Role::Buyer => Role::Seller,
        }
    }

    /// Lowercase label used in records and prompts.
    pub fn label(self) -> &'static str {
        match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Economic parameters of one round.
///
/// Defaults follow the standard setup: production cost 40, payment limit 60,
/// win baseline 50, ten turns, proposals restricted to [0, 100].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub item_name: String,
    pub currency_name: String,
    /// Seller's production cost — the seller's private valuation.
    pub seller_cost: Price,
    /// Buyer's maximum willingness to pay — the buyer's private valuation.
    pub buyer_limit: Price,
    /// Agreed price above this is a seller win, below a buyer win, equal a draw.
    pub win_baseline: Price,
    /// Total actions across both players before the round is forced closed.
    pub max_turns: u32,
    pub price_min: Price,
    pub price_max: Price,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            item_name: "X".to_string(),
            currency_name: "ZUP".to_string(),
            seller_cost: 40,
            buyer_limit: 60,
            win_baseline: 50,
            max_turns: 10,
            price_min: 0,
            price_max: 100,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.seller_cost < self.win_baseline && self.win_baseline < self.buyer_limit) {
            return Err(EngineError::InvalidConfig(format!(
                "need seller_cost < win_baseline < buyer_limit, got {} / {} / {}",
                self.seller_cost, self.win_baseline, self.buyer_limit
            )));
        }
        if self.max_turns < 2 {
            return Err(EngineError::InvalidConfig(format!(
                "max_turns must be at least 2, got {}",
                self.max_turns
            )));
        }
        if self.price_min > self.seller_cost || self.buyer_limit > self.price_max {
            return Err(EngineError::InvalidConfig(format!(
                "price bounds [{}, {}] must enclose valuations {} and {}",
                self.price_min, self.price_max, self.seller_cost, self.buyer_limit
            )));
        }
        Ok(())
    }
}

/// One of the three moves available on a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Propose { price: Price },
    Accept,
    Reject,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Propose { .. } => ActionKind::Propose,
            Action::Accept => ActionKind::Accept,
            Action::Reject => ActionKind::Reject,
        }
    }
}

/// Action discriminant, used for legality sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Propose,
    Accept,
    Reject,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Propose => f.write_str("propose"),
            ActionKind::Accept => f.write_str("accept"),
            ActionKind::Reject => f.write_str("reject"),
        }
    }
}

/// One recorded turn: who moved, what they privately thought, what they said,
/// and what they did. Reasoning is never shown to the opponent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based position in the transcript.
    pub turn: u32,
    pub actor: Role,
    pub reasoning: String,
    pub message: String,
    pub action: Action,
}

/// Why a round closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Agreement,
    Rejected,
    TurnLimit,
}

impl EndReason {
    pub fn label(self) -> &'static str {
        match self {
            EndReason::Agreement => "agreement",
            EndReason::Rejected => "rejected",
            EndReason::TurnLimit => "turn_limit",
        }
    }
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome classification relative to the win baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Winner {
    #[serde(rename = "seller")]
    SellerWin,
    #[serde(rename = "buyer")]
    BuyerWin,
    #[serde(rename = "draw")]
    Draw,
}

impl Winner {
    pub fn label(self) -> &'static str {
        match self {
            Winner::SellerWin => "seller",
            Winner::BuyerWin => "buyer",
            Winner::Draw => "draw",
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Live-or-closed marker for a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Open,
    Closed(EndReason),
}

/// Final summary of a closed round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub end_reason: EndReason,
    /// Present iff the round ended in agreement.
    pub final_price: Option<Price>,
    pub winner: Winner,
    pub turns_used: u32,
}

/// Full state of one negotiation round.
///
/// ```
/// use haggle::engine::{Action, NegotiationState, Role, RoundConfig};
///
/// let state = NegotiationState::new(RoundConfig::default()).unwrap();
/// let state = state
///     .apply(Role::Seller, "anchor high", "80 or nothing", Action::Propose { price: 80 })
///     .unwrap();
/// let done = state.apply(Role::Buyer, "fine", "deal", Action::Accept).unwrap();
/// assert_eq!(done.outcome().unwrap().final_price, Some(80));
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationState {
    config: RoundConfig,
    transcript: Vec<TurnRecord>,
    phase: Phase,
}

impl NegotiationState {
    /// Opens a fresh round. The seller moves first.
    pub fn new(config: RoundConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(NegotiationState {
            config,
            transcript: Vec::new(),
            phase: Phase::Open,
        })
    }

    pub fn config(&self) -> &RoundConfig {
        &self.config
    }

    pub fn transcript(&self) -> &[TurnRecord] {
        &self.transcript
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.phase, Phase::Closed(_))
    }

    pub fn turns_taken(&self) -> u32 {
        self.transcript.len() as u32
    }

    pub fn turns_remaining(&self) -> u32 {
        self.config.max_turns - self.turns_taken()
    }

    /// Who moves next, or `None` once the round is closed.
    pub fn expected_actor(&self) -> Option<Role> {
        if self.is_closed() {
            return None;
        }
        Some(if self.transcript.len().is_multiple_of(2) {
            Role::Seller
        } else {
            Role::Buyer
        })
    }

    /// The live offer on the table: price and who proposed it.
    pub fn standing_offer(&self) -> Option<(Price, Role)> {
        if self.is_closed() {
            return None;
        }
        match self.transcript.last() {
            Some(TurnRecord {
                action: Action::Propose { price },
                actor,
                ..
            }) => Some((*price, *actor)),
            _ => None,
        }
    }

    /// Actions legal in the current state. Empty once closed; a fresh round
    /// admits only a proposal; a standing offer admits all three.
    pub fn legal_actions(&self) -> BTreeSet<ActionKind> {
        let mut set = BTreeSet::new();
        if self.is_closed() {
            return set;
        }
        set.insert(ActionKind::Propose);
        if self.standing_offer().is_some() {
            set.insert(ActionKind::Accept);
            set.insert(ActionKind::Reject);
        }
        set
    }

    /// Records one turn and returns the successor state.
    ///
    /// Accept closes the round at the standing offer; reject closes it with
    /// no deal. A proposal that fills the last allowed turn is recorded and
    /// then the round closes at the turn limit — the opponent gets no reply.
    pub fn apply(
        &self,
        actor: Role,
        reasoning: &str,
        message: &str,
        action: Action,
    ) -> Result<NegotiationState, EngineError> {
        let expected = self.expected_actor().ok_or(EngineError::IllegalAction {
            kind: action.kind(),
        })?;
        if actor != expected {
            return Err(EngineError::OutOfTurn {
                expected,
                got: actor,
            });
        }
        if !self.legal_actions().contains(&action.kind()) {
            return Err(EngineError::IllegalAction {
                kind: action.kind(),
            });
        }
        if let Action::Propose { price } = action {
            if price < self.config.price_min || price > self.config.price_max {
                return Err(EngineError::PriceOutOfRange {
                    price,
                    min: self.config.price_min,
                    max: self.config.price_max,
                });
            }
        }

        let mut next = self.clone();
        next.transcript.push(TurnRecord {
            turn: self.turns_taken() + 1,
            actor,
            reasoning: reasoning.to_string(),
            message: message.to_string(),
            action,
        });
        next.phase = match action {
            Action::Accept => Phase::Closed(EndReason::Agreement),
            Action::Reject => Phase::Closed(EndReason::Rejected),
            Action::Propose { .. } => {
                if next.transcript.len() as u32 >= next.config.max_turns {
                    Phase::Closed(EndReason::TurnLimit)
                } else {
                    Phase::Open
                }
            }
        };
        Ok(next)
    }

    /// The accepted price: the proposal immediately preceding the accept.
    fn accepted_price(&self) -> Option<Price> {
        let n = self.transcript.len();
        if n < 2 {
            return None;
        }
        match (
            &self.transcript[n - 1].action,
            &self.transcript[n - 2].action,
        ) {
            (Action::Accept, Action::Propose { price }) => Some(*price),
            _ => None,
        }
    }

    /// Outcome summary, available once the round has closed.
    pub fn outcome(&self) -> Option<RoundOutcome> {
        let Phase::Closed(end_reason) = self.phase else {
            return None;
        };
        let final_price = match end_reason {
            EndReason::Agreement => self.accepted_price(),
            _ => None,
        };
        let winner = classify_outcome(end_reason, final_price, self.config.win_baseline)
            .expect("closed state is internally consistent");
        Some(RoundOutcome {
            end_reason,
            final_price,
            winner,
            turns_used: self.turns_taken(),
        })
    }
}

/// Classifies a closed round against the win baseline.
///
/// Agreement above the baseline is a seller win, below a buyer win, exactly
/// at it a draw. Rounds that ended without a deal are draws.
pub fn classify_outcome(
    end_reason: EndReason,
    final_price: Option<Price>,
    win_baseline: Price,
) -> Result<Winner, EngineError> {
    match (end_reason, final_price) {
        (EndReason::Agreement, Some(price)) => Ok(if price > win_baseline {
            Winner::SellerWin
        } else if price < win_baseline {
            Winner::BuyerWin
        } else {
            Winner::Draw
        }),
        (EndReason::Agreement, None) => Err(EngineError::InconsistentOutcome(
            "agreement without a final price".to_string(),
        )),
        (reason, Some(price)) => Err(EngineError::InconsistentOutcome(format!(
            "{reason} carries a final price of {price}"
        ))),
        (_, None) => Ok(Winner::Draw),
    }
}
