//! LLM-backed players: prompt assembly, reply parsing, and the retry loop.
//!
//! The model is asked to end its reply with one fenced move block:
//!
//! ~~~text
//! ```move
//! reasoning: <private thinking, one line>
//! message: <what to say to the other party, one line>
//! action: <propose | accept | reject>
//! price: <integer, required when action is propose, omitted otherwise>
//! ```
//! ~~~
//!
//! [`parse_move`] reads the last complete block and validates it against the
//! rules. A malformed or illegal reply is sent back to the model with an
//! explanation of what was wrong, up to a total attempt budget; only then
//! does the agent fail.

use std::sync::Arc;

use crate::engine::{Action, ActionKind, Price, Role};
use crate::gateway::{ChatMessage, Gateway, ModelEndpoint};

use super::{Agent, AgentError, AgentMove, Observation};

/// Reply format statement included in every system prompt and in retry
/// feedback. The parser accepts exactly what this text promises.
pub const MOVE_BLOCK_CONTRACT: &str = r#"End your reply with exactly one fenced move block:

```move
reasoning: <your private thinking, one line; the other party never sees this>
message: <what you say to the other party, one line>
action: <one of: propose, accept, reject>
price: <integer amount, required when action is propose, omitted otherwise>
```

Block rules: one `key: value` pair per line; `accept` takes the standing offer and ends the round; `reject` walks away and ends the round with no deal; if your reply contains several move blocks, only the last complete one counts."#;

/// Builds the chat messages for one decision: a system message with the
/// rules, this side's private information, and the persona conditioning,
/// plus a user message describing the round so far.
pub fn build_prompt(obs: &Observation, persona_block: &str) -> Vec<ChatMessage> {
    let mut system = String::new();
    system.push_str(&format!(
        "You are the {} in a negotiation over one {}, priced in {}.\n",
        obs.role, obs.item_name, obs.currency_name
    ));
    match obs.role {
        Role::Seller => system.push_str(&format!(
            "Producing the {} cost you {} {}; any sale above that is profit, and selling below it is a loss. This number is private to you.\n",
            obs.item_name, obs.private_value, obs.currency_name
        )),
        Role::Buyer => system.push_str(&format!(
            "You can pay at most {} {} for the {}; every unit below that limit is money you keep. This number is private to you.\n",
            obs.private_value, obs.currency_name, obs.item_name
        )),
    }
    system.push_str(&format!(
        "Offers must be whole numbers between {} and {}. The round allows {} turns in total across both parties; if no offer is accepted by then, the negotiation fails and nobody trades. Get the best price you can.\n",
        obs.price_min, obs.price_max, obs.max_turns
    ));
    if !persona_block.is_empty() {
        system.push_str("\nYour negotiation persona: ");
        system.push_str(persona_block);
        system.push('\n');
    }
    system.push('\n');
    system.push_str(MOVE_BLOCK_CONTRACT);

    let mut user = String::new();
    if obs.dialogue.is_empty() {
        user.push_str("The negotiation is just beginning; you open it.\n");
    } else {
        user.push_str("Dialogue so far:\n");
        for d in &obs.dialogue {
            let did = match d.action {
                Action::Propose { price } => format!("proposed {price}"),
                Action::Accept => "accepted".to_string(),
                Action::Reject => "rejected".to_string(),
            };
            user.push_str(&format!(
                "  Turn {} - {} ({did}): {}\n",
                d.turn, d.actor, d.message
            ));
        }
    }
    if !obs.own_reasoning.is_empty() {
        user.push_str("Your earlier private notes:\n");
        for (i, note) in obs.own_reasoning.iter().enumerate() {
            user.push_str(&format!("  {}. {}\n", i + 1, note));
        }
    }
    if let Some((price, by)) = obs.standing_offer {
        user.push_str(&format!(
            "The standing offer is {price} {}, made by the {by}.\n",
            obs.currency_name
        ));
    } else {
        user.push_str("There is no standing offer.\n");
    }
    let legal: Vec<_> = obs.legal.iter().map(|k| k.to_string()).collect();
    user.push_str(&format!(
        "This is turn {} of {}; {} turns remain after it. Your legal actions: {}.\n",
        obs.turn,
        obs.max_turns,
        obs.turns_remaining.saturating_sub(1),
        legal.join(", ")
    ));
    if obs.turns_remaining == 1 {
        user.push_str(
            "Warning: this is the final turn. A new proposal can no longer be answered, so accepting the standing offer is the only way a deal can still happen.\n",
        );
    }
    user.push_str("Decide your move now.");

    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

/// Extracts the last complete ```move fenced block, or `None`.
fn last_move_block(text: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        match &mut current {
            None if trimmed == "```move" => current = Some(Vec::new()),
            None => {}
            Some(lines) => {
                if trimmed == "```" {
                    blocks.push(lines.join("\n"));
                    current = None;
                } else {
                    lines.push(line);
                }
            }
        }
    }
    blocks.pop()
}

fn malformed(reason: impl Into<String>, raw: &str) -> AgentError {
    AgentError::MalformedReply {
        reason: reason.into(),
        raw: raw.to_string(),
    }
}

/// Parses a model reply into a move and validates it against the rules in
/// `obs`. Format problems come back as [`AgentError::MalformedReply`], moves
/// the rules forbid as [`AgentError::IllegalMove`]; both are worth a retry
/// with feedback.
pub fn parse_move(text: &str, obs: &Observation) -> Result<AgentMove, AgentError> {
    let block =
        last_move_block(text).ok_or_else(|| malformed("no complete ```move block found", text))?;

    let mut reasoning: Option<String> = None;
    let mut message: Option<String> = None;
    let mut action: Option<String> = None;
    let mut price: Option<String> = None;
    for line in block.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| malformed(format!("line {line:?} is not `key: value`"), text))?;
        let slot = match key.trim().to_lowercase().as_str() {
            "reasoning" => &mut reasoning,
            "message" => &mut message,
            "action" => &mut action,
            "price" => &mut price,
            other => {
                log::debug!("ignoring unknown move field {other:?}");
                continue;
            }
        };
        if slot.replace(value.trim().to_string()).is_some() {
            return Err(malformed(
                format!("field {:?} appears more than once", key.trim()),
                text,
            ));
        }
    }

    let reasoning = reasoning.ok_or_else(|| malformed("missing `reasoning` field", text))?;
    let message = message.ok_or_else(|| malformed("missing `message` field", text))?;
    let action = action.ok_or_else(|| malformed("missing `action` field", text))?;

    let action = match action.to_lowercase().as_str() {
        "propose" => {
            let raw = price.ok_or_else(|| malformed("propose requires a `price` field", text))?;
            let price: Price = raw.parse().map_err(|_| {
                malformed(format!("price {raw:?} is not a non-negative integer"), text)
            })?;
            Action::Propose { price }
        }
        kind @ ("accept" | "reject") => {
            if price.is_some() {
                return Err(malformed(
                    format!("`price` must be omitted when action is {kind}"),
                    text,
                ));
            }
            if kind == "accept" {
                Action::Accept
            } else {
                Action::Reject
            }
        }
        other => {
            return Err(malformed(
                format!("action must be propose, accept, or reject, got {other:?}"),
                text,
            ))
        }
    };

    if !obs.legal.contains(&action.kind()) {
        let why = match action.kind() {
            ActionKind::Accept | ActionKind::Reject => {
                "there is no standing offer to respond to".to_string()
            }
            ActionKind::Propose => "proposing is not allowed now".to_string(),
        };
        return Err(AgentError::IllegalMove {
            reason: format!("{} is illegal: {why}", action.kind()),
        });
    }
    if let Action::Propose { price } = action {
        if price < obs.price_min || price > obs.price_max {
            return Err(AgentError::IllegalMove {
                reason: format!(
                    "price {price} is outside the allowed range {} to {}",
                    obs.price_min, obs.price_max
                ),
            });
        }
    }

    Ok(AgentMove {
        reasoning,
        message,
        action,
    })
}

fn feedback_for(err: &AgentError) -> String {
    format!(
        "Your previous reply was not usable: {err}.\n\n{MOVE_BLOCK_CONTRACT}\n\nReply again with one corrected move block."
    )
}

/// Asks the model for a move, feeding parse and legality failures back to it
/// until a usable move arrives or `retry_budget` total attempts are spent.
///
/// Transport-level problems are the gateway's business; once
/// [`Gateway::send_chat`] gives up, the error aborts the decision
/// immediately rather than consuming reply attempts.
pub fn llm_decide(
    gateway: &Gateway,
    endpoint: &ModelEndpoint,
    persona_block: &str,
    obs: &Observation,
    retry_budget: u32,
) -> Result<AgentMove, AgentError> {
    let budget = retry_budget.max(1);
    let mut messages = build_prompt(obs, persona_block);
    let mut last = String::new();
    for attempt in 1..=budget {
        let reply = gateway.send_chat(&endpoint.chat_request(messages.clone()))?;
        match parse_move(&reply.content, obs) {
            Ok(mv) => return Ok(mv),
            Err(err @ (AgentError::MalformedReply { .. } | AgentError::IllegalMove { .. })) => {
                log::warn!("reply attempt {attempt}/{budget} unusable: {err}");
                last = err.to_string();
                messages.push(ChatMessage::assistant(reply.content));
                messages.push(ChatMessage::user(feedback_for(&err)));
            }
            Err(other) => return Err(other),
        }
    }
    Err(AgentError::Exhausted {
        attempts: budget,
        last,
    })
}

/// [`Agent`] that plays through a chat model.
pub struct LlmAgent {
    name: String,
    gateway: Arc<Gateway>,
    endpoint: ModelEndpoint,
    persona_block: String,
    retry_budget: u32,
}

impl LlmAgent {
    pub fn new(
        gateway: Arc<Gateway>,
        endpoint: ModelEndpoint,
        persona_block: impl Into<String>,
        retry_budget: u32,
    ) -> Self {
        LlmAgent {
            name: endpoint.model.clone(),
            gateway,
            endpoint,
            persona_block: persona_block.into(),
            retry_budget,
        }
    }

    /// Overrides the recorded agent name (defaults to the model id).
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Agent for LlmAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, obs: &Observation) -> Result<AgentMove, AgentError> {
        llm_decide(
            &self.gateway,
            &self.endpoint,
            &self.persona_block,
            obs,
            self.retry_budget,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{NegotiationState, RoundConfig};
    use crate::gateway::{mock_transport, ScriptedReply, VirtualClock};

    fn opening_obs() -> Observation {
        let state = NegotiationState::new(RoundConfig::default()).unwrap();
        Observation::capture(&state, Role::Seller).unwrap()
    }

    fn replying_obs() -> Observation {
        let state = NegotiationState::new(RoundConfig::default()).unwrap();
        let state = state
            .apply(
                Role::Seller,
                "open high",
                "80 takes it",
                Action::Propose { price: 80 },
            )
            .unwrap();
        Observation::capture(&state, Role::Buyer).unwrap()
    }

    fn block(action: &str, price: Option<&str>) -> String {
        let price_line = price.map(|p| format!("price: {p}\n")).unwrap_or_default();
        format!("```move\nreasoning: thinking\nmessage: talking\naction: {action}\n{price_line}```")
    }

    #[test]
    fn parses_each_action_kind() {
        let obs = replying_obs();
        let mv = parse_move(&block("propose", Some("55")), &obs).unwrap();
        assert_eq!(mv.action, Action::Propose { price: 55 });
        assert_eq!(mv.reasoning, "thinking");
        assert_eq!(mv.message, "talking");
        assert_eq!(
            parse_move(&block("accept", None), &obs).unwrap().action,
            Action::Accept
        );
        assert_eq!(
            parse_move(&block("reject", None), &obs).unwrap().action,
            Action::Reject
        );
    }

    #[test]
    fn last_complete_block_wins() {
        let obs = replying_obs();
        let text = format!(
            "I considered this:\n{}\nbut on reflection:\n{}\ntrailing prose",
            block("propose", Some("70")),
            block("accept", None)
        );
        assert_eq!(parse_move(&text, &obs).unwrap().action, Action::Accept);
    }

    #[test]
    fn unclosed_block_does_not_count() {
        let obs = replying_obs();
        let text = format!(
            "{}\n```move\nreasoning: r\nmessage: m\naction: reject",
            block("propose", Some("70"))
        );
        // The trailing unterminated block is ignored; the complete one wins.
        assert_eq!(
            parse_move(&text, &obs).unwrap().action,
            Action::Propose { price: 70 }
        );
        assert!(matches!(
            parse_move("```move\nreasoning: r", &obs),
            Err(AgentError::MalformedReply { .. })
        ));
    }

    #[test]
    fn keys_are_case_insensitive_and_unknown_keys_skipped() {
        let obs = replying_obs();
        let text = "```move\nReasoning: r\nMessage: m\nconfidence: high\nAction: ACCEPT\n```";
        assert_eq!(parse_move(text, &obs).unwrap().action, Action::Accept);
    }

    #[test]
    fn crlf_replies_parse() {
        let obs = replying_obs();
        let text = "```move\r\nreasoning: r\r\nmessage: m\r\naction: accept\r\n```\r\n";
        assert_eq!(parse_move(text, &obs).unwrap().action, Action::Accept);
    }

    #[test]
    fn malformed_shapes_are_rejected() {
        let obs = replying_obs();
        let cases: Vec<String> = vec![
            "no block at all".into(),
            "```move\nreasoning: r\nmessage: m\n```".into(), // missing action
            "```move\nreasoning: r\naction: accept\n```".into(), // missing message
            "```move\nmessage: m\naction: accept\n```".into(), // missing reasoning
            block("hold", None),                             // unknown action
            block("propose", None),                          // propose without price
            block("propose", Some("sixty")),                 // non-integer price
            block("propose", Some("-5")),                    // negative price
            block("accept", Some("55")),                     // price on accept
            "```move\nreasoning: r\nmessage: m\naction: accept\naction: reject\n```".into(),
            "```move\njust words\n```".into(), // line without colon
        ];
        for text in cases {
            assert!(
                matches!(
                    parse_move(&text, &obs),
                    Err(AgentError::MalformedReply { .. })
                ),
                "{text:?}"
            );
        }
    }

    #[test]
    fn illegal_moves_are_distinguished_from_malformed() {
        // No standing offer on the opening turn: accept parses but is illegal.
        let obs = opening_obs();
        assert!(matches!(
            parse_move(&block("accept", None), &obs),
            Err(AgentError::IllegalMove { .. })
        ));
        assert!(matches!(
            parse_move(&block("propose", Some("500")), &obs),
            Err(AgentError::IllegalMove { .. })
        ));
    }

    #[test]
    fn prompt_keeps_private_data_on_the_right_side() {
        let obs = replying_obs();
        let messages = build_prompt(&obs, "Squeeze every unit you can.");
        assert_eq!(messages.len(), 2);
        let system = &messages[0].content;
        assert!(system.contains("buyer"));
        assert!(system.contains("at most 60"));
        assert!(system.contains("Squeeze every unit you can."));
        assert!(system.contains("```move"));
        // The seller's cost must be nowhere in the buyer's prompt.
        assert!(!system.contains("40"));
        let user = &messages[1].content;
        assert!(user.contains("80 takes it"));
        assert!(user.contains("standing offer is 80"));
        assert!(!user.contains("open high"));
    }

    #[test]
    fn empty_persona_block_leaves_no_trace() {
        let messages = build_prompt(&opening_obs(), "");
        assert!(!messages[0].content.contains("persona"));
    }

    #[test]
    fn final_turn_gets_a_warning_line() {
        let mut state = NegotiationState::new(RoundConfig::default()).unwrap();
        for i in 0..9u32 {
            let actor = state.expected_actor().unwrap();
            let price = if actor == Role::Seller {
                80 - i
            } else {
                20 + i
            };
            state = state
                .apply(actor, "", "", Action::Propose { price })
                .unwrap();
        }
        let obs = Observation::capture(&state, Role::Buyer).unwrap();
        assert_eq!(obs.turns_remaining, 1);
        let user = &build_prompt(&obs, "")[1].content;
        assert!(user.contains("final turn"));
        let earlier = &build_prompt(&replying_obs(), "")[1].content;
        assert!(!earlier.contains("final turn"));
    }

    fn decide_with_script(
        script: Vec<ScriptedReply>,
        budget: u32,
    ) -> (
        Result<AgentMove, AgentError>,
        Arc<crate::gateway::MockTransport>,
    ) {
        let transport = Arc::new(mock_transport(script));
        let gateway =
            Gateway::new(transport.clone(), 600).with_clock(Arc::new(VirtualClock::new()));
        let endpoint = ModelEndpoint::new("test-model", "http://unused");
        let obs = replying_obs();
        let result = llm_decide(&gateway, &endpoint, "", &obs, budget);
        (result, transport)
    }

    #[test]
    fn garbage_then_valid_reply_consumes_budget() {
        let (result, transport) = decide_with_script(
            vec![
                ScriptedReply::content("no block here"),
                ScriptedReply::content(block("hold", None)),
                ScriptedReply::content(block("accept", None)),
            ],
            3,
        );
        assert_eq!(result.unwrap().action, Action::Accept);
        let requests = transport.requests();
        assert_eq!(requests.len(), 3);
        // Each retry carries the failed reply plus corrective feedback.
        assert_eq!(requests[0].messages.len(), 2);
        assert_eq!(requests[1].messages.len(), 4);
        assert_eq!(requests[2].messages.len(), 6);
        assert!(requests[1].messages[3].content.contains("not usable"));
        assert!(requests[1].messages[3].content.contains("```move"));
    }

    #[test]
    fn budget_exhaustion_is_an_agent_failure() {
        let (result, transport) = decide_with_script(
            vec![
                ScriptedReply::content("garbage"),
                ScriptedReply::content("more garbage"),
                ScriptedReply::content(block("accept", None)),
            ],
            2,
        );
        assert!(matches!(
            result.unwrap_err(),
            AgentError::Exhausted { attempts: 2, .. }
        ));
        assert_eq!(transport.requests().len(), 2);
    }

    #[test]
    fn gateway_failure_aborts_without_consuming_reply_budget() {
        let (result, transport) = decide_with_script(vec![ScriptedReply::Status(401)], 5);
        assert!(matches!(result.unwrap_err(), AgentError::Gateway(_)));
        assert_eq!(transport.requests().len(), 1);
    }

    #[test]
    fn agent_wrapper_reports_model_name() {
        let transport = Arc::new(mock_transport(vec![ScriptedReply::content(block(
            "propose",
            Some("75"),
        ))]));
        let gateway =
            Arc::new(Gateway::new(transport, 600).with_clock(Arc::new(VirtualClock::new())));
        let endpoint = ModelEndpoint::new("some-model", "http://unused");
        let mut agent = LlmAgent::new(gateway, endpoint, "", 3);
        assert_eq!(agent.name(), "some-model");
        let mv = agent.decide(&opening_obs()).unwrap();
        assert_eq!(mv.action, Action::Propose { price: 75 });
    }
}
