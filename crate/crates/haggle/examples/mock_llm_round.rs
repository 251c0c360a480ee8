//! Drive LLM-backed agents offline through a scripted transport: the same
//! prompt building, reply parsing, and retry-with-feedback loop as a live
//! endpoint, with the replies supplied here instead of an API.
//!
//! ```text
//! cargo run --example mock_llm_round
//! ```

use std::sync::Arc;

use haggle::agents::LlmAgent;
use haggle::gateway::{mock_transport, Gateway, ModelEndpoint, ScriptedReply};
use haggle::tournament::run_round;
use haggle::{get_persona, render_persona_block, RoundConfig};

fn move_block(reasoning: &str, message: &str, action: &str, price: Option<u32>) -> ScriptedReply {
    let mut text = format!(
        "Thinking it over.\n\n```move\nreasoning: {reasoning}\nmessage: {message}\naction: {action}\n"
    );
    if let Some(price) = price {
        text.push_str(&format!("price: {price}\n"));
    }
    text.push_str("```\n");
    ScriptedReply::content(text)
}

fn main() {
    // Replies pop in request order. Turn order is seller, buyer, seller, ...
    // The second reply is deliberately unusable: the buyer agent answers it
    // by re-asking with corrective feedback, consuming one retry.
    let transport = mock_transport(vec![
        move_block(
            "anchor well above cost",
            "Premium piece. 58 ZUP.",
            "propose",
            Some(58),
        ),
        ScriptedReply::content("Hmm, let me think about the price here..."),
        move_block(
            "counter low, leave room",
            "Too steep. 45 ZUP.",
            "propose",
            Some(45),
        ),
        move_block(
            "meet near the middle",
            "Let's settle at 52 ZUP.",
            "propose",
            Some(52),
        ),
        move_block(
            "inside my limit, close it",
            "Deal at 52 ZUP.",
            "accept",
            None,
        ),
    ]);
    let transport = Arc::new(transport);
    // Offline, so no meaningful rate limit: just keep it out of the way.
    let gateway = Arc::new(Gateway::new(transport.clone(), 10_000));

    let endpoint = ModelEndpoint::new("demo-model", "http://offline.invalid");
    let seller_persona = get_persona("competitive").expect("built-in persona");
    let buyer_persona = get_persona("cooperative").expect("built-in persona");
    let mut seller = LlmAgent::new(
        gateway.clone(),
        endpoint.clone(),
        render_persona_block(seller_persona),
        3,
    )
    .with_name("demo-model:competitive");
    let mut buyer = LlmAgent::new(gateway, endpoint, render_persona_block(buyer_persona), 3)
        .with_name("demo-model:cooperative");

    let config = RoundConfig::default();
    let state = run_round(&config, &mut seller, &mut buyer).expect("script covers the round");

    println!("transcript:");
    for turn in state.transcript() {
        println!(
            "  turn {} {} | {}",
            turn.turn,
            turn.actor.label(),
            turn.message
        );
    }
    let outcome = state.outcome().expect("round finished");
    println!(
        "\noutcome: {} at price {:?}, winner {}",
        outcome.end_reason.label(),
        outcome.final_price,
        outcome.winner.label()
    );

    let requests = transport.requests();
    println!(
        "\nthe transport saw {} requests for {} moves: the unusable reply cost one retry",
        requests.len(),
        state.transcript().len()
    );

    // What the model actually receives, using the retry exchange as the
    // specimen: system rules + persona, the dialogue so far, the bad reply,
    // and the corrective feedback.
    let retry = &requests[2];
    println!("\n--- retry request, message by message ---");
    for message in &retry.messages {
        let role = format!("{:?}", message.role).to_lowercase();
        println!("\n[{role}]");
        println!("{}", message.content);
    }
}
