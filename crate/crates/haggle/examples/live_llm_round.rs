//! Play one round against a real chat endpoint: an LLM seller with a
//! persona versus the deterministic cooperative buyer preset.
//!
//! Point it at any OpenAI-compatible API via environment variables:
//!
//! ```text
//! export HAGGLE_BASE_URL=https://api.example.com/v1
//! export HAGGLE_MODEL=some-model-id
//! export HAGGLE_API_KEY=...          # or set HAGGLE_API_KEY_ENV to another var name
//! cargo run --example live_llm_round -- cunning
//! ```
//!
//! The argument picks the seller persona (default competitive). Without the
//! variables set, the example explains what it needs and exits.

use std::sync::Arc;

use haggle::agents::{LlmAgent, ScriptedAgent};
use haggle::gateway::{Gateway, ModelEndpoint};
use haggle::tournament::run_round;
use haggle::{get_persona, render_persona_block, Role, RoundConfig};

fn main() {
    let (base_url, model) = match (
        std::env::var("HAGGLE_BASE_URL"),
        std::env::var("HAGGLE_MODEL"),
    ) {
        (Ok(base_url), Ok(model)) => (base_url, model),
        _ => {
            eprintln!("not configured; this example needs a live endpoint:");
            eprintln!("  HAGGLE_BASE_URL  API root, e.g. https://api.openai.com/v1");
            eprintln!("  HAGGLE_MODEL     model identifier");
            eprintln!("  HAGGLE_API_KEY   bearer token (never put this in a file)");
            eprintln!("for an offline walkthrough of the same code path, run:");
            eprintln!("  cargo run --example mock_llm_round");
            return;
        }
    };
    let key_env =
        std::env::var("HAGGLE_API_KEY_ENV").unwrap_or_else(|_| "HAGGLE_API_KEY".to_string());

    let mut endpoint = ModelEndpoint::new(model, base_url);
    endpoint.api_key_env = key_env;
    let gateway = match Gateway::for_endpoint(&endpoint) {
        Ok(gateway) => Arc::new(gateway),
        Err(err) => return eprintln!("cannot build gateway: {err}"),
    };

    let persona_name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "competitive".to_string());
    let persona = match get_persona(&persona_name) {
        Some(spec) => spec,
        None => return eprintln!("unknown persona {persona_name:?}"),
    };

    let mut seller = LlmAgent::new(gateway, endpoint.clone(), render_persona_block(persona), 3)
        .with_name(format!("{}:{persona_name}", endpoint.model));
    let mut buyer = ScriptedAgent::preset(Role::Buyer, "cooperative").expect("built-in preset");

    println!(
        "live round: {} selling (persona {persona_name}) vs scripted cooperative buyer\n",
        endpoint.model
    );
    let config = RoundConfig::default();
    match run_round(&config, &mut seller, &mut buyer) {
        Ok(state) => {
            for turn in state.transcript() {
                println!(
                    "turn {} {} | {}",
                    turn.turn,
                    turn.actor.label(),
                    turn.message
                );
                println!("         (thinking: {})", turn.reasoning);
            }
            let outcome = state.outcome().expect("round finished");
            println!(
                "\n{} at price {:?}; winner {}",
                outcome.end_reason.label(),
                outcome.final_price,
                outcome.winner.label()
            );
        }
        Err(err) => eprintln!("round aborted: {err}"),
    }
}
