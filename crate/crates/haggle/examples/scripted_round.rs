//! Play one negotiation round between two preset agents and print every
//! turn. Run with:
//!
//! ```text
//! cargo run --example scripted_round
//! cargo run --example scripted_round -- cunning desperate
//! ```
//!
//! The two optional arguments pick the seller and buyer personas.

use haggle::agents::ScriptedAgent;
use haggle::engine::Action;
use haggle::tournament::run_round;
use haggle::{Role, RoundConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seller_persona = args.first().map(String::as_str).unwrap_or("competitive");
    let buyer_persona = args.get(1).map(String::as_str).unwrap_or("cooperative");

    let mut seller = match ScriptedAgent::preset(Role::Seller, seller_persona) {
        Some(agent) => agent,
        None => return eprintln!("no seller preset named {seller_persona:?}"),
    };
    let mut buyer = match ScriptedAgent::preset(Role::Buyer, buyer_persona) {
        Some(agent) => agent,
        None => return eprintln!("no buyer preset named {buyer_persona:?}"),
    };

    let config = RoundConfig::default();
    println!(
        "one {} for sale | seller cost {} (private) | buyer limit {} (private) | {} turns max",
        config.item_name, config.seller_cost, config.buyer_limit, config.max_turns
    );
    println!("seller: {seller_persona} | buyer: {buyer_persona}\n");

    let state = run_round(&config, &mut seller, &mut buyer).expect("scripted agents cannot fail");

    for turn in state.transcript() {
        let action = match turn.action {
            Action::Propose { price } => format!("propose {price}"),
            Action::Accept => "accept".to_string(),
            Action::Reject => "reject".to_string(),
        };
        println!(
            "turn {:>2} | {:<6} | {:<11} | says: {}",
            turn.turn,
            turn.actor.label(),
            action,
            turn.message
        );
        println!(
            "        |        |             | thinks: {}",
            turn.reasoning
        );
    }

    let outcome = state.outcome().expect("round ran to completion");
    println!(
        "\n{} after {} turns; final price {}; {} better off",
        outcome.end_reason.label(),
        outcome.turns_used,
        outcome
            .final_price
            .map(|p| p.to_string())
            .unwrap_or_else(|| "none".to_string()),
        outcome.winner.label()
    );
    if let Some(price) = outcome.final_price {
        println!(
            "seller profit: {} | buyer savings: {}",
            price as i64 - config.seller_cost as i64,
            config.buyer_limit as i64 - price as i64
        );
    }
}
