//! Tour the built-in persona catalog: traits, summaries, and the prompt
//! text each persona contributes to an LLM agent's system message.
//!
//! ```text
//! cargo run --example persona_catalog            # catalog overview
//! cargo run --example persona_catalog -- cunning # full prompt text for one
//! ```

use haggle::{get_persona, render_persona_block, render_persona_variant, PersonaRegistry};

fn main() {
    if let Some(name) = std::env::args().nth(1) {
        return show_one(&name);
    }

    println!("built-in personas:\n");
    for spec in PersonaRegistry::builtin().iter() {
        let traits: Vec<String> = spec
            .traits
            .iter()
            .map(|(dim, level)| format!("{dim}={level}"))
            .collect();
        println!("  {:<12} {}", spec.name, spec.summary);
        println!(
            "  {:<12} traits: {} | prompt variants: {}\n",
            "",
            if traits.is_empty() {
                "none".to_string()
            } else {
                traits.join(", ")
            },
            spec.variants.len()
        );
    }
    println!("pass a persona name to see its full prompt text");
}

fn show_one(name: &str) {
    let spec = match get_persona(name) {
        Some(spec) => spec,
        None => {
            eprintln!("unknown persona {name:?}; run with no arguments for the catalog");
            return;
        }
    };

    println!("=== {} ({}) ===\n", spec.display_name, spec.name);
    println!("{}\n", spec.summary);

    if spec.variants.is_empty() {
        println!("this persona adds no conditioning text (the control baseline)");
        return;
    }

    println!("--- full block (all variants concatenated, the default mode) ---\n");
    println!("{}\n", render_persona_block(spec));

    println!("--- individual variants (used one at a time in rotate mode) ---\n");
    for idx in 0..spec.variants.len() {
        let text = render_persona_variant(spec, idx).expect("index is in range");
        println!("variant {idx}:\n{text}\n");
    }
}
