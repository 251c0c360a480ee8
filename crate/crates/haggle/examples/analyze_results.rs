//! Turn a results file into the full analysis bundle: aggregate tables, the
//! persona-pair heatmap, and boosted-tree Shapley attribution of sale
//! prices to personas.
//!
//! ```text
//! cargo run --example analyze_results                    # self-contained demo
//! cargo run --example analyze_results -- my/rounds.csv   # analyze your own run
//! ```

use std::path::PathBuf;

use haggle::analysis::{write_analysis, GbtParams};
use haggle::tournament::{read_rounds_csv, run_tournament, ScriptedFactory, TournamentPlan};
use haggle::{PersonaRegistry, RoundConfig};

fn main() {
    let records = match std::env::args().nth(1) {
        Some(path) => {
            let path = PathBuf::from(path);
            match read_rounds_csv(&path) {
                Ok(records) => records,
                Err(err) => return eprintln!("cannot load {}: {err}", path.display()),
            }
        }
        None => {
            println!("no results file given; generating a demo tournament first\n");
            let plan = TournamentPlan {
                round_config: RoundConfig::default(),
                models: vec!["scripted".to_string()],
                personas: PersonaRegistry::builtin()
                    .iter()
                    .map(|spec| spec.name.clone())
                    .collect(),
                repetitions: 4,
                base_seed: 21,
            };
            run_tournament(&plan, &ScriptedFactory { jitter: true }, 4)
                .expect("plan expands")
                .records
        }
    };

    let out_dir = PathBuf::from("analysis_out");
    let outputs = write_analysis(&records, &out_dir, &GbtParams::default())
        .expect("analysis over a non-empty corpus");

    println!("wrote:");
    for table in &outputs.tables {
        println!("  {}", table.display());
    }
    println!("  {}", outputs.heatmap.display());
    if let Some(attribution) = &outputs.attribution {
        println!("  {}", attribution.display());
    }
    println!("  {}\n", outputs.report.display());

    let report = std::fs::read_to_string(&outputs.report).expect("report was just written");
    println!("{report}");
}
