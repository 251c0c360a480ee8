//! Run a full persona-by-persona tournament with the deterministic preset
//! agents, persist the artifacts, and print the aggregate tables.
//!
//! ```text
//! cargo run --example scripted_tournament
//! cargo run --example scripted_tournament -- out_dir 5 42
//! ```
//!
//! Arguments: output directory (default `tournament_out`), repetitions per
//! cell (default 3), base seed (default 7).

use haggle::analysis::{aggregate, pivot_heatmap, Grouping};
use haggle::tournament::{
    run_tournament, write_aborts, write_rounds_csv, write_transcripts, ScriptedFactory,
    TournamentPlan,
};
use haggle::{PersonaRegistry, RoundConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out_dir =
        std::path::PathBuf::from(args.first().map(String::as_str).unwrap_or("tournament_out"));
    let repetitions: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base_seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let personas: Vec<String> = PersonaRegistry::builtin()
        .iter()
        .map(|spec| spec.name.clone())
        .collect();
    let plan = TournamentPlan {
        round_config: RoundConfig::default(),
        models: vec!["scripted".to_string()],
        personas,
        repetitions,
        base_seed,
    };
    let n_rounds = plan.expand().expect("plan axes are non-empty").len();
    println!(
        "plan {}: {} personas x {} personas x {} repetitions = {} rounds",
        plan.fingerprint(),
        plan.personas.len(),
        plan.personas.len(),
        repetitions,
        n_rounds
    );

    let factory = ScriptedFactory { jitter: true };
    let output = run_tournament(&plan, &factory, 4).expect("plan expands");
    println!(
        "completed {} rounds, {} aborted\n",
        output.records.len(),
        output.aborts.len()
    );

    std::fs::create_dir_all(&out_dir).expect("create output dir");
    write_rounds_csv(&out_dir.join("rounds.csv"), &output.records).unwrap();
    write_transcripts(&out_dir.join("transcripts.jsonl"), &output.transcripts).unwrap();
    write_aborts(&out_dir.join("aborts.log"), &output.aborts).unwrap();
    println!(
        "artifacts in {}/: rounds.csv transcripts.jsonl aborts.log\n",
        out_dir.display()
    );

    let overall = aggregate(&output.records, Grouping::Winner).unwrap();
    println!("outcome shares:");
    for row in &overall.rows {
        println!(
            "  {:<8} {:>5} rounds ({:>5.1}%)  avg sale price {}",
            row.key[0],
            row.total,
            row.share * 100.0,
            row.avg_sale_price
                .map(|p| format!("{p:.2}"))
                .unwrap_or_else(|| "-".to_string())
        );
    }

    let by_persona = aggregate(&output.records, Grouping::PersonaRole).unwrap();
    println!("\nwin rate by persona and seat:");
    for row in &by_persona.rows {
        println!(
            "  {:<6} {:<12} {:>5.1}% wins over {} rounds",
            row.key[0],
            row.key[1],
            row.win_rate * 100.0,
            row.total
        );
    }

    let heatmap = pivot_heatmap(&output.records).unwrap();
    println!("\naverage sale price, seller persona (rows) vs buyer persona (columns):");
    print!("  {:<12}", "");
    for buyer in &heatmap.buyer_personas {
        print!(" {:>12}", &buyer[..buyer.len().min(12)]);
    }
    println!();
    for (i, seller) in heatmap.seller_personas.iter().enumerate() {
        print!("  {:<12}", &seller[..seller.len().min(12)]);
        for j in 0..heatmap.buyer_personas.len() {
            let text = heatmap.cells[i][j]
                .as_ref()
                .and_then(|cell| cell.avg_sale_price)
                .map(|p| format!("{p:.1}"))
                .unwrap_or_else(|| "-".to_string());
            print!(" {text:>12}");
        }
        println!();
    }
}
