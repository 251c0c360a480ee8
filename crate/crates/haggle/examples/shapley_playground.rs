//! Fit a small boosted-tree model on synthetic negotiation outcomes and
//! walk through exact Shapley attribution: what each feature contributed
//! to one prediction, relative to the average over a background set.
//!
//! ```text
//! cargo run --example shapley_playground
//! ```

use haggle::analysis::{
    fit_gbt, shapley_exact, shapley_permutation, GbtParams, ShapleyExplainer, TrainingSet,
};

fn main() {
    // Synthetic ground truth: price = 50 + opener effect + style effect,
    // plus an interaction when a high opener meets a firm style.
    let openers = ["low", "mid", "high"];
    let styles = ["soft", "firm"];
    let truth = |opener: &str, style: &str| -> f64 {
        let mut price = 50.0;
        price += match opener {
            "low" => -6.0,
            "high" => 6.0,
            _ => 0.0,
        };
        price += match style {
            "firm" => 3.0,
            _ => -3.0,
        };
        if opener == "high" && style == "firm" {
            price += 4.0;
        }
        price
    };

    let mut raw: Vec<(Vec<String>, f64)> = Vec::new();
    for opener in openers {
        for style in styles {
            // Replicate each cell so leaves see several rows.
            for _ in 0..10 {
                raw.push((
                    vec![opener.to_string(), style.to_string()],
                    truth(opener, style),
                ));
            }
        }
    }

    let data = TrainingSet::from_named(&["opener", "style"], &raw).unwrap();
    let params = GbtParams {
        n_trees: 50,
        max_depth: 3,
        learning_rate: 0.3,
        min_samples_leaf: 2,
    };
    let model = fit_gbt(&data, &params).unwrap();
    println!(
        "fitted {} trees | loss {:.3} -> {:.6}",
        model.trees.len(),
        model.train_loss.first().unwrap(),
        model.train_loss.last().unwrap()
    );
    for opener in openers {
        for style in styles {
            let pred = model
                .predict(&[opener.to_string(), style.to_string()])
                .unwrap();
            println!(
                "  ({opener:>4}, {style:>4}) truth {:>5.1}  model {pred:>8.4}",
                truth(opener, style)
            );
        }
    }

    // Attribution is relative to a background distribution; here, every
    // combination once (a uniform reference opponent pool).
    let background: Vec<Vec<u16>> = data.rows.clone();
    let explainer = ShapleyExplainer::new(&model, &background).unwrap();
    println!(
        "\nbackground average price (attribution zero point): {:.4}",
        explainer.base()
    );

    for (opener, style) in [("high", "firm"), ("low", "soft"), ("mid", "firm")] {
        let instance = data
            .encoder
            .encode_row(&[opener.to_string(), style.to_string()])
            .unwrap();
        let attribution = explainer.explain(&instance).unwrap();
        println!("\ninstance (opener={opener}, style={style}):");
        println!("  base                {:>8.4}", attribution.base);
        for (name, value) in ["opener", "style"].iter().zip(&attribution.values) {
            println!("  {name:<18} {value:>+9.4}");
        }
        println!(
            "  sum = prediction    {:>8.4}  (efficiency holds exactly)",
            attribution.prediction()
        );

        // Two independent computations of the same quantity: full coalition
        // enumeration and averaging over every feature ordering.
        let predict = |x: &[u16]| model.predict_encoded(x);
        let by_coalitions = shapley_exact(&predict, &instance, &background).unwrap();
        let by_permutations = shapley_permutation(&predict, &instance, &background).unwrap();
        let gap = by_coalitions
            .values
            .iter()
            .zip(&by_permutations.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!("  coalition vs permutation max gap: {gap:.2e}");
    }
}
