//! Grouped outcome tables and the persona-pairing heatmap.
//!
//! Counts are exact integers; rates are exact ratios, rounded only when a
//! table is rendered. Average sale prices are taken over the rounds in a
//! group that actually closed at a price, so rejection and turn-limit draws
//! never dilute them, while deals struck exactly at the baseline do count.

use std::collections::BTreeMap;

use crate::engine::{Role, Winner};
use crate::tournament::RoundRecord;

use super::AnalysisError;

/// How to partition records into table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// One row per outcome class: the overall win/draw distribution.
    Winner,
    /// One row per (role, model): each model's record in each seat.
    ModelRole,
    /// One row per (role, persona): each persona's record in each seat.
    PersonaRole,
    /// One row per (seller persona, buyer persona) pairing, scored from the
    /// seller's side.
    PersonaPair,
}

impl Grouping {
    /// Names of the key columns, in the order they appear in [`AggregateRow::key`].
    pub fn key_columns(self) -> &'static [&'static str] {
        match self {
            Grouping::Winner => &["winner"],
            Grouping::ModelRole => &["role", "model"],
            Grouping::PersonaRole => &["role", "persona"],
            Grouping::PersonaPair => &["seller_persona", "buyer_persona"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Grouping::Winner => "overall",
            Grouping::ModelRole => "model_role",
            Grouping::PersonaRole => "persona_role",
            Grouping::PersonaPair => "persona_pair",
        }
    }
}

/// One table row. `wins`/`draws`/`losses` are counted from the perspective
/// of the row's role (the seller for [`Grouping::Winner`] and
/// [`Grouping::PersonaPair`]).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: Vec<String>,
    pub total: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    /// wins / total, exact.
    pub win_rate: f64,
    /// draws / total, exact.
    pub draw_rate: f64,
    /// total / corpus size: the group's share of all rounds.
    pub share: f64,
    /// Mean final price over the group's priced rounds; absent when the
    /// group closed no deals.
    pub avg_sale_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub grouping: Grouping,
    pub corpus_rounds: u32,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn row(&self, key: &[&str]) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.key == key)
    }
}

#[derive(Default)]
struct Acc {
    total: u32,
    wins: u32,
    draws: u32,
    losses: u32,
    price_sum: u64,
    priced: u32,
}

impl Acc {
    fn add(&mut self, rec: &RoundRecord, perspective: Role) {
        self.total += 1;
        match (rec.winner, perspective) {
            (Winner::Draw, _) => self.draws += 1,
            (Winner::SellerWin, Role::Seller) | (Winner::BuyerWin, Role::Buyer) => self.wins += 1,
            _ => self.losses += 1,
        }
        if let Some(price) = rec.final_price {
            self.price_sum += u64::from(price);
            self.priced += 1;
        }
    }

    fn row(&self, key: Vec<String>, corpus: u32) -> AggregateRow {
        AggregateRow {
            key,
            total: self.total,
            wins: self.wins,
            draws: self.draws,
            losses: self.losses,
            win_rate: f64::from(self.wins) / f64::from(self.total),
            draw_rate: f64::from(self.draws) / f64::from(self.total),
            share: f64::from(self.total) / f64::from(corpus),
            avg_sale_price: (self.priced > 0)
                .then(|| self.price_sum as f64 / f64::from(self.priced)),
        }
    }
}

/// Groups records and tabulates counts, rates, and average sale prices.
/// Rows come out in lexicographic key order.
pub fn aggregate(
    records: &[RoundRecord],
    grouping: Grouping,
) -> Result<AggregateTable, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut groups: BTreeMap<Vec<String>, Acc> = BTreeMap::new();
    let mut slot = |key: Vec<String>, rec: &RoundRecord, perspective: Role| {
        groups.entry(key).or_default().add(rec, perspective);
    };
    for rec in records {
        match grouping {
            Grouping::Winner => slot(vec![rec.winner.label().to_string()], rec, Role::Seller),
            Grouping::ModelRole => {
                slot(
                    vec!["seller".to_string(), rec.seller_model.clone()],
                    rec,
                    Role::Seller,
                );
                slot(
                    vec!["buyer".to_string(), rec.buyer_model.clone()],
                    rec,
                    Role::Buyer,
                );
            }
            Grouping::PersonaRole => {
                slot(
                    vec!["seller".to_string(), rec.seller_persona.clone()],
                    rec,
                    Role::Seller,
                );
                slot(
                    vec!["buyer".to_string(), rec.buyer_persona.clone()],
                    rec,
                    Role::Buyer,
                );
            }
            Grouping::PersonaPair => slot(
                vec![rec.seller_persona.clone(), rec.buyer_persona.clone()],
                rec,
                Role::Seller,
            ),
        }
    }
    let corpus = records.len() as u32;
    let rows = groups
        .into_iter()
        .map(|(key, acc)| acc.row(key, corpus))
        .collect();
    Ok(AggregateTable {
        grouping,
        corpus_rounds: corpus,
        rows,
    })
}

/// One populated heatmap cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapCell {
    pub rounds: u32,
    pub seller_wins: u32,
    pub seller_win_rate: f64,
    pub avg_sale_price: Option<f64>,
}

/// Seller-persona x buyer-persona grid of seller win rates and average
/// prices. Cells nobody played are `None`, which is not the same as a cell
/// with a zero win rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub seller_personas: Vec<String>,
    pub buyer_personas: Vec<String>,
    /// Indexed `[seller][buyer]`, aligned with the axis vectors.
    pub cells: Vec<Vec<Option<HeatmapCell>>>,
}

impl Heatmap {
    pub fn cell(&self, seller_persona: &str, buyer_persona: &str) -> Option<&HeatmapCell> {
        let s = self
            .seller_personas
            .iter()
            .position(|p| p == seller_persona)?;
        let b = self
            .buyer_personas
            .iter()
            .position(|p| p == buyer_persona)?;
        self.cells[s][b].as_ref()
    }
}

/// Builds the pairing heatmap. Both axes carry every persona seen in either
/// seat (sorted), so a pairing and its transpose are always comparable.
pub fn pivot_heatmap(records: &[RoundRecord]) -> Result<Heatmap, AnalysisError> {
    let table = aggregate(records, Grouping::PersonaPair)?;
    let mut personas: Vec<String> = table
        .rows
        .iter()
        .flat_map(|r| r.key.iter().cloned())
        .collect();
    personas.sort();
    personas.dedup();

    let mut cells: Vec<Vec<Option<HeatmapCell>>> = vec![vec![None; personas.len()]; personas.len()];
    for row in &table.rows {
        let s = personas.iter().position(|p| *p == row.key[0]).unwrap();
        let b = personas.iter().position(|p| *p == row.key[1]).unwrap();
        cells[s][b] = Some(HeatmapCell {
            rounds: row.total,
            seller_wins: row.wins,
            seller_win_rate: row.win_rate,
            avg_sale_price: row.avg_sale_price,
        });
    }
    Ok(Heatmap {
        seller_personas: personas.clone(),
        buyer_personas: personas,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EndReason, Price};

    fn record(
        seller_persona: &str,
        buyer_persona: &str,
        price: Option<Price>,
        end_reason: EndReason,
    ) -> RoundRecord {
        let winner = crate::engine::classify_outcome(end_reason, price, 50).unwrap();
        RoundRecord {
            round_id: "r000000".to_string(),
            seller_model: "m1".to_string(),
            buyer_model: "m2".to_string(),
            seller_persona: seller_persona.to_string(),
            buyer_persona: buyer_persona.to_string(),
            end_reason,
            final_price: price,
            winner,
            turns_used: 4,
            win_baseline: 50,
            seed: 7,
            fingerprint: "f".to_string(),
        }
    }

    fn deal(seller_persona: &str, buyer_persona: &str, price: Price) -> RoundRecord {
        record(
            seller_persona,
            buyer_persona,
            Some(price),
            EndReason::Agreement,
        )
    }

    /// The published overall-distribution figures, rebuilt as a synthetic
    /// corpus: 929 buyer wins averaging 41.3509, 712 seller wins averaging
    /// 59.5295, 96 draws at exactly 50.
    fn reference_corpus() -> Vec<RoundRecord> {
        let mut recs = Vec::new();
        for _ in 0..326 {
            recs.push(deal("c", "d", 42));
        }
        for _ in 0..603 {
            recs.push(deal("c", "d", 41));
        }
        for _ in 0..377 {
            recs.push(deal("c", "d", 60));
        }
        for _ in 0..335 {
            recs.push(deal("c", "d", 59));
        }
        for _ in 0..96 {
            recs.push(deal("c", "d", 50));
        }
        recs
    }

    #[test]
    fn overall_distribution_matches_reference_arithmetic() {
        let recs = reference_corpus();
        assert_eq!(recs.len(), 1737);
        let table = aggregate(&recs, Grouping::Winner).unwrap();

        let buyer = table.row(&["buyer"]).unwrap();
        assert_eq!(buyer.total, 929);
        assert_eq!(format!("{:.4}", buyer.share), "0.5348");
        assert_eq!(format!("{:.4}", buyer.avg_sale_price.unwrap()), "41.3509");

        let seller = table.row(&["seller"]).unwrap();
        assert_eq!(seller.total, 712);
        assert_eq!(format!("{:.4}", seller.share), "0.4099");
        assert_eq!(format!("{:.4}", seller.avg_sale_price.unwrap()), "59.5295");

        let draw = table.row(&["draw"]).unwrap();
        assert_eq!(draw.total, 96);
        assert_eq!(format!("{:.4}", draw.share), "0.0553");
        assert_eq!(format!("{:.4}", draw.avg_sale_price.unwrap()), "50.0000");
    }

    #[test]
    fn priceless_draws_do_not_dilute_averages() {
        let recs = vec![
            deal("a", "b", 50),
            record("a", "b", None, EndReason::TurnLimit),
            record("a", "b", None, EndReason::Rejected),
        ];
        let table = aggregate(&recs, Grouping::Winner).unwrap();
        let draw = table.row(&["draw"]).unwrap();
        assert_eq!(draw.total, 3);
        assert_eq!(draw.avg_sale_price, Some(50.0));

        let all_priceless = &recs[1..];
        let table = aggregate(all_priceless, Grouping::Winner).unwrap();
        assert_eq!(table.row(&["draw"]).unwrap().avg_sale_price, None);
    }

    #[test]
    fn partitions_sum_to_corpus_and_rates_are_exact() {
        let recs = reference_corpus();
        for grouping in [Grouping::Winner, Grouping::PersonaPair] {
            let table = aggregate(&recs, grouping).unwrap();
            let sum: u32 = table.rows.iter().map(|r| r.total).sum();
            assert_eq!(sum, table.corpus_rounds);
        }
        // Role-keyed tables count each round once per seat.
        for grouping in [Grouping::ModelRole, Grouping::PersonaRole] {
            let table = aggregate(&recs, grouping).unwrap();
            for role in ["seller", "buyer"] {
                let sum: u32 = table
                    .rows
                    .iter()
                    .filter(|r| r.key[0] == role)
                    .map(|r| r.total)
                    .sum();
                assert_eq!(sum, table.corpus_rounds);
            }
            for row in &table.rows {
                assert_eq!(row.wins + row.draws + row.losses, row.total);
                let back = row.win_rate * f64::from(row.total);
                assert!((back - back.round()).abs() < 1e-9);
                assert_eq!(back.round() as u32, row.wins);
            }
        }
    }

    #[test]
    fn role_tables_score_each_seat_from_its_own_side() {
        // One seller win and one buyer win between the same two models.
        let recs = vec![deal("a", "b", 55), deal("a", "b", 45)];
        let table = aggregate(&recs, Grouping::ModelRole).unwrap();
        let seller_side = table.row(&["seller", "m1"]).unwrap();
        assert_eq!((seller_side.wins, seller_side.losses), (1, 1));
        let buyer_side = table.row(&["buyer", "m2"]).unwrap();
        assert_eq!((buyer_side.wins, buyer_side.losses), (1, 1));
        assert_eq!(seller_side.avg_sale_price, Some(50.0));
    }

    #[test]
    fn singleton_group_has_unit_win_rate() {
        let table = aggregate(&[deal("a", "b", 55)], Grouping::PersonaPair).unwrap();
        let row = table.row(&["a", "b"]).unwrap();
        assert_eq!(row.total, 1);
        assert_eq!(row.win_rate, 1.0);
        assert_eq!(row.share, 1.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            aggregate(&[], Grouping::Winner),
            Err(AnalysisError::EmptyInput)
        ));
        assert!(matches!(pivot_heatmap(&[]), Err(AnalysisError::EmptyInput)));
    }

    #[test]
    fn heatmap_marks_unplayed_cells_absent() {
        let recs = vec![deal("competitive", "altruistic", 58)];
        let map = pivot_heatmap(&recs).unwrap();
        assert_eq!(map.seller_personas, ["altruistic", "competitive"]);
        let populated: usize = map.cells.iter().flatten().filter(|c| c.is_some()).count();
        assert_eq!(populated, 1);
        let cell = map.cell("competitive", "altruistic").unwrap();
        assert_eq!(cell.rounds, 1);
        assert_eq!(cell.seller_win_rate, 1.0);
        assert!(map.cell("altruistic", "competitive").is_none());
    }

    #[test]
    fn heatmap_at_constant_baseline_price_is_all_draws() {
        let recs: Vec<RoundRecord> = ["a", "b"]
            .iter()
            .flat_map(|s| ["a", "b"].iter().map(|b| deal(s, b, 50)))
            .collect();
        let map = pivot_heatmap(&recs).unwrap();
        for row in &map.cells {
            for cell in row.iter().flatten() {
                assert_eq!(cell.seller_win_rate, 0.0);
                assert_eq!(cell.avg_sale_price, Some(50.0));
            }
        }
    }

    #[test]
    fn scripted_corpus_favors_the_aggressive_seller_cell() {
        use crate::tournament::{run_tournament, ScriptedFactory, TournamentPlan};
        let plan = TournamentPlan {
            round_config: crate::engine::RoundConfig::default(),
            models: vec!["scripted".to_string()],
            personas: vec!["competitive".to_string(), "cooperative".to_string()],
            repetitions: 3,
            base_seed: 11,
        };
        let out = run_tournament(&plan, &ScriptedFactory { jitter: true }, 2).unwrap();
        let map = pivot_heatmap(&out.records).unwrap();
        let hard_seller = map.cell("competitive", "cooperative").unwrap();
        let soft_seller = map.cell("cooperative", "competitive").unwrap();
        assert!(
            hard_seller.avg_sale_price.unwrap() > soft_seller.avg_sale_price.unwrap(),
            "aggressive seller should close higher: {hard_seller:?} vs {soft_seller:?}"
        );
    }
}
