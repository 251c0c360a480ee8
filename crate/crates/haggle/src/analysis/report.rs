//! End-to-end attribution over a result corpus, plus the analysis artifact
//! writer (per-grouping tables, heatmap, attribution summary, text report).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{EndReason, Role};
use crate::tournament::RoundRecord;

use super::aggregate::{aggregate, pivot_heatmap, AggregateTable, Grouping, Heatmap};
use super::gbt::{fit_gbt, BoostedModel, GbtParams, TrainingSet};
use super::shapley::ShapleyExplainer;
use super::AnalysisError;

/// Feature columns of the price model, in encoding order.
pub const FEATURE_NAMES: [&str; 4] = [
    "seller_model",
    "buyer_model",
    "seller_persona",
    "buyer_persona",
];
/// Index of the seller-persona feature in [`FEATURE_NAMES`].
pub const SELLER_PERSONA_FEATURE: usize = 2;
/// Index of the buyer-persona feature in [`FEATURE_NAMES`].
pub const BUYER_PERSONA_FEATURE: usize = 3;

/// Extracts (features, final price) rows from the rounds that closed a
/// deal. Only those rounds have the target the price model predicts.
pub fn agreement_feature_rows(records: &[RoundRecord]) -> Vec<(Vec<String>, f64)> {
    records
        .iter()
        .filter(|r| r.end_reason == EndReason::Agreement)
        .filter_map(|r| {
            r.final_price.map(|price| {
                (
                    vec![
                        r.seller_model.clone(),
                        r.buyer_model.clone(),
                        r.seller_persona.clone(),
                        r.buyer_persona.clone(),
                    ],
                    f64::from(price),
                )
            })
        })
        .collect()
}

/// A price model fitted for one role's attribution questions, together with
/// the encoded rows it was trained on (also used as the Shapley background).
pub struct RoleFit {
    pub role: Role,
    pub model: BoostedModel,
    pub rows: Vec<Vec<u16>>,
    /// Raw feature strings aligned with `rows`.
    pub raw: Vec<Vec<String>>,
}

/// Fits the final-price model used to attribute one role's persona effects.
/// Both roles currently see the same four features and the same agreement
/// rounds; keeping the fits separate preserves per-role evaluation and
/// leaves room for the feature sets to diverge.
pub fn fit_role_model(
    records: &[RoundRecord],
    role: Role,
    params: &GbtParams,
) -> Result<RoleFit, AnalysisError> {
    let raw_rows = agreement_feature_rows(records);
    if raw_rows.len() < 2 {
        return Err(AnalysisError::DegenerateData(format!(
            "price model needs at least 2 priced rounds, found {}",
            raw_rows.len()
        )));
    }
    let data = TrainingSet::from_named(&FEATURE_NAMES, &raw_rows)?;
    let model = fit_gbt(&data, params)?;
    Ok(RoleFit {
        role,
        model,
        rows: data.rows,
        raw: raw_rows.into_iter().map(|(row, _)| row).collect(),
    })
}

impl RoleFit {
    fn persona_feature(&self) -> usize {
        match self.role {
            Role::Seller => SELLER_PERSONA_FEATURE,
            Role::Buyer => BUYER_PERSONA_FEATURE,
        }
    }

    fn model_column(&self) -> usize {
        match self.role {
            Role::Seller => 0,
            Role::Buyer => 1,
        }
    }
}

/// Mean Shapley value of one persona in one role.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaMeanRow {
    pub role: Role,
    pub persona: String,
    pub rounds: u32,
    pub mean_shap: f64,
}

/// For each persona the fit's role played, the mean Shapley value of that
/// role's persona feature over the rounds where it held that persona.
/// Personas absent from the data are omitted rather than reported as zero.
pub fn persona_mean_shap(fit: &RoleFit) -> Result<Vec<PersonaMeanRow>, AnalysisError> {
    let explainer = ShapleyExplainer::new(&fit.model, &fit.rows)?;
    let feature = fit.persona_feature();
    let mut sums: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for (encoded, raw) in fit.rows.iter().zip(&fit.raw) {
        let attribution = explainer.explain(encoded)?;
        let entry = sums.entry(raw[feature].as_str()).or_insert((0.0, 0));
        entry.0 += attribution.values[feature];
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(persona, (sum, count))| PersonaMeanRow {
            role: fit.role,
            persona: persona.to_string(),
            rounds: count,
            mean_shap: sum / f64::from(count),
        })
        .collect())
}

/// Per-model persona influence: mean |Shapley| of the persona feature in
/// each role, and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRangeRow {
    pub model: String,
    pub seller_range: f64,
    pub buyer_range: f64,
    pub total_range: f64,
}

/// How the two per-role influence ranges combine into the headline figure.
pub fn combined_range(seller_range: f64, buyer_range: f64) -> f64 {
    seller_range + buyer_range
}

fn role_ranges(fit: &RoleFit) -> Result<BTreeMap<String, f64>, AnalysisError> {
    let explainer = ShapleyExplainer::new(&fit.model, &fit.rows)?;
    let feature = fit.persona_feature();
    let column = fit.model_column();
    let mut sums: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for (encoded, raw) in fit.rows.iter().zip(&fit.raw) {
        let attribution = explainer.explain(encoded)?;
        let entry = sums.entry(raw[column].as_str()).or_insert((0.0, 0));
        entry.0 += attribution.values[feature].abs();
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(model, (sum, count))| (model.to_string(), sum / f64::from(count)))
        .collect())
}

/// Combines per-role ranges model by model. Every model must appear in both
/// seats for its two ranges to be comparable.
pub fn persona_influence_ranges(
    seller_fit: &RoleFit,
    buyer_fit: &RoleFit,
) -> Result<Vec<ModelRangeRow>, AnalysisError> {
    let seller_side = role_ranges(seller_fit)?;
    let buyer_side = role_ranges(buyer_fit)?;
    let mut models: Vec<&String> = seller_side.keys().chain(buyer_side.keys()).collect();
    models.sort();
    models.dedup();
    models
        .into_iter()
        .map(|model| {
            let seller_range =
                *seller_side
                    .get(model)
                    .ok_or_else(|| AnalysisError::ModelMissingRole {
                        model: model.clone(),
                        role: Role::Seller,
                    })?;
            let buyer_range =
                *buyer_side
                    .get(model)
                    .ok_or_else(|| AnalysisError::ModelMissingRole {
                        model: model.clone(),
                        role: Role::Buyer,
                    })?;
            Ok(ModelRangeRow {
                model: model.clone(),
                seller_range,
                buyer_range,
                total_range: combined_range(seller_range, buyer_range),
            })
        })
        .collect()
}

/// The full attribution output for a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub params: GbtParams,
    pub training_rounds: u32,
    /// Mean model prediction over the training background (seller fit).
    pub base_value: f64,
    pub persona_means: Vec<PersonaMeanRow>,
    pub model_ranges: Vec<ModelRangeRow>,
}

/// Fits both role models and assembles persona means and model ranges.
pub fn attribution_report(
    records: &[RoundRecord],
    params: &GbtParams,
) -> Result<AttributionReport, AnalysisError> {
    let seller_fit = fit_role_model(records, Role::Seller, params)?;
    let buyer_fit = fit_role_model(records, Role::Buyer, params)?;
    let base_value = ShapleyExplainer::new(&seller_fit.model, &seller_fit.rows)?.base();
    let mut persona_means = persona_mean_shap(&seller_fit)?;
    persona_means.extend(persona_mean_shap(&buyer_fit)?);
    let model_ranges = persona_influence_ranges(&seller_fit, &buyer_fit)?;
    Ok(AttributionReport {
        params: params.clone(),
        training_rounds: seller_fit.rows.len() as u32,
        base_value,
        persona_means,
        model_ranges,
    })
}

/// Paths of everything [`write_analysis`] produced.
#[derive(Debug, Clone)]
pub struct AnalysisOutputs {
    pub tables: Vec<PathBuf>,
    pub heatmap: PathBuf,
    /// Absent when the corpus had too few priced rounds to fit a model.
    pub attribution: Option<PathBuf>,
    pub report: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_price(v: Option<f64>) -> String {
    v.map(fmt4).unwrap_or_default()
}

fn write_table_csv(path: &Path, table: &AggregateTable) -> Result<(), AnalysisError> {
    let mut out = String::new();
    let mut header: Vec<&str> = table.grouping.key_columns().to_vec();
    header.extend([
        "total",
        "wins",
        "draws",
        "losses",
        "win_rate",
        "draw_rate",
        "share",
        "avg_sale_price",
    ]);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &table.rows {
        let mut fields: Vec<String> = row.key.clone();
        fields.extend([
            row.total.to_string(),
            row.wins.to_string(),
            row.draws.to_string(),
            row.losses.to_string(),
            fmt4(row.win_rate),
            fmt4(row.draw_rate),
            fmt4(row.share),
            fmt_price(row.avg_sale_price),
        ]);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

fn write_heatmap_csv(path: &Path, map: &Heatmap) -> Result<(), AnalysisError> {
    let mut out = String::from(
        "seller_persona,buyer_persona,rounds,seller_wins,seller_win_rate,avg_sale_price\n",
    );
    for (s, seller) in map.seller_personas.iter().enumerate() {
        for (b, buyer) in map.buyer_personas.iter().enumerate() {
            // Unplayed pairings are omitted: absence of data, not a zero.
            if let Some(cell) = &map.cells[s][b] {
                out.push_str(&format!(
                    "{seller},{buyer},{},{},{},{}\n",
                    cell.rounds,
                    cell.seller_wins,
                    fmt4(cell.seller_win_rate),
                    fmt_price(cell.avg_sale_price),
                ));
            }
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

fn write_attribution_csv(path: &Path, report: &AttributionReport) -> Result<(), AnalysisError> {
    let mut out =
        String::from("section,role,name,rounds,mean_shap,seller_range,buyer_range,total_range\n");
    out.push_str(&format!(
        "base,,base_value,{},{},,,\n",
        report.training_rounds,
        fmt4(report.base_value)
    ));
    for row in &report.persona_means {
        out.push_str(&format!(
            "persona_mean,{},{},{},{},,,\n",
            row.role.label(),
            row.persona,
            row.rounds,
            fmt4(row.mean_shap)
        ));
    }
    for row in &report.model_ranges {
        out.push_str(&format!(
            "model_range,,{},,,{},{},{}\n",
            row.model,
            fmt4(row.seller_range),
            fmt4(row.buyer_range),
            fmt4(row.total_range)
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

fn render_table_text(out: &mut String, title: &str, table: &AggregateTable) {
    out.push_str(title);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "  {:<28} total {:>5}  W/D/L {:>4}/{:>4}/{:>4}  win {:>6}  share {:>6}  avg {}\n",
            row.key.join(" x "),
            row.total,
            row.wins,
            row.draws,
            row.losses,
            fmt4(row.win_rate),
            fmt4(row.share),
            row.avg_sale_price
                .map(fmt4)
                .unwrap_or_else(|| "-".to_string()),
        ));
    }
    out.push('\n');
}

/// Runs the whole analysis over a corpus and writes every artifact under
/// `out_dir`: `tables/*.csv`, `heatmap.csv`, `attribution.csv`, and a plain
/// text `report.txt`. Attribution is skipped (with a log warning) when the
/// corpus closed fewer than two deals; the tables still make sense then.
pub fn write_analysis(
    records: &[RoundRecord],
    out_dir: &Path,
    params: &GbtParams,
) -> Result<AnalysisOutputs, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let tables_dir = out_dir.join("tables");
    fs::create_dir_all(&tables_dir).map_err(io_err(&tables_dir))?;

    let mut report_text = String::from("Negotiation corpus analysis\n");
    report_text.push_str(&format!("rounds: {}\n\n", records.len()));

    let mut table_paths = Vec::new();
    for grouping in [
        Grouping::Winner,
        Grouping::ModelRole,
        Grouping::PersonaRole,
        Grouping::PersonaPair,
    ] {
        let table = aggregate(records, grouping)?;
        let path = tables_dir.join(format!("{}.csv", grouping.label()));
        write_table_csv(&path, &table)?;
        render_table_text(&mut report_text, grouping.label(), &table);
        table_paths.push(path);
    }

    let map = pivot_heatmap(records)?;
    let heatmap_path = out_dir.join("heatmap.csv");
    write_heatmap_csv(&heatmap_path, &map)?;

    let attribution_path = match attribution_report(records, params) {
        Ok(report) => {
            let path = out_dir.join("attribution.csv");
            write_attribution_csv(&path, &report)?;
            report_text.push_str(&format!(
                "price model: {} trees, depth {}, learning rate {}, min leaf {}\n",
                report.params.n_trees,
                report.params.max_depth,
                report.params.learning_rate,
                report.params.min_samples_leaf
            ));
            report_text.push_str(&format!(
                "trained on {} priced rounds, base value {}\n\n",
                report.training_rounds,
                fmt4(report.base_value)
            ));
            report_text.push_str("persona mean shapley value by role\n");
            for row in &report.persona_means {
                report_text.push_str(&format!(
                    "  {:<6} {:<12} rounds {:>5}  mean {:>8}\n",
                    row.role.label(),
                    row.persona,
                    row.rounds,
                    fmt4(row.mean_shap)
                ));
            }
            report_text.push_str("\npersona influence range by model\n");
            for row in &report.model_ranges {
                report_text.push_str(&format!(
                    "  {:<20} seller {:>8}  buyer {:>8}  total {:>8}\n",
                    row.model,
                    fmt4(row.seller_range),
                    fmt4(row.buyer_range),
                    fmt4(row.total_range)
                ));
            }
            Some(path)
        }
        Err(AnalysisError::DegenerateData(reason)) => {
            log::warn!("skipping attribution: {reason}");
            report_text.push_str(&format!("attribution skipped: {reason}\n"));
            None
        }
        Err(other) => return Err(other),
    };

    let report_path = out_dir.join("report.txt");
    fs::write(&report_path, report_text).map_err(io_err(&report_path))?;
    Ok(AnalysisOutputs {
        tables: table_paths,
        heatmap: heatmap_path,
        attribution: attribution_path,
        report: report_path,
    })
}
