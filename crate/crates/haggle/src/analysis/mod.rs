//! Post-hoc analysis of tournament results: aggregate win/draw tables, a
//! persona-pairing heatmap, a from-scratch gradient-boosted price model, and
//! exact Shapley attribution of price swings to the four match features
//! (seller model, buyer model, seller persona, buyer persona).
//!
//! Everything here is a pure function of the round records; outputs are
//! deterministic and carry no timestamps.

mod aggregate;
mod gbt;
mod report;
mod shapley;

pub use aggregate::{
    aggregate, pivot_heatmap, AggregateRow, AggregateTable, Grouping, Heatmap, HeatmapCell,
};
pub use gbt::{fit_gbt, BoostedModel, Encoder, GbtParams, TrainingSet, Tree};
pub use report::{
    agreement_feature_rows, attribution_report, combined_range, fit_role_model,
    persona_influence_ranges, persona_mean_shap, write_analysis, AnalysisOutputs,
    AttributionReport, ModelRangeRow, PersonaMeanRow, RoleFit, BUYER_PERSONA_FEATURE,
    FEATURE_NAMES, SELLER_PERSONA_FEATURE,
};
pub use shapley::{shapley_exact, shapley_permutation, Attribution, ShapleyExplainer};

use crate::engine::Role;
use std::path::PathBuf;
use thiserror::Error;

/// Errors from aggregation, model fitting, or attribution.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no records to analyze")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("model {model:?} never appears in the {role} role")]
    ModelMissingRole { model: String, role: Role },
    #[error("feature {feature:?} has {count} categories; at most 64 are supported")]
    TooManyCategories { feature: String, count: usize },
    #[error("value {value:?} was not seen when encoding feature {feature:?}")]
    UnknownCategory { feature: String, value: String },
    #[error("feature row has {got} values, expected {expected}")]
    RowWidth { expected: usize, got: usize },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
