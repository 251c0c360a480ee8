//! Gradient-boosted regression trees over categorical features, written
//! from scratch for this crate.
//!
//! Squared-error boosting: the model starts at the target mean and each
//! tree fits the current residuals. Splits are "category in left set"
//! partitions found the standard exact way for squared error: sort a
//! feature's categories by mean residual and scan prefix cuts. Fitting
//! sorts rows canonically first, so the model is identical whatever order
//! the caller supplies rows in.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Hyperparameters for [`fit_gbt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: &str| Err(AnalysisError::InvalidParams(msg.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        Ok(())
    }
}

/// Maps string-valued features to small integer codes and back. The
/// dictionary travels with the fitted model so encoded predictions and
/// attributions can always be translated to names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    feature_names: Vec<String>,
    categories: Vec<Vec<String>>,
}

impl Encoder {
    /// Learns one sorted category dictionary per feature column.
    pub fn fit(feature_names: &[&str], rows: &[Vec<String>]) -> Result<Encoder, AnalysisError> {
        let width = feature_names.len();
        let mut seen: Vec<BTreeMap<&str, ()>> = vec![BTreeMap::new(); width];
        for row in rows {
            if row.len() != width {
                return Err(AnalysisError::RowWidth {
                    expected: width,
                    got: row.len(),
                });
            }
            for (col, value) in row.iter().enumerate() {
                seen[col].insert(value, ());
            }
        }
        let categories: Vec<Vec<String>> = seen
            .iter()
            .map(|m| m.keys().map(|s| s.to_string()).collect())
            .collect();
        for (col, cats) in categories.iter().enumerate() {
            if cats.len() > 64 {
                return Err(AnalysisError::TooManyCategories {
                    feature: feature_names[col].to_string(),
                    count: cats.len(),
                });
            }
        }
        Ok(Encoder {
            feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
            categories,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn cardinality(&self, feature: usize) -> usize {
        self.categories[feature].len()
    }

    pub fn categories(&self, feature: usize) -> &[String] {
        &self.categories[feature]
    }

    pub fn code(&self, feature: usize, value: &str) -> Option<u16> {
        self.categories[feature]
            .binary_search_by(|c| c.as_str().cmp(value))
            .ok()
            .map(|i| i as u16)
    }

    pub fn decode(&self, feature: usize, code: u16) -> &str {
        &self.categories[feature][code as usize]
    }

    pub fn encode_row(&self, row: &[String]) -> Result<Vec<u16>, AnalysisError> {
        if row.len() != self.n_features() {
            return Err(AnalysisError::RowWidth {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        row.iter()
            .enumerate()
            .map(|(col, value)| {
                self.code(col, value)
                    .ok_or_else(|| AnalysisError::UnknownCategory {
                        feature: self.feature_names[col].clone(),
                        value: value.clone(),
                    })
            })
            .collect()
    }
}

/// Encoded design matrix plus targets, ready for [`fit_gbt`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub encoder: Encoder,
    pub rows: Vec<Vec<u16>>,
    pub targets: Vec<f64>,
}

impl TrainingSet {
    pub fn from_named(
        feature_names: &[&str],
        raw: &[(Vec<String>, f64)],
    ) -> Result<TrainingSet, AnalysisError> {
        let columns: Vec<Vec<String>> = raw.iter().map(|(row, _)| row.clone()).collect();
        let encoder = Encoder::fit(feature_names, &columns)?;
        let rows = raw
            .iter()
            .map(|(row, _)| encoder.encode_row(row))
            .collect::<Result<Vec<_>, _>>()?;
        let targets = raw.iter().map(|(_, y)| *y).collect();
        Ok(TrainingSet {
            encoder,
            rows,
            targets,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        /// Bitmask over category codes sent to the left child.
        left_set: u64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree; outputs are residual means in currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn output(&self, x: &[u16]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    left_set,
                    left,
                    right,
                } => {
                    at = if (left_set >> x[*feature]) & 1 == 1 {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    fn is_stump(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Additive ensemble: prediction = base + learning_rate x sum of tree outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub encoder: Encoder,
    /// Mean squared training error before any tree, then after each tree.
    pub train_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn predict_encoded(&self, x: &[u16]) -> f64 {
        let boost: f64 = self.trees.iter().map(|t| t.output(x)).sum();
        self.base_score + self.learning_rate * boost
    }

    pub fn predict(&self, row: &[String]) -> Result<f64, AnalysisError> {
        Ok(self.predict_encoded(&self.encoder.encode_row(row)?))
    }

    pub fn n_features(&self) -> usize {
        self.encoder.n_features()
    }
}

struct Grower<'a> {
    rows: &'a [Vec<u16>],
    order: &'a [usize],
    residuals: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<Node>,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    left_set: u64,
}

impl<'a> Grower<'a> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let sum: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        self.nodes.push(Node::Leaf {
            value: sum / idx.len() as f64,
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(&idx);
        }
        let Some(choice) = self.best_split(&idx) else {
            return self.leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| (choice.left_set >> self.rows[self.order[i]][choice.feature]) & 1 == 1);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[at] = Node::Split {
            feature: choice.feature,
            left_set: choice.left_set,
            left,
            right,
        };
        at
    }

    /// Best variance-reducing prefix split across all features, or None if
    /// nothing clears the minimum leaf size with positive gain.
    fn best_split(&self, idx: &[usize]) -> Option<SplitChoice> {
        let parent_sum: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        let parent_score = parent_sum * parent_sum / idx.len() as f64;
        let mut best: Option<SplitChoice> = None;
        for feature in 0..self.rows[0].len() {
            // Per-category residual totals, then categories ordered by mean.
            let mut stats: BTreeMap<u16, (f64, usize)> = BTreeMap::new();
            for &i in idx {
                let code = self.rows[self.order[i]][feature];
                let entry = stats.entry(code).or_insert((0.0, 0));
                entry.0 += self.residuals[i];
                entry.1 += 1;
            }
            if stats.len() < 2 {
                continue;
            }
            let mut cats: Vec<(u16, f64, usize)> = stats
                .into_iter()
                .map(|(code, (sum, n))| (code, sum, n))
                .collect();
            cats.sort_by(|a, b| {
                let mean_a = a.1 / a.2 as f64;
                let mean_b = b.1 / b.2 as f64;
                mean_a.total_cmp(&mean_b).then(a.0.cmp(&b.0))
            });
            let mut left_sum = 0.0;
            let mut left_n = 0usize;
            let mut left_set = 0u64;
            for &(code, sum, n) in &cats[..cats.len() - 1] {
                left_sum += sum;
                left_n += n;
                left_set |= 1u64 << code;
                let right_n = idx.len() - left_n;
                if left_n < self.params.min_samples_leaf || right_n < self.params.min_samples_leaf {
                    continue;
                }
                let right_sum = parent_sum - left_sum;
                let gain = left_sum * left_sum / left_n as f64
                    + right_sum * right_sum / right_n as f64
                    - parent_score;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice {
                        gain,
                        feature,
                        left_set,
                    });
                }
            }
        }
        best
    }
}

/// Fits a boosted ensemble to the training set. All-equal targets are fine
/// and produce a constant model with no trees; fewer than two rows or
/// non-finite targets are rejected.
pub fn fit_gbt(data: &TrainingSet, params: &GbtParams) -> Result<BoostedModel, AnalysisError> {
    params.validate()?;
    let n = data.rows.len();
    if n != data.targets.len() {
        return Err(AnalysisError::InvalidParams(
            "rows and targets differ in length".to_string(),
        ));
    }
    if n < 2 {
        return Err(AnalysisError::DegenerateData(
            "need at least 2 training rows".to_string(),
        ));
    }
    if data.targets.iter().any(|t| !t.is_finite()) {
        return Err(AnalysisError::DegenerateData(
            "targets must be finite".to_string(),
        ));
    }

    // Canonical row order: makes every accumulation independent of the
    // order the caller stored rows in.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        data.rows[a]
            .cmp(&data.rows[b])
            .then(data.targets[a].total_cmp(&data.targets[b]))
    });
    let targets: Vec<f64> = order.iter().map(|&i| data.targets[i]).collect();

    let base_score = targets.iter().sum::<f64>() / n as f64;
    let mut predictions = vec![base_score; n];
    let mut residuals: Vec<f64> = targets.iter().map(|y| y - base_score).collect();
    let mse = |res: &[f64]| res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64;

    let mut trees = Vec::new();
    let mut train_loss = vec![mse(&residuals)];
    for _ in 0..params.n_trees {
        let mut grower = Grower {
            rows: &data.rows,
            order: &order,
            residuals: &residuals,
            params,
            nodes: Vec::new(),
        };
        grower.build((0..n).collect(), 0);
        let tree = Tree {
            nodes: grower.nodes,
        };
        // A stump fits the residual mean, which is already zero: no signal
        // left that this tree shape can express.
        if tree.is_stump() && tree.output(&data.rows[order[0]]).abs() <= 1e-12 {
            break;
        }
        for (slot, &i) in order.iter().enumerate() {
            predictions[slot] += params.learning_rate * tree.output(&data.rows[i]);
            residuals[slot] = targets[slot] - predictions[slot];
        }
        train_loss.push(mse(&residuals));
        trees.push(tree);
    }

    Ok(BoostedModel {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        encoder: data.encoder.clone(),
        train_loss,
    })
}
