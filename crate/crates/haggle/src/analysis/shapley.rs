//! Exact interventional Shapley attribution.
//!
//! With only four categorical features, nothing needs to be sampled: the
//! value of a coalition S is the model's mean output over the background
//! set with the features in S pinned to the instance, and the attribution
//! enumerates all 2^n coalitions with the closed-form Shapley weights. An
//! independent permutation-average formulation lives alongside as a
//! cross-check oracle.

use std::collections::HashMap;
use std::sync::Mutex;

use super::gbt::BoostedModel;
use super::AnalysisError;

/// Per-feature attributions for one instance. `base` is the mean model
/// output over the background; `base + values.sum()` equals the model's
/// prediction for the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub base: f64,
    pub values: Vec<f64>,
}

impl Attribution {
    pub fn prediction(&self) -> f64 {
        self.base + self.values.iter().sum::<f64>()
    }
}

const MAX_ENUMERATED_FEATURES: usize = 16;

fn check_inputs(instance: &[u16], background: &[Vec<u16>]) -> Result<(), AnalysisError> {
    if background.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    if instance.len() > MAX_ENUMERATED_FEATURES {
        return Err(AnalysisError::InvalidParams(format!(
            "coalition enumeration is exponential; {} features exceeds the cap of {}",
            instance.len(),
            MAX_ENUMERATED_FEATURES
        )));
    }
    if let Some(bad) = background.iter().find(|b| b.len() != instance.len()) {
        return Err(AnalysisError::RowWidth {
            expected: instance.len(),
            got: bad.len(),
        });
    }
    Ok(())
}

/// Mean model output over the background with the features named by `mask`
/// pinned to the instance.
fn coalition_value(
    predict: &dyn Fn(&[u16]) -> f64,
    instance: &[u16],
    background: &[(Vec<u16>, f64)],
    total_weight: f64,
    mask: usize,
) -> f64 {
    let mut composed = vec![0u16; instance.len()];
    let mut acc = 0.0;
    for (row, weight) in background {
        for (i, slot) in composed.iter_mut().enumerate() {
            *slot = if (mask >> i) & 1 == 1 {
                instance[i]
            } else {
                row[i]
            };
        }
        acc += weight * predict(&composed);
    }
    acc / total_weight
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Turns the full table of coalition values into Shapley attributions via
/// the weighted-marginal formula.
fn attribute(values_by_mask: &[f64], n: usize) -> Attribution {
    let fact = factorials(n);
    let mut values = vec![0.0; n];
    for (j, value) in values.iter_mut().enumerate() {
        for mask in 0..values_by_mask.len() {
            if (mask >> j) & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = fact[s] * fact[n - 1 - s] / fact[n];
            *value += weight * (values_by_mask[mask | (1 << j)] - values_by_mask[mask]);
        }
    }
    Attribution {
        base: values_by_mask[0],
        values,
    }
}

/// Exact interventional Shapley values for one instance by full coalition
/// enumeration over the background set.
pub fn shapley_exact(
    predict: &dyn Fn(&[u16]) -> f64,
    instance: &[u16],
    background: &[Vec<u16>],
) -> Result<Attribution, AnalysisError> {
    check_inputs(instance, background)?;
    let n = instance.len();
    let weighted: Vec<(Vec<u16>, f64)> = background.iter().map(|b| (b.clone(), 1.0)).collect();
    let total = background.len() as f64;
    let values_by_mask: Vec<f64> = (0..1usize << n)
        .map(|mask| coalition_value(predict, instance, &weighted, total, mask))
        .collect();
    Ok(attribute(&values_by_mask, n))
}

const MAX_PERMUTED_FEATURES: usize = 8;

/// Shapley values as the average marginal contribution over every feature
/// ordering. Mathematically identical to [`shapley_exact`]; implemented as
/// a separate walk so the two can check each other.
pub fn shapley_permutation(
    predict: &dyn Fn(&[u16]) -> f64,
    instance: &[u16],
    background: &[Vec<u16>],
) -> Result<Attribution, AnalysisError> {
    check_inputs(instance, background)?;
    let n = instance.len();
    if n > MAX_PERMUTED_FEATURES {
        return Err(AnalysisError::InvalidParams(format!(
            "permutation averaging walks n! orders; {n} features exceeds the cap of {MAX_PERMUTED_FEATURES}"
        )));
    }
    let weighted: Vec<(Vec<u16>, f64)> = background.iter().map(|b| (b.clone(), 1.0)).collect();
    let total = background.len() as f64;
    let mut value_cache: HashMap<usize, f64> = HashMap::new();
    let mut value_of = |mask: usize| {
        *value_cache
            .entry(mask)
            .or_insert_with(|| coalition_value(predict, instance, &weighted, total, mask))
    };

    let mut sums = vec![0.0; n];
    let mut permutation: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    // Heap's algorithm, iterative form.
    let mut stack = vec![0usize; n];
    let mut walk = |perm: &[usize], sums: &mut [f64]| {
        let mut mask = 0usize;
        for &j in perm {
            let with = mask | (1 << j);
            sums[j] += value_of(with) - value_of(mask);
            mask = with;
        }
    };
    walk(&permutation, &mut sums);
    count += 1;
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                permutation.swap(0, i);
            } else {
                permutation.swap(stack[i], i);
            }
            walk(&permutation, &mut sums);
            count += 1;
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }

    let base = value_of(0);
    Ok(Attribution {
        base,
        values: sums.iter().map(|s| s / count as f64).collect(),
    })
}

/// Batch explainer for a fitted price model.
///
/// A coalition's value depends on the background rows only through the
/// coordinates the coalition does NOT pin, so the background is collapsed
/// once per coalition into weighted distinct projections. Predictions and
/// whole attributions are memoized on top, which makes explaining a corpus
/// with heavily repeated feature combinations cheap.
pub struct ShapleyExplainer<'m> {
    model: &'m BoostedModel,
    /// Per coalition mask: distinct background projections (pinned slots
    /// zeroed) with their multiplicities.
    projections: Vec<Vec<(Vec<u16>, f64)>>,
    total_weight: f64,
    base: f64,
    predictions: Mutex<HashMap<Vec<u16>, f64>>,
    attributions: Mutex<HashMap<Vec<u16>, Attribution>>,
}

impl<'m> ShapleyExplainer<'m> {
    pub fn new(
        model: &'m BoostedModel,
        background_rows: &[Vec<u16>],
    ) -> Result<ShapleyExplainer<'m>, AnalysisError> {
        if background_rows.is_empty() {
            return Err(AnalysisError::EmptyInput);
        }
        let n = model.n_features();
        if n > MAX_ENUMERATED_FEATURES {
            return Err(AnalysisError::InvalidParams(format!(
                "coalition enumeration is exponential; {n} features exceeds the cap of {MAX_ENUMERATED_FEATURES}"
            )));
        }
        if let Some(bad) = background_rows.iter().find(|b| b.len() != n) {
            return Err(AnalysisError::RowWidth {
                expected: n,
                got: bad.len(),
            });
        }
        let mut projections = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let mut counts: HashMap<Vec<u16>, f64> = HashMap::new();
            for row in background_rows {
                let key: Vec<u16> = row
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| if (mask >> i) & 1 == 1 { 0 } else { v })
                    .collect();
                *counts.entry(key).or_insert(0.0) += 1.0;
            }
            let mut flat: Vec<(Vec<u16>, f64)> = counts.into_iter().collect();
            flat.sort_by(|a, b| a.0.cmp(&b.0));
            projections.push(flat);
        }
        let total_weight = background_rows.len() as f64;
        let base = projections[0]
            .iter()
            .map(|(row, w)| w * model.predict_encoded(row))
            .sum::<f64>()
            / total_weight;
        Ok(ShapleyExplainer {
            model,
            projections,
            total_weight,
            base,
            predictions: Mutex::new(HashMap::new()),
            attributions: Mutex::new(HashMap::new()),
        })
    }

    /// Mean model prediction over the background: the attribution zero point.
    pub fn base(&self) -> f64 {
        self.base
    }

    fn predict_cached(&self, x: &[u16]) -> f64 {
        let mut cache = self.predictions.lock().unwrap();
        if let Some(&p) = cache.get(x) {
            return p;
        }
        let p = self.model.predict_encoded(x);
        cache.insert(x.to_vec(), p);
        p
    }

    pub fn explain(&self, instance: &[u16]) -> Result<Attribution, AnalysisError> {
        let n = self.model.n_features();
        if instance.len() != n {
            return Err(AnalysisError::RowWidth {
                expected: n,
                got: instance.len(),
            });
        }
        if let Some(hit) = self.attributions.lock().unwrap().get(instance) {
            return Ok(hit.clone());
        }
        let mut composed = vec![0u16; n];
        let values_by_mask: Vec<f64> = self
            .projections
            .iter()
            .enumerate()
            .map(|(mask, rows)| {
                let mut acc = 0.0;
                for (key, weight) in rows {
                    for i in 0..n {
                        composed[i] = if (mask >> i) & 1 == 1 {
                            instance[i]
                        } else {
                            key[i]
                        };
                    }
                    acc += weight * self.predict_cached(&composed);
                }
                acc / self.total_weight
            })
            .collect();
        let attribution = attribute(&values_by_mask, n);
        self.attributions
            .lock()
            .unwrap()
            .insert(instance.to_vec(), attribution.clone());
        Ok(attribution)
    }
}
