use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{balanced_accuracy, MetricsError, Result};
use crate::cohort::EncodedSet;
use crate::models::TrainedModel;

/// Anything that turns encoded rows into hard labels.
pub trait Classifier {
    fn predict_labels(&self, set: &EncodedSet) -> Result<Vec<u8>>;
}

impl Classifier for TrainedModel {
    fn predict_labels(&self, set: &EncodedSet) -> Result<Vec<u8>> {
        let probs = self
            .predict_set(set)
            .map_err(|e| MetricsError::InvalidInput(e.to_string()))?;
        Ok(probs.iter().map(|&p| u8::from(p >= self.decision_threshold)).collect())
    }
}

impl<F> Classifier for F
where
    F: Fn(&[f64]) -> u8,
{
    fn predict_labels(&self, set: &EncodedSet) -> Result<Vec<u8>> {
        Ok(set.rows.iter().map(|r| self(r)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub feature: String,
    pub feature_index: usize,
    pub baseline_balanced_accuracy: f64,
    /// Mean of `baseline − permuted` balanced accuracy.
    pub mean_delta_balanced_accuracy: f64,
    /// Sample standard deviation across repeats (0 for a single repeat).
    pub sd: f64,
    pub deltas: Vec<f64>,
    /// The column was constant, so permuting it cannot change anything.
    pub constant: bool,
}

fn repeat_rng(seed: u64, feature_index: usize, repeat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (feature_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(repeat as u64);
    rng
}

fn importance_with_baseline<C: Classifier + ?Sized>(
    model: &C,
    set: &EncodedSet,
    feature_index: usize,
    repeats: usize,
    seed: u64,
    baseline: f64,
) -> Result<PermutationImportance> {
    if feature_index >= set.n_features() {
        return Err(MetricsError::InvalidInput(format!(
            "feature index {feature_index} out of range for {} features",
            set.n_features()
        )));
    }
    let feature = set.feature_names[feature_index].clone();
    let column: Vec<f64> = set.rows.iter().map(|r| r[feature_index]).collect();
    if column.iter().all(|&v| v == column[0]) {
        return Ok(PermutationImportance {
            feature,
            feature_index,
            baseline_balanced_accuracy: baseline,
            mean_delta_balanced_accuracy: 0.0,
            sd: 0.0,
            deltas: vec![0.0; repeats],
            constant: true,
        });
    }
    let mut deltas = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut shuffled = column.clone();
        shuffled.shuffle(&mut repeat_rng(seed, feature_index, r));
        let mut permuted = set.clone();
        for (row, &v) in permuted.rows.iter_mut().zip(&shuffled) {
            row[feature_index] = v;
        }
        let hard = model.predict_labels(&permuted)?;
        deltas.push(baseline - balanced_accuracy(&set.labels, &hard)?);
    }
    let mean = deltas.iter().sum::<f64>() / repeats as f64;
    let sd = if repeats > 1 {
        (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(PermutationImportance {
        feature,
        feature_index,
        baseline_balanced_accuracy: baseline,
        mean_delta_balanced_accuracy: mean,
        sd,
        deltas,
        constant: false,
    })
}

fn baseline<C: Classifier + ?Sized>(model: &C, set: &EncodedSet, repeats: usize) -> Result<f64> {
    if repeats == 0 {
        return Err(MetricsError::InvalidInput("at least one repeat is required".into()));
    }
    if set.is_empty() {
        return Err(MetricsError::Empty);
    }
    balanced_accuracy(&set.labels, &model.predict_labels(set)?)
}

/// Drop in balanced accuracy when one feature column is shuffled.
pub fn permutation_importance<C: Classifier + ?Sized>(
    model: &C,
    set: &EncodedSet,
    feature_index: usize,
    repeats: usize,
    seed: u64,
) -> Result<PermutationImportance> {
    let base = baseline(model, set, repeats)?;
    importance_with_baseline(model, set, feature_index, repeats, seed, base)
}

/// Importance of every feature, sorted by decreasing mean delta.
pub fn permutation_importance_all<C: Classifier + ?Sized>(
    model: &C,
    set: &EncodedSet,
    repeats: usize,
    seed: u64,
) -> Result<Vec<PermutationImportance>> {
    let base = baseline(model, set, repeats)?;
    let mut all = (0..set.n_features())
        .map(|j| importance_with_baseline(model, set, j, repeats, seed, base))
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| {
        b.mean_delta_balanced_accuracy
            .total_cmp(&a.mean_delta_balanced_accuracy)
            .then(a.feature_index.cmp(&b.feature_index))
    });
    Ok(all)
}
