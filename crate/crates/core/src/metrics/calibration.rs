use serde::{Deserialize, Serialize};

use super::{check_probabilities, check_same_len, MetricsError, Result};

/// Mean squared difference between predicted probability and outcome.
pub fn brier(labels: &[u8], probabilities: &[f64]) -> Result<f64> {
    check_same_len(labels.len(), probabilities.len())?;
    check_probabilities(probabilities)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = labels
        .iter()
        .zip(probabilities)
        .map(|(&y, &p)| (p - y as f64).powi(2))
        .sum();
    Ok(sum / labels.len() as f64)
}

/// One equal-width reliability bin. Rates are `None` for an empty bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub bin_center: f64,
    pub count: usize,
    pub mean_prob: Option<f64>,
    pub empirical_rate: Option<f64>,
}

/// Equal-width bins on [0, 1]; a probability of exactly 1 falls in the last
/// bin. Empty bins are kept.
pub fn reliability_curve(labels: &[u8], probabilities: &[f64], bins: usize) -> Result<Vec<ReliabilityBin>> {
    check_same_len(labels.len(), probabilities.len())?;
    check_probabilities(probabilities)?;
    if bins < 2 {
        return Err(MetricsError::InvalidInput("at least 2 bins are required".into()));
    }
    let mut sums = vec![(0usize, 0.0f64, 0usize); bins];
    for (&y, &p) in labels.iter().zip(probabilities) {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        sums[b].0 += 1;
        sums[b].1 += p;
        sums[b].2 += y as usize;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(b, (count, psum, ysum))| {
            let lower = b as f64 / bins as f64;
            let upper = (b + 1) as f64 / bins as f64;
            ReliabilityBin {
                lower,
                upper,
                bin_center: (lower + upper) / 2.0,
                count,
                mean_prob: (count > 0).then(|| psum / count as f64),
                empirical_rate: (count > 0).then(|| ysum as f64 / count as f64),
            }
        })
        .collect())
}
