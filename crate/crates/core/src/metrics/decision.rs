use serde::{Deserialize, Serialize};

use super::{check_probabilities, check_same_len, MetricsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitPoint {
    pub threshold: f64,
    pub model: f64,
    pub treat_all: f64,
    pub treat_none: f64,
}

/// Decision-curve net benefit `TP/n − FP/n · t/(1−t)` for "treat when
/// probability ≥ t", alongside the treat-all and treat-none references.
pub fn net_benefit(labels: &[u8], probabilities: &[f64], thresholds: &[f64]) -> Result<Vec<NetBenefitPoint>> {
    check_same_len(labels.len(), probabilities.len())?;
    check_probabilities(probabilities)?;
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = labels.len() as f64;
    let positives = labels.iter().filter(|&&y| y == 1).count() as f64;
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(MetricsError::InvalidInput(format!("threshold {t} outside (0, 1)")));
            }
            let odds = t / (1.0 - t);
            let (mut tp, mut fp) = (0.0, 0.0);
            for (&y, &p) in labels.iter().zip(probabilities) {
                if p >= t {
                    if y == 1 { tp += 1.0 } else { fp += 1.0 }
                }
            }
            Ok(NetBenefitPoint {
                threshold: t,
                model: tp / n - fp / n * odds,
                treat_all: positives / n - (n - positives) / n * odds,
                treat_none: 0.0,
            })
        })
        .collect()
}
