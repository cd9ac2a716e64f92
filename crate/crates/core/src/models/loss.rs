use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Clamp applied to probabilities handed to [`focal_loss`].
pub const FOCAL_EPSILON: f64 = 1e-7;

static FOCAL_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of times [`focal_loss`] has clamped an out-of-range probability
/// in this process.
pub fn focal_clamp_count() -> u64 {
    FOCAL_CLAMPS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LossConfig {
    /// Cross-entropy with per-class weights `[w0, w1]`.
    Weighted { class_weights: [f64; 2] },
    /// `alpha` weights the class-1 term and `1 - alpha` the class-0 term.
    Focal { gamma: f64, alpha: f64 },
}

impl LossConfig {
    /// Focal loss with the default `gamma = 2` and `alpha` equal to the class-0
    /// share of `labels`, which up-weights whichever class is rarer.
    pub fn focal_default(labels: &[u8]) -> Self {
        let ones = labels.iter().filter(|&&y| y == 1).count() as f64;
        LossConfig::Focal {
            gamma: 2.0,
            alpha: 1.0 - ones / labels.len().max(1) as f64,
        }
    }

    pub fn weighted_balanced(labels: &[u8]) -> Self {
        LossConfig::Weighted {
            class_weights: balanced_class_weights(labels),
        }
    }

    /// Class weights implied by the loss, for reporting.
    pub fn class_weights(&self) -> [f64; 2] {
        match *self {
            LossConfig::Weighted { class_weights } => class_weights,
            LossConfig::Focal { alpha, .. } => [1.0 - alpha, alpha],
        }
    }

    /// Loss and its derivative with respect to the logit for one case.
    pub fn on_logit(&self, z: f64, y: u8) -> (f64, f64) {
        match *self {
            LossConfig::Weighted { class_weights } => weighted_cross_entropy_logit(z, y, class_weights),
            LossConfig::Focal { gamma, alpha } => focal_loss_logit(z, y, gamma, alpha),
        }
    }
}

/// Inverse-prevalence weights normalised so the per-case mean weight is 1:
/// `w_c = n / (2 · n_c)`.
pub fn balanced_class_weights(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let ones = labels.iter().filter(|&&y| y == 1).count() as f64;
    let zeros = n - ones;
    if ones == 0.0 || zeros == 0.0 {
        return [1.0, 1.0];
    }
    [n / (2.0 * zeros), n / (2.0 * ones)]
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Focal loss on a probability.
///
/// Class 1: `-alpha · (1-p)^gamma · ln p`; class 0:
/// `-(1-alpha) · p^gamma · ln(1-p)`. Probabilities outside `(0, 1)` are
/// clamped to `[ε, 1-ε]` and counted.
pub fn focal_loss(p: f64, y: u8, gamma: f64, alpha: f64) -> f64 {
    let clamped = p.clamp(FOCAL_EPSILON, 1.0 - FOCAL_EPSILON);
    if clamped != p || p.is_nan() {
        FOCAL_CLAMPS.fetch_add(1, Ordering::Relaxed);
    }
    let p = if p.is_nan() { 0.5 } else { clamped };
    if y == 1 {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Focal loss and its logit derivative, evaluated stably from the logit.
pub fn focal_loss_logit(z: f64, y: u8, gamma: f64, alpha: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if y == 1 {
        let log_p = -softplus(-z);
        let q = 1.0 - p;
        let loss = -alpha * q.powf(gamma) * log_p;
        let grad = alpha * (gamma * p * q.powf(gamma) * log_p - q.powf(gamma + 1.0));
        (loss, grad)
    } else {
        let log_q = -softplus(z);
        let q = 1.0 - p;
        let loss = -(1.0 - alpha) * p.powf(gamma) * log_q;
        let grad = (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * p.powf(gamma) * q * log_q);
        (loss, grad)
    }
}

/// Class-weighted binary cross-entropy and its logit derivative.
pub fn weighted_cross_entropy_logit(z: f64, y: u8, class_weights: [f64; 2]) -> (f64, f64) {
    let p = sigmoid(z);
    if y == 1 {
        let w = class_weights[1];
        (w * softplus(-z), w * (p - 1.0))
    } else {
        let w = class_weights[0];
        (w * softplus(z), w * p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_examples() {
        assert!((focal_loss(0.5, 1, 0.0, 1.0) - 0.5f64.ln().abs()).abs() < 1e-15);
        assert!((focal_loss(0.5, 1, 0.0, 1.0) - 0.6931).abs() < 1e-4);
        let v = focal_loss(0.9, 1, 2.0, 1.0);
        assert!((v - 0.01 * -(0.9f64.ln())).abs() < 1e-15);
        assert!((v - 0.001054).abs() < 1e-6);
        let v = focal_loss(0.5, 0, 0.0, 0.25);
        assert!((v - 0.75 * 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.5199).abs() < 1e-4);
    }

    #[test]
    fn out_of_range_probability_is_clamped_and_counted() {
        let before = focal_clamp_count();
        let v = focal_loss(0.0, 1, 0.0, 1.0);
        assert!((v + FOCAL_EPSILON.ln()).abs() < 1e-12);
        assert!(focal_loss(1.0, 0, 2.0, 0.5).is_finite());
        assert!(focal_clamp_count() >= before + 2);
    }

    #[test]
    fn logit_form_agrees_with_probability_form() {
        for &z in &[-4.0, -0.3, 0.0, 0.7, 3.5] {
            let p = sigmoid(z);
            for y in [0, 1] {
                for &(g, a) in &[(0.0, 0.25), (2.0, 0.19), (1.5, 0.8)] {
                    let (l, _) = focal_loss_logit(z, y, g, a);
                    assert!((l - focal_loss(p, y, g, a)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let h = 1e-6;
        for &z in &[-3.0, -0.5, 0.2, 2.5] {
            for y in [0, 1] {
                let cfgs = [
                    LossConfig::Focal { gamma: 2.0, alpha: 0.2 },
                    LossConfig::Focal { gamma: 0.5, alpha: 0.7 },
                    LossConfig::Weighted { class_weights: [2.6, 0.6] },
                ];
                for cfg in cfgs {
                    let (_, g) = cfg.on_logit(z, y);
                    let num = (cfg.on_logit(z + h, y).0 - cfg.on_logit(z - h, y).0) / (2.0 * h);
                    assert!((g - num).abs() <= 1e-6 * (1.0 + num.abs()), "{cfg:?} z={z} y={y}");
                }
            }
        }
    }

    #[test]
    fn focal_gamma_zero_is_weighted_cross_entropy() {
        for &z in &[-2.0, 0.0, 1.3] {
            for y in [0, 1] {
                let f = focal_loss_logit(z, y, 0.0, 0.3);
                let w = weighted_cross_entropy_logit(z, y, [0.7, 0.3]);
                assert!((f.0 - w.0).abs() < 1e-12 && (f.1 - w.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn balanced_weights_have_unit_mean() {
        let labels: Vec<u8> = (0..105).map(|i| u8::from(i >= 20)).collect();
        let w = balanced_class_weights(&labels);
        let mean: f64 = labels.iter().map(|&y| w[y as usize]).sum::<f64>() / 105.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn focal_default_alpha_is_class_zero_share() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i >= 19)).collect();
        match LossConfig::focal_default(&labels) {
            LossConfig::Focal { gamma, alpha } => {
                assert_eq!(gamma, 2.0);
                assert!((alpha - 0.19).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }
}
