use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::loss::{sigmoid, softplus};

/// Post-hoc logistic recalibration `p = sigmoid(a · logit + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaling {
    pub a: f64,
    pub b: f64,
}

impl PlattScaling {
    pub fn apply(&self, logit: f64) -> f64 {
        sigmoid(self.a * logit + self.b)
    }

    /// Maximum-likelihood fit by damped Newton iterations. A tiny ridge keeps
    /// the system solvable when the logits separate the labels.
    pub fn fit(logits: &[f64], labels: &[u8]) -> Self {
        const RIDGE: f64 = 1e-6;
        let n = logits.len().max(1) as f64;
        let objective = |a: f64, b: f64| {
            logits
                .iter()
                .zip(labels)
                .map(|(&z, &y)| {
                    let s = a * z + b;
                    if y == 1 { softplus(-s) } else { softplus(s) }
                })
                .sum::<f64>()
                / n
                + 0.5 * RIDGE * (a * a + b * b)
        };
        let (mut a, mut b) = (1.0, 0.0);
        for _ in 0..100 {
            let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&z, &y) in logits.iter().zip(labels) {
                let p = sigmoid(a * z + b);
                let r = p - y as f64;
                let w = p * (1.0 - p);
                ga += r * z;
                gb += r;
                haa += w * z * z;
                hab += w * z;
                hbb += w;
            }
            let grad = [ga / n + RIDGE * a, gb / n + RIDGE * b];
            if grad[0].hypot(grad[1]) < 1e-10 {
                break;
            }
            let hess = [haa / n + RIDGE, hab / n, hab / n, hbb / n + RIDGE];
            let Some(step) = cholesky_solve(&hess, &grad) else { break };
            let current = objective(a, b);
            let mut t = 1.0;
            while t > 1e-8 && objective(a - t * step[0], b - t * step[1]) > current {
                t *= 0.5;
            }
            a -= t * step[0];
            b -= t * step[1];
        }
        PlattScaling { a, b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_known_map() {
        // Labels drawn deterministically at the exact probabilities of a known map.
        let mut logits = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let z = -3.0 + 6.0 * (i as f64 + 0.5) / 200.0;
            let p = sigmoid(2.0 * z - 0.5);
            for k in 0..200 {
                logits.push(z);
                labels.push(u8::from((k as f64 + 0.5) / 200.0 < p));
            }
        }
        let fit = PlattScaling::fit(&logits, &labels);
        assert!((fit.a - 2.0).abs() < 0.1, "{fit:?}");
        assert!((fit.b + 0.5).abs() < 0.1, "{fit:?}");
    }
}
