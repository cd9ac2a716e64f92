use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::loss::{sigmoid, softplus};
use super::{check_training_set, LossConfig, ModelKind, Result, TrainedModel, TrainingMetadata};
use crate::cohort::{CohortSchema, EncodedSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub class_weights: [f64; 2],
    /// Ridge penalty on the weights (not the intercept).
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            class_weights: [1.0, 1.0],
            l2: 1e-4,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

pub(crate) fn logit(params: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    params[..d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + params[d]
}

/// Weighted mean cross-entropy plus `l2/2 · ||w||²`, and its gradient.
///
/// The data term is normalised by the total case weight, so duplicating every
/// row leaves the objective unchanged.
pub fn logistic_objective(
    params: &[f64],
    set: &EncodedSet,
    class_weights: [f64; 2],
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = set.n_features();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    let mut total_weight = 0.0;
    for (row, &y) in set.rows.iter().zip(&set.labels) {
        let w = class_weights[y as usize];
        let z = logit(params, row);
        let p = sigmoid(z);
        loss += w * if y == 1 { softplus(-z) } else { softplus(z) };
        let r = w * (p - y as f64);
        for (g, x) in grad[..d].iter_mut().zip(row) {
            *g += r * x;
        }
        grad[d] += r;
        total_weight += w;
    }
    loss /= total_weight;
    for g in &mut grad {
        *g /= total_weight;
    }
    for j in 0..d {
        loss += 0.5 * l2 * params[j] * params[j];
        grad[j] += l2 * params[j];
    }
    (loss, grad)
}

fn hessian(params: &[f64], set: &EncodedSet, class_weights: [f64; 2], l2: f64) -> Vec<f64> {
    let d = set.n_features();
    let m = d + 1;
    let mut h = vec![0.0; m * m];
    let mut total_weight = 0.0;
    let mut xa = vec![1.0; m];
    for (row, &y) in set.rows.iter().zip(&set.labels) {
        let w = class_weights[y as usize];
        let p = sigmoid(logit(params, row));
        let s = w * p * (1.0 - p);
        xa[..d].copy_from_slice(row);
        for i in 0..m {
            for j in 0..=i {
                h[i * m + j] += s * xa[i] * xa[j];
            }
        }
        total_weight += w;
    }
    for i in 0..m {
        for j in 0..=i {
            let v = h[i * m + j] / total_weight;
            h[i * m + j] = v;
            h[j * m + i] = v;
        }
    }
    for j in 0..d {
        h[j * m + j] += l2;
    }
    // Keeps the intercept direction solvable when every p saturates.
    h[d * m + d] += 1e-12;
    h
}

/// Fits L2-regularised, class-weighted logistic regression by Newton's method
/// with backtracking. Stops when the gradient norm drops below the tolerance
/// or the iteration budget runs out. The seed is recorded only; the fit is
/// deterministic.
pub fn train_logreg(
    train: &EncodedSet,
    config: &LogRegConfig,
    seed: u64,
    schema: &CohortSchema,
) -> Result<TrainedModel> {
    check_training_set(train, &schema.blocklist)?;
    let d = train.n_features();
    let weights = config.class_weights;
    let mut params = vec![0.0; d + 1];
    let (mut loss, mut grad) = logistic_objective(&params, train, weights, config.l2);
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < config.tolerance {
            break;
        }
        iterations += 1;
        let h = hessian(&params, train, weights, config.l2);
        let step = cholesky_solve(&h, &grad).unwrap_or_else(|| grad.clone());
        let mut t = 1.0;
        loop {
            let candidate: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p - t * s).collect();
            let (c_loss, c_grad) = logistic_objective(&candidate, train, weights, config.l2);
            if c_loss <= loss || t < 1e-10 {
                params = candidate;
                loss = c_loss;
                grad = c_grad;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(TrainedModel {
        kind: ModelKind::LogReg,
        shapes: vec![d],
        parameters: params,
        feature_names: train.feature_names.clone(),
        training_seed: seed,
        loss_config: LossConfig::Weighted {
            class_weights: weights,
        },
        class_weights: weights,
        decision_threshold: 0.5,
        schema_checksum: Some(schema.checksum().to_string()),
        metadata: TrainingMetadata {
            iterations,
            final_train_loss: loss,
            final_validation_loss: None,
            calibrator: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_support::set;
    use crate::models::ModelError;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> EncodedSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { 2.0 } else { -2.0 };
            rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            labels.push(y);
        }
        set(rows, labels)
    }

    #[test]
    fn separable_blobs() {
        let data = blobs(200, 1);
        // Oracle: the Bayes plane x0 + x1 = 0 for equal-covariance blobs at ±(2,2).
        let oracle_acc = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &y)| u8::from(r[0] + r[1] > 0.0) == y)
            .count() as f64
            / 200.0;
        assert!(oracle_acc >= 0.99);
        let m = train_logreg(&data, &LogRegConfig::default(), 0, &CohortSchema::canonical()).unwrap();
        let acc = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &y)| m.predict_label(r).unwrap() == y)
            .count() as f64
            / 200.0;
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn zero_features_give_the_prior() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 5 != 0)).collect();
        let data = set(vec![vec![0.0, 0.0, 0.0]; 50], labels);
        let m = train_logreg(&data, &LogRegConfig::default(), 0, &CohortSchema::canonical()).unwrap();
        let p = m.predict_row(&[0.0, 0.0, 0.0]).unwrap();
        assert!((p - 0.8).abs() < 1e-9, "{p}");
    }

    #[test]
    fn duplicated_rows_leave_decisions_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] - 0.5 * r[1] + rng.gen_range(-0.5..0.5) > 0.0)).collect();
        let once = set(rows.clone(), labels.clone());
        let twice = set(
            rows.iter().chain(&rows).cloned().collect(),
            labels.iter().chain(&labels).copied().collect(),
        );
        let schema = CohortSchema::canonical();
        let a = train_logreg(&once, &LogRegConfig::default(), 0, &schema).unwrap();
        let b = train_logreg(&twice, &LogRegConfig::default(), 0, &schema).unwrap();
        for r in &rows {
            assert_eq!(a.predict_label(r).unwrap(), b.predict_label(r).unwrap());
            assert!((a.predict_row(r).unwrap() - b.predict_row(r).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let data = set(vec![vec![1.0]; 4], vec![1; 4]);
        assert!(matches!(
            train_logreg(&data, &LogRegConfig::default(), 0, &CohortSchema::canonical()),
            Err(ModelError::SingleClass(1))
        ));
    }

    #[test]
    fn blocklisted_feature_is_rejected() {
        let mut data = blobs(20, 0);
        data.feature_names[1] = "SNOT22_6MO_TOTAL".into();
        assert!(matches!(
            train_logreg(&data, &LogRegConfig::default(), 0, &CohortSchema::canonical()),
            Err(ModelError::Leakage(_))
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let d = 1 + trial % 5;
            let n = 12;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let data = set(rows, labels);
            let params: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let weights = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
            let (_, grad) = logistic_objective(&params, &data, weights, 0.1);
            let h = 1e-5;
            for j in 0..=d {
                let mut up = params.clone();
                let mut down = params.clone();
                up[j] += h;
                down[j] -= h;
                let num = (logistic_objective(&up, &data, weights, 0.1).0
                    - logistic_objective(&down, &data, weights, 0.1).0)
                    / (2.0 * h);
                let rel = (grad[j] - num).abs() / grad[j].abs().max(num.abs()).max(1e-8);
                assert!(rel <= 1e-4, "trial {trial} j {j}: {} vs {num}", grad[j]);
            }
        }
    }
}
