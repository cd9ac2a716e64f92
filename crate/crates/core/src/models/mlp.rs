use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::calibrate::PlattScaling;
use super::{check_training_set, LossConfig, ModelError, ModelKind, Result, TrainedModel, TrainingMetadata};
use crate::cohort::{CohortSchema, EncodedSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
}

/// One hidden layer feeding a single sigmoid logit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize) -> Self {
        MlpArchitecture {
            input_dim,
            hidden_units: 400,
            activation: Activation::Relu,
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.hidden_units * self.input_dim + 2 * self.hidden_units + 1
    }
}

/// Mini-batch SGD with momentum and early stopping on a validation carve-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Share of the training set held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub patience: usize,
    /// Fit a logistic recalibration map on the validation logits.
    pub recalibrate: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 200,
            validation_fraction: 0.1,
            patience: 20,
            recalibrate: false,
        }
    }
}

struct View<'a> {
    params: &'a [f64],
    d: usize,
    h: usize,
}

impl<'a> View<'a> {
    fn new(params: &'a [f64], d: usize, h: usize) -> Self {
        View { params, d, h }
    }
    fn w1(&self, unit: usize) -> &[f64] {
        &self.params[unit * self.d..(unit + 1) * self.d]
    }
    fn b1(&self, unit: usize) -> f64 {
        self.params[self.h * self.d + unit]
    }
    fn w2(&self, unit: usize) -> f64 {
        self.params[self.h * self.d + self.h + unit]
    }
    fn b2(&self) -> f64 {
        self.params[self.h * self.d + 2 * self.h]
    }
}

fn hidden_pre(view: &View, row: &[f64], unit: usize) -> f64 {
    view.w1(unit).iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + view.b1(unit)
}

pub(crate) fn logit(params: &[f64], hidden: usize, row: &[f64]) -> f64 {
    let view = View::new(params, row.len(), hidden);
    let mut z = view.b2();
    for unit in 0..hidden {
        let a = hidden_pre(&view, row, unit);
        if a > 0.0 {
            z += view.w2(unit) * a;
        }
    }
    z
}

/// Adds the gradient of one case's loss into `grad` and returns the loss.
fn accumulate(
    params: &[f64],
    arch: &MlpArchitecture,
    row: &[f64],
    y: u8,
    loss: &LossConfig,
    grad: &mut [f64],
    pre: &mut [f64],
) -> f64 {
    let (d, h) = (arch.input_dim, arch.hidden_units);
    let view = View::new(params, d, h);
    let mut z = view.b2();
    for unit in 0..h {
        pre[unit] = hidden_pre(&view, row, unit);
        if pre[unit] > 0.0 {
            z += view.w2(unit) * pre[unit];
        }
    }
    let (l, dz) = loss.on_logit(z, y);
    let (w1_grad, rest) = grad.split_at_mut(h * d);
    let (b1_grad, rest) = rest.split_at_mut(h);
    let (w2_grad, b2_grad) = rest.split_at_mut(h);
    b2_grad[0] += dz;
    for unit in 0..h {
        if pre[unit] > 0.0 {
            w2_grad[unit] += dz * pre[unit];
            let dh = dz * view.w2(unit);
            b1_grad[unit] += dh;
            for (g, x) in w1_grad[unit * d..(unit + 1) * d].iter_mut().zip(row) {
                *g += dh * x;
            }
        }
    }
    l
}

/// Mean per-case loss over `set` and its gradient with respect to the flat
/// parameter vector.
pub fn mlp_objective(
    params: &[f64],
    arch: &MlpArchitecture,
    set: &EncodedSet,
    loss: &LossConfig,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut pre = vec![0.0; arch.hidden_units];
    let mut total = 0.0;
    for (row, &y) in set.rows.iter().zip(&set.labels) {
        total += accumulate(params, arch, row, y, loss, &mut grad, &mut pre);
    }
    let n = set.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (total / n, grad)
}

fn mean_loss(params: &[f64], arch: &MlpArchitecture, set: &EncodedSet, loss: &LossConfig) -> f64 {
    let total: f64 = set
        .rows
        .iter()
        .zip(&set.labels)
        .map(|(row, &y)| loss.on_logit(logit(params, arch.hidden_units, row), y).0)
        .sum();
    total / set.len().max(1) as f64
}

/// Stratified hold-out positions for early stopping, drawn from `rng`.
fn carve_validation(labels: &[u8], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        let take = ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        valid.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid)
}

/// Trains the single-hidden-layer network.
///
/// He-normal initialisation, ReLU hidden units, one sigmoid output. The
/// validation carve-out is stratified and taken from `train` only; the
/// parameters with the lowest validation loss are kept. Bit-identical for a
/// fixed seed and configuration.
pub fn train_mlp(
    train: &EncodedSet,
    arch: &MlpArchitecture,
    loss: LossConfig,
    optimizer: &OptimizerConfig,
    seed: u64,
    schema: &CohortSchema,
) -> Result<TrainedModel> {
    check_training_set(train, &schema.blocklist)?;
    if arch.input_dim != train.n_features() {
        return Err(ModelError::DimensionMismatch {
            expected: arch.input_dim,
            found: train.n_features(),
        });
    }
    if arch.hidden_units == 0 || optimizer.batch_size == 0 {
        return Err(ModelError::Config("hidden_units and batch_size must be positive".into()));
    }
    if !(0.0..1.0).contains(&optimizer.validation_fraction) {
        return Err(ModelError::Config("validation_fraction must lie in [0, 1)".into()));
    }
    let (d, h) = (arch.input_dim, arch.hidden_units);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (fit_pos, valid_pos) = if optimizer.validation_fraction > 0.0 {
        carve_validation(&train.labels, optimizer.validation_fraction, &mut rng)
    } else {
        ((0..train.len()).collect(), Vec::new())
    };
    let fit = train.select(&fit_pos);
    let valid = train.select(&valid_pos);

    let mut params = vec![0.0; arch.n_parameters()];
    let w1 = Normal::new(0.0, (2.0 / d.max(1) as f64).sqrt()).expect("finite sd");
    let w2 = Normal::new(0.0, (1.0 / h as f64).sqrt()).expect("finite sd");
    for p in &mut params[..h * d] {
        *p = w1.sample(&mut rng);
    }
    for p in &mut params[h * d + h..h * d + 2 * h] {
        *p = w2.sample(&mut rng);
    }

    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut pre = vec![0.0; h];
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut since_best = 0;
    let mut epochs = 0;
    for epoch in 1..=optimizer.max_epochs {
        epochs = epoch;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(optimizer.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                epoch_loss += accumulate(&params, arch, &fit.rows[i], fit.labels[i], &loss, &mut grad, &mut pre);
            }
            let scale = optimizer.learning_rate / batch.len() as f64;
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = optimizer.momentum * *v - scale * g;
                *p += *v;
            }
        }
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Diverged { epoch });
        }
        if valid.is_empty() {
            best = (epoch_loss / fit.len() as f64, params.clone(), epoch);
            continue;
        }
        let v_loss = mean_loss(&params, arch, &valid, &loss);
        if !v_loss.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        if v_loss < best.0 {
            best = (v_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= optimizer.patience {
                break;
            }
        }
    }
    let (best_valid, params, _) = best;
    let final_train_loss = mean_loss(&params, arch, &fit, &loss);
    let calibrator = if optimizer.recalibrate && !valid.is_empty() {
        let logits: Vec<f64> = valid.rows.iter().map(|r| logit(&params, h, r)).collect();
        Some(PlattScaling::fit(&logits, &valid.labels))
    } else {
        None
    };
    Ok(TrainedModel {
        kind: ModelKind::Mlp,
        shapes: vec![d, h],
        parameters: params,
        feature_names: train.feature_names.clone(),
        training_seed: seed,
        loss_config: loss,
        class_weights: loss.class_weights(),
        decision_threshold: 0.5,
        schema_checksum: Some(schema.checksum().to_string()),
        metadata: TrainingMetadata {
            iterations: epochs,
            final_train_loss,
            final_validation_loss: (!valid.is_empty()).then_some(best_valid),
            calibrator,
        },
    })
}
