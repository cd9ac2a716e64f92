use super::{check_training_set, LossConfig, ModelKind, Result, TrainedModel, TrainingMetadata};
use crate::cohort::{CohortSchema, EncodedSet};

/// Gaussian naive Bayes.
///
/// Per-class means and population variances, with `var_smoothing` times the
/// largest feature variance added to every variance. When every feature is
/// constant the floor is `var_smoothing` itself, so no variance is ever zero.
pub fn train_gnb(train: &EncodedSet, var_smoothing: f64, schema: &CohortSchema) -> Result<TrainedModel> {
    check_training_set(train, &schema.blocklist)?;
    if !(var_smoothing > 0.0 && var_smoothing.is_finite()) {
        return Err(super::ModelError::Config("var_smoothing must be positive".into()));
    }
    let d = train.n_features();
    let n = train.len() as f64;

    let mut max_var: f64 = 0.0;
    for j in 0..d {
        let mean = train.rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = train.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        max_var = max_var.max(var);
    }
    let epsilon = if max_var > 0.0 { var_smoothing * max_var } else { var_smoothing };

    let mut params = Vec::with_capacity(2 + 4 * d);
    let mut stats = Vec::new();
    for class in 0..2u8 {
        let members: Vec<&Vec<f64>> = train
            .rows
            .iter()
            .zip(&train.labels)
            .filter(|(_, &y)| y == class)
            .map(|(r, _)| r)
            .collect();
        let m = members.len() as f64;
        let means: Vec<f64> = (0..d).map(|j| members.iter().map(|r| r[j]).sum::<f64>() / m).collect();
        let vars: Vec<f64> = (0..d)
            .map(|j| members.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / m + epsilon)
            .collect();
        params.push(m / n);
        stats.push((means, vars));
    }
    for (means, vars) in stats {
        params.extend(means);
        params.extend(vars);
    }
    Ok(TrainedModel {
        kind: ModelKind::GaussianNB,
        shapes: vec![d],
        parameters: params,
        feature_names: train.feature_names.clone(),
        training_seed: 0,
        loss_config: LossConfig::Weighted { class_weights: [1.0, 1.0] },
        class_weights: [1.0, 1.0],
        decision_threshold: 0.5,
        schema_checksum: Some(schema.checksum().to_string()),
        metadata: TrainingMetadata::default(),
    })
}

fn log_joint(params: &[f64], class: usize, row: &[f64]) -> f64 {
    let d = row.len();
    let offset = 2 + class * 2 * d;
    let means = &params[offset..offset + d];
    let vars = &params[offset + d..offset + 2 * d];
    let mut lp = params[class].ln();
    for ((x, mu), var) in row.iter().zip(means).zip(vars) {
        lp -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + (x - mu).powi(2) / (2.0 * var);
    }
    lp
}

pub(crate) fn proba(params: &[f64], row: &[f64]) -> f64 {
    let l0 = log_joint(params, 0, row);
    let l1 = log_joint(params, 1, row);
    super::loss::sigmoid(l1 - l0)
}
