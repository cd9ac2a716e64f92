//! From-scratch binary classifiers: logistic regression, Gaussian naive Bayes
//! and a single-hidden-layer MLP, all producing probabilities of class 1.

mod calibrate;
mod gnb;
mod linalg;
mod logreg;
mod loss;
mod mlp;

pub use calibrate::PlattScaling;
pub use gnb::train_gnb;
pub use logreg::{logistic_objective, train_logreg, LogRegConfig};
pub use loss::{
    balanced_class_weights, focal_clamp_count, focal_loss, focal_loss_logit, weighted_cross_entropy_logit,
    LossConfig, FOCAL_EPSILON,
};
pub use mlp::{mlp_objective, train_mlp, Activation, MlpArchitecture, OptimizerConfig};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{leakage_guard, EncodedSet, FeatureVector, LeakageViolation};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set must contain both classes (found only class {0})")]
    SingleClass(u8),
    #[error("training set is empty")]
    Empty,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature names do not match the model's schema")]
    FeatureMismatch,
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Leakage(#[from] LeakageViolation),
    #[error("model was saved against schema {saved} but {current} is loaded")]
    SchemaMismatch { saved: String, current: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    LogReg,
    GaussianNB,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMetadata {
    pub iterations: usize,
    pub final_train_loss: f64,
    pub final_validation_loss: Option<f64>,
    pub calibrator: Option<PlattScaling>,
}

/// A fitted model as a flat parameter vector plus the shape metadata needed to
/// interpret it.
///
/// Layouts, with `d` inputs and `h` hidden units:
/// - `LogReg`, shapes `[d]`: `w[0..d], bias`
/// - `GaussianNB`, shapes `[d]`: `prior0, prior1, mean0[d], var0[d], mean1[d], var1[d]`
/// - `Mlp`, shapes `[d, h]`: `W1[h×d] (row-major), b1[h], w2[h], b2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub shapes: Vec<usize>,
    pub parameters: Vec<f64>,
    pub feature_names: Vec<String>,
    pub training_seed: u64,
    pub loss_config: LossConfig,
    pub class_weights: [f64; 2],
    pub decision_threshold: f64,
    pub schema_checksum: Option<String>,
    pub metadata: TrainingMetadata,
}

const CONTAINER_FORMAT: &str = "sinusbench-model/1";

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.shapes[0]
    }

    /// Probability of class 1 for a raw row in feature order.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let p = match self.kind {
            ModelKind::LogReg => self.calibrated(logreg::logit(&self.parameters, row)),
            ModelKind::Mlp => self.calibrated(mlp::logit(&self.parameters, self.shapes[1], row)),
            ModelKind::GaussianNB => gnb::proba(&self.parameters, row),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    fn calibrated(&self, logit: f64) -> f64 {
        match &self.metadata.calibrator {
            Some(platt) => platt.apply(logit),
            None => loss::sigmoid(logit),
        }
    }

    pub fn predict_label(&self, row: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_row(row)? >= self.decision_threshold))
    }

    pub fn predict_set(&self, set: &EncodedSet) -> Result<Vec<f64>> {
        if set.feature_names != self.feature_names {
            return Err(ModelError::FeatureMismatch);
        }
        set.rows.iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn with_schema_checksum(mut self, checksum: &str) -> Self {
        self.schema_checksum = Some(checksum.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Container {
            format: CONTAINER_FORMAT.to_string(),
            model: self.clone(),
        })
        .expect("model serializes")
    }

    /// Parses a saved model, refusing one fitted against a different schema.
    pub fn from_json(text: &str, current_schema_checksum: &str) -> Result<Self> {
        let container: Container = serde_json::from_str(text)?;
        if container.format != CONTAINER_FORMAT {
            return Err(ModelError::Config(format!(
                "unknown model container `{}`",
                container.format
            )));
        }
        let model = container.model;
        match &model.schema_checksum {
            Some(saved) if saved == current_schema_checksum => Ok(model),
            Some(saved) => Err(ModelError::SchemaMismatch {
                saved: saved.clone(),
                current: current_schema_checksum.to_string(),
            }),
            None => Err(ModelError::SchemaMismatch {
                saved: "<none>".into(),
                current: current_schema_checksum.to_string(),
            }),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path, current_schema_checksum: &str) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, current_schema_checksum)
    }
}

/// Probability of class 1 for an encoded case.
pub fn predict_proba(model: &TrainedModel, x: &FeatureVector) -> Result<f64> {
    if x.values.len() != model.n_features() {
        return Err(ModelError::DimensionMismatch {
            expected: model.n_features(),
            found: x.values.len(),
        });
    }
    if x.feature_names != model.feature_names {
        return Err(ModelError::FeatureMismatch);
    }
    model.predict_row(&x.values)
}

/// Shared precondition for every trainer: non-empty, both classes, consistent
/// row widths, and no blocklisted feature names.
pub(crate) fn check_training_set(set: &EncodedSet, blocklist: &[String]) -> Result<()> {
    leakage_guard(&set.feature_names, blocklist)?;
    if set.is_empty() {
        return Err(ModelError::Empty);
    }
    for row in &set.rows {
        if row.len() != set.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: set.n_features(),
                found: row.len(),
            });
        }
    }
    let ones = set.labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 {
        return Err(ModelError::SingleClass(0));
    }
    if ones == set.len() {
        return Err(ModelError::SingleClass(1));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    fn toy_logreg() -> TrainedModel {
        TrainedModel {
            kind: ModelKind::LogReg,
            shapes: vec![2],
            parameters: vec![1.0, -1.0, 0.0],
            feature_names: vec!["a".into(), "b".into()],
            training_seed: 0,
            loss_config: LossConfig::Weighted { class_weights: [1.0, 1.0] },
            class_weights: [1.0, 1.0],
            decision_threshold: 0.5,
            schema_checksum: Some("abc".into()),
            metadata: TrainingMetadata::default(),
        }
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            feature_names: vec!["a".into(), "b".into()],
            scaling_state_id: "s".into(),
        }
    }

    #[test]
    fn hand_evaluated_logistic() {
        let p = predict_proba(&toy_logreg(), &fv(vec![2.0, 1.0])).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut m = toy_logreg();
        m.parameters = vec![0.0; 3];
        assert_eq!(predict_proba(&m, &fv(vec![5.0, -3.0])).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let mut x = fv(vec![1.0, 2.0, 3.0]);
        x.feature_names.push("c".into());
        assert!(matches!(
            predict_proba(&toy_logreg(), &x),
            Err(ModelError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn save_load_checks_schema() {
        let m = toy_logreg();
        let text = m.to_json();
        assert_eq!(TrainedModel::from_json(&text, "abc").unwrap(), m);
        assert!(matches!(
            TrainedModel::from_json(&text, "def"),
            Err(ModelError::SchemaMismatch { .. })
        ));
    }
}
