//! Evaluation and paired statistical comparison.
//!
//! Everything here is a pure function of a [`PredictionSet`] (or of the raw
//! label/score vectors inside one), so every number in an
//! [`EvaluationReport`] can be recomputed from the stored predictions.

mod bootstrap;
mod calibration;
mod confusion;
mod decision;
mod importance;
mod paired;
mod ranking;
mod report;

pub use bootstrap::{bootstrap_ci, paired_bootstrap, BootstrapCi, PairedBootstrap};
pub use calibration::{brier, reliability_curve, ReliabilityBin};
pub use confusion::{balanced_accuracy, confusion, threshold_metrics, ConfusionMatrix, ThresholdMetrics};
pub use decision::{net_benefit, NetBenefitPoint};
pub use importance::{permutation_importance, permutation_importance_all, Classifier, PermutationImportance};
pub use paired::{delong_test, mcnemar, DelongResult, McNemarMethod, McNemarResult};
pub use ranking::{auroc, average_precision, pr_curve, roc_curve, PrPoint, RocPoint};
pub use report::{compare, evaluate, ComparisonReport, EvalOptions, EvaluationReport, MetricWinner};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::Confidence;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("both classes are required (found only class {0})")]
    SingleClass(u8),
    #[error("no positive cases")]
    NoPositives,
    #[error("no cases")]
    Empty,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bootstrap needed more than {cap} redraws to keep both classes")]
    RedrawCapExceeded { cap: usize },
    #[error("prediction sets cover different cases")]
    CaseMismatch,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Aligned per-case predictions of one model on one split.
///
/// `scores` are on the probability scale. For label-plus-confidence models
/// they are `(1 + proxy) / 2`, a monotone map of the signed proxy score, so
/// ranking metrics are unaffected by the rescaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    pub case_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
    pub hard_labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<Option<Confidence>>>,
}

impl PredictionSet {
    /// Validates lengths and value ranges, then orders everything by case id.
    pub fn new(
        model: impl Into<String>,
        case_ids: Vec<String>,
        labels: Vec<u8>,
        scores: Vec<f64>,
        hard_labels: Vec<u8>,
    ) -> Result<Self> {
        let set = PredictionSet {
            model: model.into(),
            case_ids,
            labels,
            scores,
            hard_labels,
            confidences: None,
        };
        set.validate()?;
        Ok(set.sorted())
    }

    pub fn with_confidences(mut self, confidences: Vec<Option<Confidence>>) -> Result<Self> {
        if confidences.len() != self.len() {
            return Err(MetricsError::LengthMismatch(self.len(), confidences.len()));
        }
        self.confidences = Some(confidences);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.case_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.case_ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.case_ids.len();
        for len in [self.labels.len(), self.scores.len(), self.hard_labels.len()] {
            if len != n {
                return Err(MetricsError::LengthMismatch(n, len));
            }
        }
        check_binary(&self.labels)?;
        check_binary(&self.hard_labels)?;
        check_probabilities(&self.scores)?;
        Ok(())
    }

    fn sorted(self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.case_ids[a].cmp(&self.case_ids[b]));
        self.select(&order)
    }

    /// Rows at `positions`, in that order (positions may repeat).
    pub fn select(&self, positions: &[usize]) -> Self {
        PredictionSet {
            model: self.model.clone(),
            case_ids: positions.iter().map(|&i| self.case_ids[i].clone()).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            scores: positions.iter().map(|&i| self.scores[i]).collect(),
            hard_labels: positions.iter().map(|&i| self.hard_labels[i]).collect(),
            confidences: self
                .confidences
                .as_ref()
                .map(|c| positions.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn confusion(&self) -> ConfusionMatrix {
        confusion(&self.labels, &self.hard_labels).expect("validated lengths")
    }
}

pub(crate) fn check_binary(values: &[u8]) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(v) => Err(MetricsError::InvalidInput(format!("label {v} is not 0 or 1"))),
        None => Ok(()),
    }
}

pub(crate) fn check_probabilities(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(MetricsError::InvalidInput(format!("{v} is not a probability"))),
        None => Ok(()),
    }
}

pub(crate) fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch(a, b))
    }
}

pub(crate) fn class_counts(labels: &[u8]) -> (usize, usize) {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    (labels.len() - ones, ones)
}
