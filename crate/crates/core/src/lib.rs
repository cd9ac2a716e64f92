//! Benchmark pipeline for predicting whether a chronic-rhinosinusitis surgery
//! candidate reaches the SNOT-22 minimal clinically important difference.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`cohort`]: CSV ingestion, labelling, leakage guard, encoding, stratified
//!   splits and a synthetic cohort generator.
//! - [`models`]: from-scratch logistic regression, Gaussian naive Bayes and a
//!   single-hidden-layer MLP with weighted or focal loss.
//! - [`heuristic`]: the multiplicative bracket-and-penalty rule, with a full
//!   factor trace for every prediction.
//! - [`protocol`]: canonical prompt construction, constrained-output parsing,
//!   replicate voting, replay/live clients and the JSONL audit log.
//! - [`rag`]: BM25 retrieval over a small passage corpus.
//! - [`metrics`]: threshold, ranking and calibration metrics, decision curves,
//!   DeLong/McNemar/bootstrap comparisons and permutation importance.

pub mod cohort;
pub mod confidence;
pub mod hash;
pub mod heuristic;
pub mod metrics;
pub mod models;
pub mod protocol;
pub mod rag;

pub use cohort::{CohortSchema, FeatureVector, PatientRecord};
pub use confidence::Confidence;
pub use heuristic::{predict_heuristic, HeuristicPrediction};
pub use metrics::{ConfusionMatrix, EvaluationReport, PredictionSet};
pub use models::TrainedModel;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
