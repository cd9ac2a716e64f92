//! Pre-operative cohort handling: parsing, labels, leakage guard, encoding,
//! stratified splits and synthetic cohorts.

mod encode;
mod leakage;
mod parse;
mod record;
mod schema;
mod split;
mod synth;

pub use encode::{encode, EncodedSet, Encoder, EncoderState, FeatureVector, Scaler};
pub use leakage::{leakage_guard, LeakageViolation};
pub use parse::{parse_cohort, serialize_cohort, ParsedCohort, Rejection, RejectionKind};
pub use record::{columns, PatientRecord, Sex};
pub use schema::CohortSchema;
pub use split::{stratified_split, CohortSplit};
pub use synth::{generate_synthetic, CategoryWeights, DEFAULT_COHORT_SIZE, DEFAULT_SEED, GeneratorConfig, OutcomeModel, RoundedNormal};

use thiserror::Error;

/// SNOT-22 reduction at six months that counts as a clinically important
/// improvement.
pub const MCID_REDUCTION: f64 = 8.9;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Leakage(#[from] LeakageViolation),
    #[error("value `{value}` is not in the `{column}` dictionary")]
    UnknownCategory { column: String, value: String },
    #[error("feature `{0}` cannot be derived from a patient record")]
    UnknownFeature(String),
    #[error("record `{0}` has no 6-month SNOT-22 and cannot be labelled")]
    Unlabeled(String),
    #[error("class {label} has {count} member(s); at least 2 are needed to stratify")]
    ClassTooSmall { label: u8, count: usize },
    #[error("test fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("invalid generator configuration: {0}")]
    Generator(String),
}

pub type Result<T, E = CohortError> = std::result::Result<T, E>;

/// Binary MCID label from baseline and 6-month totals.
///
/// Returns 1 when the reduction is at least 8.9 points, which on integer totals
/// is the same as a reduction of 9 or more.
pub fn derive_label(snot22_baseline: u32, snot22_6mo: u32) -> u8 {
    let reduction = snot22_baseline as f64 - snot22_6mo as f64;
    u8::from(reduction >= MCID_REDUCTION)
}

/// Label for a record, or `None` when the follow-up total is missing.
pub fn label_of(record: &PatientRecord) -> Option<u8> {
    record
        .snot22_6mo
        .map(|after| derive_label(record.snot22_baseline, after))
}
