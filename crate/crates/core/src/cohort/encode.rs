use serde::{Deserialize, Serialize};

use super::record::{columns, PatientRecord};
use super::{label_of, leakage_guard, CohortError, CohortSchema, Result};
use crate::hash::sha256_hex;

/// One encoded case, in schema feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
    pub scaling_state_id: String,
}

/// Per-column standardisation fitted on training records only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Scaler {
    pub fn from_parts(columns: Vec<String>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if columns.len() != means.len() || columns.len() != sds.len() {
            return Err(CohortError::Schema("scaler part lengths differ".into()));
        }
        if sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CohortError::Schema("scaler sds must be positive".into()));
        }
        Ok(Scaler {
            columns,
            means,
            sds,
        })
    }

    /// Population mean and standard deviation per column. A constant column
    /// gets sd 1 so it passes through centred.
    pub fn fit(records: &[PatientRecord], columns: &[String], schema: &CohortSchema) -> Result<Self> {
        let n = records.len().max(1) as f64;
        let mut means = Vec::with_capacity(columns.len());
        let mut sds = Vec::with_capacity(columns.len());
        for column in columns {
            let values = records
                .iter()
                .map(|r| raw_feature(r, column, schema))
                .collect::<Result<Vec<_>>>()?;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            sds.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Scaler {
            columns: columns.to_vec(),
            means,
            sds,
        })
    }

    fn transform(&self, column: &str, value: f64) -> f64 {
        match self.columns.iter().position(|c| c == column) {
            Some(i) => (value - self.means[i]) / self.sds[i],
            None => value,
        }
    }
}

/// Serializable snapshot of a fitted encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub schema_checksum: String,
    pub scaler: Scaler,
}

/// Schema dictionaries plus a fitted scaler.
#[derive(Debug, Clone)]
pub struct Encoder {
    schema: CohortSchema,
    scaler: Scaler,
    state_id: String,
}

impl Encoder {
    /// Fits the scaler on `train`. The schema's feature list passes the
    /// leakage guard before anything else is checked.
    pub fn fit(train: &[PatientRecord], schema: &CohortSchema) -> Result<Self> {
        Self::check_features(schema)?;
        let scaler = Scaler::fit(train, &schema.continuous, schema)?;
        Self::with_scaler(schema, scaler)
    }

    pub fn with_scaler(schema: &CohortSchema, scaler: Scaler) -> Result<Self> {
        Self::check_features(schema)?;
        let state = serde_json::to_vec(&scaler).expect("scaler serializes");
        let mut bytes = schema.checksum().as_bytes().to_vec();
        bytes.extend_from_slice(&state);
        let state_id = sha256_hex(&bytes)[..16].to_string();
        Ok(Encoder {
            schema: schema.clone(),
            scaler,
            state_id,
        })
    }

    pub fn restore(schema: &CohortSchema, state: EncoderState) -> Result<Self> {
        if state.schema_checksum != schema.checksum() {
            return Err(CohortError::Schema(format!(
                "encoder was fitted against schema {} but {} is loaded",
                state.schema_checksum,
                schema.checksum()
            )));
        }
        Self::with_scaler(schema, state.scaler)
    }

    pub fn state(&self) -> EncoderState {
        EncoderState {
            schema_checksum: self.schema.checksum().to_string(),
            scaler: self.scaler.clone(),
        }
    }

    fn check_features(schema: &CohortSchema) -> Result<()> {
        leakage_guard(&schema.features, &schema.blocklist)?;
        let probe = PatientRecord::example("probe");
        for name in &schema.features {
            if let Err(CohortError::UnknownFeature(n)) = raw_feature(&probe, name, schema) {
                return Err(CohortError::UnknownFeature(n));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &CohortSchema {
        &self.schema
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn state_id(&self) -> &str {
        &self.state_id
    }

    pub fn feature_names(&self) -> &[String] {
        &self.schema.features
    }

    pub fn encode(&self, record: &PatientRecord) -> Result<FeatureVector> {
        let values = self
            .schema
            .features
            .iter()
            .map(|name| {
                raw_feature(record, name, &self.schema).map(|v| self.scaler.transform(name, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureVector {
            values,
            feature_names: self.schema.features.clone(),
            scaling_state_id: self.state_id.clone(),
        })
    }

    /// Encodes labelled records into a training or evaluation set.
    pub fn encode_labeled(&self, records: &[PatientRecord]) -> Result<EncodedSet> {
        let mut set = EncodedSet {
            feature_names: self.schema.features.clone(),
            case_ids: Vec::with_capacity(records.len()),
            rows: Vec::with_capacity(records.len()),
            labels: Vec::with_capacity(records.len()),
        };
        for record in records {
            let label =
                label_of(record).ok_or_else(|| CohortError::Unlabeled(record.patient_id.clone()))?;
            set.case_ids.push(record.patient_id.clone());
            set.rows.push(self.encode(record)?.values);
            set.labels.push(label);
        }
        Ok(set)
    }
}

/// Free-function form of [`Encoder::encode`].
pub fn encode(record: &PatientRecord, encoder: &Encoder) -> Result<FeatureVector> {
    encoder.encode(record)
}

/// Encoded, labelled cases with their feature names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSet {
    pub feature_names: Vec<String>,
    pub case_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl EncodedSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn prevalence(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.labels.len() as f64
    }

    /// Subset by row positions, preserving the given order.
    pub fn select(&self, positions: &[usize]) -> EncodedSet {
        EncodedSet {
            feature_names: self.feature_names.clone(),
            case_ids: positions.iter().map(|&i| self.case_ids[i].clone()).collect(),
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Unscaled numeric value of a named feature. Booleans map to {0,1} and
/// enumerations to their dictionary position.
fn raw_feature(record: &PatientRecord, name: &str, schema: &CohortSchema) -> Result<f64> {
    if let Some(flag) = record.flag(name) {
        return Ok(if flag { 1.0 } else { 0.0 });
    }
    let value = match name {
        columns::SNOT22_BASELINE => record.snot22_baseline as f64,
        columns::AGE => record.age as f64,
        columns::CT_TOTAL => record.ct_total as f64,
        columns::ENDOSCOPY_TOTAL => record.endoscopy_total as f64,
        columns::SEX => schema.code(columns::SEX, record.sex.label())? as f64,
        columns::INSURANCE => schema.code(columns::INSURANCE, &record.insurance)? as f64,
        columns::INCOME => schema.code(columns::INCOME, &record.income_bracket)? as f64,
        columns::RACE => schema.code(columns::RACE, &record.race)? as f64,
        // Resolvable, which is exactly why the leakage guard runs first.
        columns::SNOT22_6MO => record
            .snot22_6mo
            .ok_or_else(|| CohortError::Unlabeled(record.patient_id.clone()))?
            as f64,
        other => return Err(CohortError::UnknownFeature(other.to_string())),
    };
    Ok(value)
}
