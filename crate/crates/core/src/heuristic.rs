//! The multiplicative bracket-and-penalty rule an LLM reported using when asked
//! to explain its predictions, implemented as a deterministic, traceable
//! predictor.
//!
//! The expected improvement starts at 45% of baseline SNOT-22, is scaled by
//! severity brackets (baseline SNOT-22, endoscopy, CT, polyps) and then by
//! comorbidity penalties. An improvement strictly above 9 points predicts
//! success. Confidence is banded by the distance of the improvement from 9.

use serde::{Deserialize, Serialize};

use crate::cohort::PatientRecord;
use crate::confidence::Confidence;

pub const BASE_FRACTION: f64 = 0.45;
/// Decision threshold on the adjusted improvement. Strictly greater than.
pub const DECISION_THRESHOLD: f64 = 9.0;
pub const AGE_PENALTY_FROM: u32 = 65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub multiplier: f64,
}

impl Factor {
    fn new(name: &str, multiplier: f64) -> Self {
        Factor {
            name: name.to_string(),
            multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicPrediction {
    pub base_improvement: f64,
    /// Severity factors first, then penalties, in the order applied.
    pub factor_trace: Vec<Factor>,
    pub adjusted_improvement: f64,
    pub predicted_6mo: f64,
    pub label: u8,
    pub confidence: Confidence,
}

impl HeuristicPrediction {
    pub fn multiplier_product(&self) -> f64 {
        self.factor_trace.iter().map(|f| f.multiplier).product()
    }

    /// One JSON object: base, ordered factors, delta, label, confidence.
    pub fn trace_json(&self, patient_id: &str) -> serde_json::Value {
        serde_json::json!({
            "patient_id": patient_id,
            "base_improvement": self.base_improvement,
            "factors": self.factor_trace.iter()
                .map(|f| serde_json::json!([f.name, f.multiplier]))
                .collect::<Vec<_>>(),
            "delta": self.adjusted_improvement,
            "predicted_6mo": self.predicted_6mo,
            "label": self.label,
            "confidence": self.confidence.label(),
        })
    }
}

pub fn base_improvement(snot22_baseline: u32) -> f64 {
    BASE_FRACTION * snot22_baseline as f64
}

/// Bracket factors for symptom burden and objective disease, plus the
/// polyp bonus when present.
pub fn severity_multipliers(
    snot22_baseline: u32,
    endoscopy_total: u32,
    ct_total: u32,
    crs_polyps: bool,
) -> Vec<Factor> {
    let snot = match snot22_baseline {
        0..=24 => 0.5,
        25..=39 => 0.7,
        40..=59 => 1.0,
        60..=79 => 1.1,
        _ => 1.2,
    };
    let endo = match endoscopy_total {
        0..=3 => 0.8,
        4..=6 => 0.9,
        7..=10 => 1.0,
        _ => 1.1,
    };
    let ct = match ct_total {
        0..=6 => 0.85,
        7..=12 => 1.0,
        _ => 1.1,
    };
    let mut factors = vec![
        Factor::new("snot", snot),
        Factor::new("endo", endo),
        Factor::new("ct", ct),
    ];
    if crs_polyps {
        factors.push(Factor::new("polyps", 1.05));
    }
    factors
}

/// Comorbidity and history penalties; every applicable one is listed.
pub fn penalty_multipliers(record: &PatientRecord) -> Vec<Factor> {
    let table = [
        ("depression", record.depression, 0.7),
        ("fibromyalgia", record.fibromyalgia, 0.7),
        ("smoker", record.smoker, 0.85),
        ("copd", record.copd, 0.8),
        ("asthma", record.asthma, 0.9),
        ("osa", record.osa, 0.9),
        ("diabetes", record.diabetes, 0.9),
        ("gerd", record.gerd, 0.95),
        ("asa_intolerance", record.asa_intolerance, 0.9),
        ("previous_surgery", record.previous_surgery, 0.85),
        ("age65", record.age >= AGE_PENALTY_FROM, 0.9),
    ];
    table
        .into_iter()
        .filter(|&(_, present, _)| present)
        .map(|(name, _, m)| Factor::new(name, m))
        .collect()
}

/// 1 when the adjusted improvement is strictly above 9 points.
pub fn classify(delta: f64) -> u8 {
    u8::from(delta > DECISION_THRESHOLD)
}

/// Half-open bands on `|delta - 9|`: [15,∞), [10,15), [6,10), [3,6), [0,3).
pub fn confidence_band(delta: f64) -> Confidence {
    let d = (delta - DECISION_THRESHOLD).abs();
    if d >= 15.0 {
        Confidence::VeryConfident
    } else if d >= 10.0 {
        Confidence::SomewhatConfident
    } else if d >= 6.0 {
        Confidence::Neutral
    } else if d >= 3.0 {
        Confidence::SomewhatUnsure
    } else {
        Confidence::NotAtAllConfident
    }
}

/// Full rule chain for one record. The 6-month total, if present, is ignored.
pub fn predict_heuristic(record: &PatientRecord) -> HeuristicPrediction {
    let base = base_improvement(record.snot22_baseline);
    let mut factor_trace = severity_multipliers(
        record.snot22_baseline,
        record.endoscopy_total,
        record.ct_total,
        record.crs_polyps,
    );
    factor_trace.extend(penalty_multipliers(record));
    let adjusted = factor_trace.iter().fold(base, |acc, f| acc * f.multiplier);
    let predicted_6mo = (record.snot22_baseline as f64 - adjusted).max(0.0);
    HeuristicPrediction {
        base_improvement: base,
        factor_trace,
        adjusted_improvement: adjusted,
        predicted_6mo,
        label: classify(adjusted),
        confidence: confidence_band(adjusted),
    }
}
