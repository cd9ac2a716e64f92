use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ProtocolError, Result};
use crate::cohort::{columns, leakage_guard, CohortSchema, PatientRecord};
use crate::hash::sha256_hex;
use crate::rag::{augment_prompt, Passage};

/// The task description given to every model, word for word.
pub const CANONICAL_PROMPT: &str = "Assume you are an expert Otolaryngologist with a special interest in Rhinology and endoscopic sinus surgery. I will provide you an excel sheet with different patients' clinical information. They have been suffering from CRS (chronic rhinosinusitis), and have undergone prior appropriate medical therapies, and are considering whether or not to have endoscopic sinus surgery. In this discussion, we have the baseline sinonasal quality of life measured by the SNOT22 score, and you need to predict what their result might be at 6-months postoperatively, should they choose to undergo surgery. Consider a decrease in total SNOT22 of more than 8.9 as clinically significant, and the surgery would be deemed successful. Based on the given data, provide your predictions in the form of 0 or 1. 0 means the patient would not be expected to achieve an 8.9 point improvement in SNOT22 and the surgery should not be recommended; 1 means the patient is expected to achieve greater than an 8.9 point improvement in total SNOT22 and the surgery should be recommended. Also complete the confidence column, your options would be very confident, Somewhat confident, Neutral, Somewhat unsure, Not at all confident. The data are in the uploaded csv file. All patients meet criteria to have surgery by current clinical guidelines, but we have observed from previous published data and our own experience that some patients will not achieve their expected outcome. Your job is to predict whether surgery should be recommended for these patients, or not.";

/// Output schema appended after the task description.
pub const OUTPUT_INSTRUCTIONS: &str = "Explain your reasoning, then finish with exactly these two lines:\n\
PREDICTION: <0 or 1>\n\
CONFIDENCE: <very confident | Somewhat confident | Neutral | Somewhat unsure | Not at all confident>";

/// Final prompt bytes and their SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub hash: String,
}

fn display_value(record: &PatientRecord, name: &str) -> Option<String> {
    if let Some(flag) = record.flag(name) {
        return Some(u8::from(flag).to_string());
    }
    Some(match name {
        columns::SNOT22_BASELINE => record.snot22_baseline.to_string(),
        columns::AGE => record.age.to_string(),
        columns::SEX => record.sex.label().to_string(),
        columns::CT_TOTAL => record.ct_total.to_string(),
        columns::ENDOSCOPY_TOTAL => record.endoscopy_total.to_string(),
        columns::INSURANCE => record.insurance.clone(),
        columns::INCOME => record.income_bracket.clone(),
        columns::RACE => record.race.clone(),
        _ => return None,
    })
}

/// One `NAME: value` line per schema feature, preceded by the patient id.
///
/// Any field caught by the schema blocklist is left out, whatever the
/// feature list says, so the follow-up score can never reach a prompt.
pub fn serialize_case(record: &PatientRecord, schema: &CohortSchema) -> String {
    let mut out = format!("{}: {}\n", columns::PATIENT_ID, record.patient_id);
    for name in &schema.features {
        if leakage_guard(&[name], &schema.blocklist).is_err() {
            continue;
        }
        if let Some(value) = display_value(record, name) {
            let _ = writeln!(out, "{name}: {value}");
        }
    }
    out
}

/// Assembles `[passages] template, output schema, case data` and hashes the
/// exact bytes.
pub fn build_prompt(cases: &[String], template: &str, passages: &[Passage]) -> Result<Prompt> {
    if cases.is_empty() {
        return Err(ProtocolError::EmptyCases);
    }
    let mut body = format!("{}\n\n{}\n\nPatient data:\n", template.trim_end(), OUTPUT_INSTRUCTIONS);
    for (i, case) in cases.iter().enumerate() {
        if i > 0 {
            body.push('\n');
        }
        body.push_str(case.trim_end());
        body.push('\n');
    }
    let text = augment_prompt(&body, passages);
    let hash = sha256_hex(text.as_bytes());
    Ok(Prompt { text, hash })
}
