//! Canonical prompting, constrained-output parsing, replicate voting and
//! audited trials for label-plus-confidence language models.

mod aggregate;
mod client;
mod parse;
mod prompt;
mod transcript;

pub use aggregate::{aggregate_replicates, Aggregate, AggregateFlag};
pub use client::{
    ClientError, CommandTransport, CompletionRequest, LiveClient, ModelClient, ReplayClient, ReplayEntry,
    ReplayStore, Transport,
};
pub use parse::{parse_response, parse_response_bytes, proxy_score, ParsedOutput, ParserStatus};
pub use prompt::{build_prompt, serialize_case, Prompt, CANONICAL_PROMPT, OUTPUT_INSTRUCTIONS};
pub use transcript::{
    run_trial, AuditLog, Clock, FixedClock, Replicate, SystemClock, TrialRunner, TrialTranscript,
    AUDIT_FORMAT,
};

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("no cases to put in the prompt")]
    EmptyCases,
    #[error("invalid model identity: {0}")]
    Identity(String),
    #[error("invalid decoding parameters: {0}")]
    Decoding(String),
    #[error("no stored response for prompt {hash} (replicate {replicate})")]
    ReplayMiss { hash: String, replicate: usize },
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Format(String),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// Who answered: vendor, model identifier and the date the model was used.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelIdentity {
    pub vendor: String,
    pub model_id: String,
    pub access_date: String,
}

impl ModelIdentity {
    pub fn new(vendor: &str, model_id: &str, access_date: &str) -> Result<Self> {
        let identity = ModelIdentity {
            vendor: vendor.trim().to_string(),
            model_id: model_id.trim().to_string(),
            access_date: access_date.trim().to_string(),
        };
        identity.validate()?;
        Ok(identity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vendor.is_empty() || self.model_id.is_empty() || self.access_date.is_empty() {
            return Err(ProtocolError::Identity("vendor, model id and access date are required".into()));
        }
        NaiveDate::parse_from_str(&self.access_date, "%Y-%m-%d")
            .map_err(|_| ProtocolError::Identity(format!("access date {:?} is not YYYY-MM-DD", self.access_date)))?;
        Ok(())
    }

    /// The benchmarked models, looked up by a short name such as `claude`.
    pub fn registry(short_name: &str) -> Option<Self> {
        let (vendor, model_id) = match short_name.to_lowercase().as_str() {
            "chatgpt" | "gpt-5-thinking" => ("openai", "gpt-5-thinking"),
            "medgpt" => ("medgpt", "medgpt"),
            "gemini" | "gemini-2.5-pro" => ("google", "gemini-2.5-pro"),
            "perplexity" | "sonar" => ("perplexity", "sonar"),
            "claude" | "claude-sonnet-4.5" => ("anthropic", "claude-sonnet-4.5"),
            _ => return None,
        };
        Some(ModelIdentity {
            vendor: vendor.into(),
            model_id: model_id.into(),
            access_date: "2025-10-21".into(),
        })
    }
}

impl fmt::Display for ModelIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({})", self.vendor, self.model_id, self.access_date)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.2,
            top_p: 0.9,
            max_tokens: 1024,
            seed: None,
        }
    }
}

impl DecodingParams {
    pub const TEMPERATURE_RANGE: (f64, f64) = (0.1, 0.5);
    pub const TOP_P_RANGE: (f64, f64) = (0.7, 0.95);

    /// Rejects impossible values and returns a warning (also logged) for
    /// each value outside the recommended ranges.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ProtocolError::Decoding(format!("temperature {}", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProtocolError::Decoding(format!("top_p {}", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(ProtocolError::Decoding("max_tokens must be positive".into()));
        }
        let mut warnings = Vec::new();
        let (tlo, thi) = Self::TEMPERATURE_RANGE;
        if !(tlo..=thi).contains(&self.temperature) {
            warnings.push(format!("temperature {} outside default range [{tlo}, {thi}]", self.temperature));
        }
        let (plo, phi) = Self::TOP_P_RANGE;
        if !(plo..=phi).contains(&self.top_p) {
            warnings.push(format!("top_p {} outside default range [{plo}, {phi}]", self.top_p));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }
}
