use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    aggregate_replicates, parse_response, Aggregate, ClientError, CompletionRequest, DecodingParams,
    ModelClient, ModelIdentity, ParsedOutput, Prompt, ProtocolError, Result,
};

/// Header line identifying an audit log file.
pub const AUDIT_FORMAT: &str = "sinusbench-audit";
const AUDIT_VERSION: u32 = 1;

pub trait Clock: Send + Sync {
    /// RFC 3339 timestamp.
    fn now(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

/// Always reports the same instant; makes transcripts byte-reproducible.
#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub raw_text: String,
    pub parsed: ParsedOutput,
    /// Transport failure text when no answer came back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTranscript {
    pub case_id: String,
    pub model: ModelIdentity,
    /// `vendor/model_id (date)`.
    pub model_label: String,
    pub prompt_hash: String,
    pub decoding: DecodingParams,
    pub replicates: Vec<Replicate>,
    pub aggregate: Aggregate,
    pub timestamp: String,
}

impl TrialTranscript {
    pub fn recompute_aggregate(&self) -> Aggregate {
        let parsed: Vec<ParsedOutput> = self.replicates.iter().map(|r| r.parsed.clone()).collect();
        aggregate_replicates(&parsed)
    }

    /// Probability-scale score `(1 + mean proxy) / 2`.
    pub fn score(&self) -> f64 {
        (1.0 + self.aggregate.mean_proxy) / 2.0
    }
}

/// Collects `k` replicates for one prompt, parses and votes.
///
/// A live transport failure becomes a `Malformed` replicate carrying the
/// error text; a replay miss aborts the trial.
pub fn run_trial(
    client: &dyn ModelClient,
    case_id: &str,
    prompt: &Prompt,
    decoding: &DecodingParams,
    k: usize,
    clock: &dyn Clock,
) -> Result<TrialTranscript> {
    if k == 0 {
        return Err(ProtocolError::NoReplicates);
    }
    let model = client.identity().clone();
    let mut replicates = Vec::with_capacity(k);
    for index in 0..k {
        let request = CompletionRequest { prompt, model: &model, decoding, replicate: index };
        let replicate = match client.complete(&request) {
            Ok(raw_text) => Replicate { index, parsed: parse_response(&raw_text), raw_text, error: None },
            Err(ClientError::ReplayMiss { hash, replicate }) => {
                return Err(ProtocolError::ReplayMiss { hash, replicate })
            }
            Err(e) => Replicate {
                index,
                raw_text: String::new(),
                parsed: ParsedOutput::malformed(),
                error: Some(e.to_string()),
            },
        };
        replicates.push(replicate);
    }
    let parsed: Vec<ParsedOutput> = replicates.iter().map(|r| r.parsed.clone()).collect();
    Ok(TrialTranscript {
        case_id: case_id.to_string(),
        model_label: model.to_string(),
        model,
        prompt_hash: prompt.hash.clone(),
        decoding: decoding.clone(),
        replicates,
        aggregate: aggregate_replicates(&parsed),
        timestamp: clock.now(),
    })
}

#[derive(Serialize, Deserialize)]
struct AuditHeader {
    format: String,
    version: u32,
}

/// Append-only JSON Lines log: a header line, then one transcript per line.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() == 0 {
            let header = AuditHeader { format: AUDIT_FORMAT.into(), version: AUDIT_VERSION };
            writeln!(file, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        }
        Ok(AuditLog { path, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, transcript: &TrialTranscript) -> Result<()> {
        let line = serde_json::to_string(transcript).expect("transcript serializes");
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(file, "{line}")?;
        file.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Vec<TrialTranscript>> {
        let mut lines = BufReader::new(File::open(path)?).lines();
        let header: AuditHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?).map_err(|e| ProtocolError::Format(e.to_string()))?,
            None => return Err(ProtocolError::Format("empty audit log".into())),
        };
        if header.format != AUDIT_FORMAT || header.version != AUDIT_VERSION {
            return Err(ProtocolError::Format(format!("unsupported audit log {} v{}", header.format, header.version)));
        }
        lines
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(|e| ProtocolError::Format(e.to_string())))
            .collect()
    }
}

/// Fixed trial settings plus an optional audit log.
pub struct TrialRunner {
    pub decoding: DecodingParams,
    pub k: usize,
    pub clock: Box<dyn Clock>,
    pub audit: Option<AuditLog>,
    /// Upper bound on concurrent trials.
    pub parallelism: usize,
}

impl TrialRunner {
    pub fn new(decoding: DecodingParams, k: usize) -> Self {
        TrialRunner { decoding, k, clock: Box::new(SystemClock), audit: None, parallelism: 1 }
    }

    /// Runs one trial and appends it to the audit log before returning.
    pub fn run(&self, client: &dyn ModelClient, case_id: &str, prompt: &Prompt) -> Result<TrialTranscript> {
        let t = run_trial(client, case_id, prompt, &self.decoding, self.k, self.clock.as_ref())?;
        if let Some(log) = &self.audit {
            log.append(&t)?;
        }
        Ok(t)
    }

    /// Runs every `(case_id, prompt)` pair. Trials may overlap in time, but
    /// transcripts are returned and logged in input order.
    pub fn run_all(&self, client: &dyn ModelClient, cases: &[(String, Prompt)]) -> Result<Vec<TrialTranscript>> {
        let workers = self.parallelism.max(1).min(cases.len().max(1));
        let chunk = cases.len().div_ceil(workers).max(1);
        let results: Vec<Result<Vec<TrialTranscript>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = cases
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|(id, p)| run_trial(client, id, p, &self.decoding, self.k, self.clock.as_ref()))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(cases.len());
        for part in results {
            out.extend(part?);
        }
        if let Some(log) = &self.audit {
            for t in &out {
                log.append(t)?;
            }
        }
        Ok(out)
    }
}
