//! Run configuration: a JSON file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sinusbench::cohort::{DEFAULT_COHORT_SIZE, GeneratorConfig};
use sinusbench::protocol::{DecodingParams, ModelIdentity};

use crate::args::RunArgs;
use crate::error::{CliError, Result};
use crate::stages::{Learner, Loss, TrainSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. There is deliberately no default.
    pub seed: Option<u64>,
    /// Cohort CSV; when absent a synthetic cohort is generated into the run.
    #[serde(default)]
    pub cohort: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthSettings,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Directory name under `out_dir`; derived from the config when absent.
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// `mlp`, `mlp:focal`, `logreg`, `gnb`, `heuristic`, `replay:<name>` or
    /// `live:<name>`.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    #[serde(default)]
    pub training: TrainSettings,
    #[serde(default)]
    pub replay_stores: BTreeMap<String, PathBuf>,
    /// Program and arguments used as the transport for `live:` models.
    #[serde(default)]
    pub live_command: Vec<String>,
    #[serde(default)]
    pub decoding: DecodingParams,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_rag_k")]
    pub rag_k: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_repeats")]
    pub importance_repeats: usize,
    #[serde(default = "default_formats")]
    pub report_formats: Vec<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Timestamp stamped on transcripts instead of the wall clock.
    #[serde(default)]
    pub fixed_timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub n: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings { n: DEFAULT_COHORT_SIZE, seed: None, generator: GeneratorConfig::default() }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_models() -> Vec<String> {
    vec!["mlp".into(), "heuristic".into()]
}
fn default_loss() -> Loss {
    Loss::Weighted
}
fn default_k() -> usize {
    5
}
fn default_rag_k() -> usize {
    3
}
fn default_thresholds() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}
fn default_bins() -> usize {
    10
}
fn default_bootstrap() -> usize {
    2000
}
fn default_repeats() -> usize {
    20
}
fn default_formats() -> Vec<String> {
    vec!["json".into(), "markdown".into()]
}
fn default_parallelism() -> usize {
    1
}

/// A parsed entry of `models`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Learned { learner: Learner, loss: Loss, name: String },
    Heuristic,
    Replay { name: String },
    Live { name: String },
}

impl ModelSpec {
    pub fn parse(text: &str, default_loss: Loss) -> Result<Self> {
        let (head, tail) = match text.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (text.trim(), None),
        };
        let learner = match head {
            "mlp" => Some(Learner::Mlp),
            "logreg" => Some(Learner::Logreg),
            "gnb" => Some(Learner::Gnb),
            _ => None,
        };
        if let Some(learner) = learner {
            let loss = match tail {
                None => default_loss,
                Some("weighted") => Loss::Weighted,
                Some("focal") => Loss::Focal,
                Some(other) => return Err(CliError::validation(format!("unknown loss `{other}` in `{text}`"))),
            };
            let name = match tail {
                Some(t) => format!("{head}-{t}"),
                None => head.to_string(),
            };
            return Ok(ModelSpec::Learned { learner, loss, name });
        }
        let known = |name: &str| -> Result<String> {
            if ModelIdentity::registry(name).is_some() {
                Ok(name.to_lowercase())
            } else {
                Err(CliError::validation(format!("`{name}` is not a registered language model")))
            }
        };
        match (head, tail) {
            ("heuristic", None) => Ok(ModelSpec::Heuristic),
            ("replay", Some(name)) => Ok(ModelSpec::Replay { name: known(name)? }),
            ("live", Some(name)) => Ok(ModelSpec::Live { name: known(name)? }),
            _ => Err(CliError::validation(format!("unknown model `{text}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Learned { name, .. } => name.clone(),
            ModelSpec::Heuristic => crate::stages::HEURISTIC.into(),
            ModelSpec::Replay { name } | ModelSpec::Live { name } => name.clone(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Defaults with only the mandatory seed left unset.
    pub fn empty() -> Self {
        serde_json::from_str("{}").expect("every field but the seed has a default")
    }

    /// Applies flags over the file values (flags win).
    pub fn apply_flags(&mut self, args: &RunArgs) -> Result<()> {
        if let Some(seed) = args.seed {
            self.seed = Some(seed);
        }
        if let Some(p) = &args.cohort {
            self.cohort = Some(p.clone());
        }
        if let Some(p) = &args.schema {
            self.schema = Some(p.clone());
        }
        if let Some(p) = &args.out_dir {
            self.out_dir = p.clone();
        }
        if let Some(id) = &args.run_id {
            self.run_id = Some(id.clone());
        }
        if let Some(models) = &args.models {
            self.models = models.clone();
        }
        for pair in &args.replay_store {
            let (name, path) = pair
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("--replay-store expects name=path, got `{pair}`")))?;
            self.replay_stores.insert(name.trim().to_lowercase(), PathBuf::from(path.trim()));
        }
        if let Some(k) = args.k {
            self.k = k;
        }
        if let Some(b) = args.bootstrap {
            self.bootstrap = b;
        }
        if let Some(t) = &args.fixed_timestamp {
            self.fixed_timestamp = Some(t.clone());
        }
        Ok(())
    }

    /// Checks everything that can be checked before any work starts and
    /// returns the parsed model list.
    pub fn validate(&self) -> Result<Vec<ModelSpec>> {
        if self.seed.is_none() {
            return Err(CliError::validation("a seed is required (config `seed` or --seed)"));
        }
        for (what, path) in [("cohort", &self.cohort), ("schema", &self.schema), ("corpus", &self.corpus)] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(CliError::validation(format!("{what} file {} does not exist", p.display())));
                }
            }
        }
        if self.cohort.is_none() && self.synth.n == 0 {
            return Err(CliError::validation("synth.n must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CliError::validation(format!("test_fraction {} is not in (0, 1)", self.test_fraction)));
        }
        if self.k == 0 {
            return Err(CliError::validation("k must be at least 1"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(CliError::validation("thresholds must lie in (0, 1)"));
        }
        if self.report_formats.is_empty()
            || self.report_formats.iter().any(|f| f != "json" && f != "markdown")
        {
            return Err(CliError::validation("report_formats must be drawn from json and markdown"));
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || crate::stages::file_stem(id) != *id || id.starts_with('.') {
                return Err(CliError::validation(format!("run id `{id}` must be a plain directory name")));
            }
        }
        self.decoding.validate()?;
        if self.models.is_empty() {
            return Err(CliError::validation("no models selected"));
        }
        let specs = self
            .models
            .iter()
            .map(|m| ModelSpec::parse(m, self.loss))
            .collect::<Result<Vec<_>>>()?;
        let mut names: Vec<String> = specs.iter().map(ModelSpec::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::validation("model names must be distinct"));
        }
        for spec in &specs {
            match spec {
                ModelSpec::Replay { name } => match self.replay_stores.get(name) {
                    Some(p) if p.is_dir() => {}
                    Some(p) => {
                        return Err(CliError::validation(format!(
                            "replay store {} for `{name}` is not a directory",
                            p.display()
                        )))
                    }
                    None => return Err(CliError::validation(format!("no replay store configured for `{name}`"))),
                },
                ModelSpec::Live { name } => {
                    if self.live_command.is_empty() {
                        return Err(CliError::validation(format!("live model `{name}` needs live_command")));
                    }
                    if !self.replay_stores.contains_key(name) {
                        return Err(CliError::validation(format!(
                            "live model `{name}` needs a replay store to record into"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(specs)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    /// Directory name derived from the configuration when none is given.
    pub fn run_id(&self) -> String {
        match &self.run_id {
            Some(id) => id.clone(),
            None => {
                let canonical = serde_json::to_vec(self).expect("config serializes");
                format!("run-{}", &sinusbench::hash::sha256_hex(&canonical)[..12])
            }
        }
    }

    pub fn wants(&self, format: &str) -> bool {
        self.report_formats.iter().any(|f| f == format)
    }
}
