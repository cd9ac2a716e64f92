//! Pipeline stages shared by the single-step subcommands and `run`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sinusbench::cohort::{
    columns, label_of, leakage_guard, parse_cohort, stratified_split, CohortSchema, CohortSplit, EncodedSet, Encoder,
    PatientRecord, Rejection,
};
use sinusbench::metrics::{
    compare, evaluate, permutation_importance_all, ComparisonReport, EvalOptions, EvaluationReport,
    PermutationImportance, PredictionSet,
};
use sinusbench::models::{
    train_gnb, train_logreg, train_mlp, LogRegConfig, LossConfig, MlpArchitecture, OptimizerConfig, TrainedModel,
};
use sinusbench::protocol::{
    build_prompt, proxy_score, serialize_case, AggregateFlag, ModelClient, Prompt, TrialRunner, TrialTranscript,
    CANONICAL_PROMPT,
};
use sinusbench::rag::{retrieve, Bm25Index};
use sinusbench::predict_heuristic;

use crate::error::{CliError, Result};
use crate::rundir::RunDir;

pub const SPLIT_FILE: &str = "split.json";
pub const ENCODER_FILE: &str = "encoder.json";
pub const HEURISTIC: &str = "heuristic";

/// Note attached to every heuristic report: the rule fires on an adjusted
/// improvement strictly above 9 while labels count a reduction of 8.9 or more.
pub const HEURISTIC_THRESHOLD_NOTE: &str =
    "rule predicts improvement when adjusted delta > 9; labels use a reduction >= 8.9";

pub fn load_schema(path: Option<&Path>) -> Result<CohortSchema> {
    Ok(match path {
        Some(p) => CohortSchema::load(p)?,
        None => CohortSchema::canonical(),
    })
}

/// Labelled records plus what was dropped on the way in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadedCohort {
    pub records: Vec<PatientRecord>,
    pub rejections: Vec<Rejection>,
    pub unlabeled: Vec<String>,
}

/// Rejects a CSV carrying any post-operative column other than the
/// follow-up total the label is derived from.
pub fn screen_columns(csv_bytes: &[u8], schema: &CohortSchema) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_bytes);
    let headers = reader.headers().map_err(|e| CliError::validation(e.to_string()))?;
    let candidates: Vec<&str> = headers
        .iter()
        .map(str::trim)
        .filter(|h| *h != columns::SNOT22_6MO)
        .collect();
    leakage_guard(&candidates, &schema.blocklist).map_err(|v| CliError::Leakage(v.to_string()))
}

pub fn load_cohort(path: &Path, schema: &CohortSchema) -> Result<LoadedCohort> {
    let bytes = std::fs::read(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    screen_columns(&bytes, schema)?;
    let parsed = parse_cohort(&bytes, schema)?;
    let (records, unlabeled): (Vec<_>, Vec<_>) = parsed.records.into_iter().partition(|r| label_of(r).is_some());
    if records.is_empty() {
        return Err(CliError::validation(format!("{}: no labelled records", path.display())));
    }
    Ok(LoadedCohort {
        records,
        rejections: parsed.rejections,
        unlabeled: unlabeled.into_iter().map(|r| r.patient_id).collect(),
    })
}

pub fn preprocess(records: &[PatientRecord], schema: &CohortSchema, fraction: f64, seed: u64) -> Result<(CohortSplit, Encoder)> {
    let split = stratified_split(records, fraction, seed)?;
    let encoder = Encoder::fit(&split.train(records), schema)?;
    Ok((split, encoder))
}

/// Split and encoder previously written to a run directory.
pub fn load_preprocessed(dir: &RunDir, schema: &CohortSchema) -> Result<(CohortSplit, Encoder)> {
    if !dir.exists(SPLIT_FILE) {
        return Err(CliError::validation(format!(
            "{} has no {SPLIT_FILE}; run `preprocess` first",
            dir.root().display()
        )));
    }
    let split: CohortSplit = dir.read_json(SPLIT_FILE)?;
    let encoder = Encoder::restore(schema, dir.read_json(ENCODER_FILE)?)?;
    Ok((split, encoder))
}

/// Test records of `split`, failing if the cohort no longer contains them.
pub fn test_records(split: &CohortSplit, records: &[PatientRecord]) -> Result<Vec<PatientRecord>> {
    let test = split.test(records);
    if test.len() != split.test_ids.len() {
        return Err(CliError::validation(
            "cohort does not contain every test case recorded in the split",
        ));
    }
    Ok(test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Mlp,
    Logreg,
    Gnb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Weighted,
    Focal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub hidden_units: usize,
    pub optimizer: OptimizerConfig,
    pub logreg: LogRegConfig,
    pub gnb_var_smoothing: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hidden_units: 400,
            optimizer: OptimizerConfig::default(),
            logreg: LogRegConfig::default(),
            gnb_var_smoothing: 1e-9,
        }
    }
}

pub fn train(
    learner: Learner,
    loss: Loss,
    set: &EncodedSet,
    settings: &TrainSettings,
    seed: u64,
    schema: &CohortSchema,
) -> Result<TrainedModel> {
    let loss = match loss {
        Loss::Weighted => LossConfig::weighted_balanced(&set.labels),
        Loss::Focal => LossConfig::focal_default(&set.labels),
    };
    let model = match learner {
        Learner::Mlp => {
            let arch = MlpArchitecture {
                hidden_units: settings.hidden_units,
                ..MlpArchitecture::new(set.n_features())
            };
            train_mlp(set, &arch, loss, &settings.optimizer, seed, schema)?
        }
        Learner::Logreg => {
            let config = LogRegConfig {
                class_weights: loss.class_weights(),
                ..settings.logreg.clone()
            };
            train_logreg(set, &config, seed, schema)?
        }
        Learner::Gnb => train_gnb(set, settings.gnb_var_smoothing, schema)?,
    };
    Ok(model.with_schema_checksum(schema.checksum()))
}

pub fn model_predictions(name: &str, model: &TrainedModel, set: &EncodedSet) -> Result<PredictionSet> {
    let scores = model.predict_set(set)?;
    if scores.iter().any(|p| !p.is_finite()) {
        return Err(CliError::Numeric(format!("{name} produced a non-finite score")));
    }
    let hard = scores.iter().map(|&p| u8::from(p >= model.decision_threshold)).collect();
    Ok(PredictionSet::new(name, set.case_ids.clone(), set.labels.clone(), scores, hard)?)
}

/// Heuristic predictions and one JSON factor trace per case.
pub fn heuristic_predictions(records: &[PatientRecord]) -> Result<(PredictionSet, Vec<serde_json::Value>)> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    let mut hard = Vec::new();
    let mut confidences = Vec::new();
    let mut traces = Vec::new();
    for r in records {
        let p = predict_heuristic(r);
        ids.push(r.patient_id.clone());
        labels.push(label_of(r).ok_or_else(|| CliError::validation(format!("{} is unlabelled", r.patient_id)))?);
        scores.push((1.0 + proxy_score(p.label, p.confidence)) / 2.0);
        hard.push(p.label);
        confidences.push(Some(p.confidence));
        traces.push(p.trace_json(&r.patient_id));
    }
    let set = PredictionSet::new(HEURISTIC, ids.clone(), labels, scores, hard)?;
    // `new` sorts by case id; reorder the confidences to match.
    let by_id: std::collections::HashMap<&str, _> = ids.iter().map(String::as_str).zip(confidences).collect();
    let confidences = set.case_ids.iter().map(|id| by_id[id.as_str()]).collect();
    Ok((set.with_confidences(confidences)?, traces))
}

/// One canonical prompt per case, optionally prefixed with passages
/// retrieved for that case's serialized record.
pub fn case_prompts(
    records: &[PatientRecord],
    schema: &CohortSchema,
    rag: Option<(&Bm25Index, usize)>,
) -> Result<Vec<(String, Prompt)>> {
    records
        .iter()
        .map(|r| {
            let case = serialize_case(r, schema);
            let passages = match rag {
                Some((index, k)) => retrieve(index, &case, k)?.passages(),
                None => Vec::new(),
            };
            let prompt = build_prompt(&[case], CANONICAL_PROMPT, &passages)?;
            Ok((r.patient_id.clone(), prompt))
        })
        .collect()
}

/// Runs every prompt through `client` and turns the votes into predictions.
pub fn genai_predictions(
    name: &str,
    client: &dyn ModelClient,
    records: &[PatientRecord],
    prompts: &[(String, Prompt)],
    runner: &TrialRunner,
) -> Result<(PredictionSet, Vec<TrialTranscript>)> {
    let transcripts = runner.run_all(client, prompts)?;
    let labels = records
        .iter()
        .map(|r| label_of(r).ok_or_else(|| CliError::validation(format!("{} is unlabelled", r.patient_id))))
        .collect::<Result<Vec<u8>>>()?;
    let set = PredictionSet::new(
        name,
        transcripts.iter().map(|t| t.case_id.clone()).collect(),
        labels,
        transcripts.iter().map(TrialTranscript::score).collect(),
        transcripts.iter().map(|t| t.aggregate.final_label).collect(),
    )?;
    Ok((set, transcripts))
}

/// Report notes for a language-model run: how many cases had no usable
/// replicate or ended in a residual tie.
pub fn transcript_flags(transcripts: &[TrialTranscript]) -> Vec<String> {
    let count = |flag| transcripts.iter().filter(|t| t.aggregate.flag == Some(flag)).count();
    let mut flags = Vec::new();
    let unparseable = count(AggregateFlag::Unparseable);
    if unparseable > 0 {
        flags.push(format!("{unparseable} case(s) had no parseable replicate and default to label 0"));
    }
    let ties = count(AggregateFlag::ResidualTie);
    if ties > 0 {
        flags.push(format!("{ties} case(s) ended in a residual tie and default to label 0"));
    }
    flags
}

/// Which report renderings to write. The summary and curve CSVs are always
/// written; JSON reports are what `report` collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub markdown: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { json: true, markdown: true }
    }
}

pub fn write_report(dir: &RunDir, report: &EvaluationReport, formats: Formats) -> Result<()> {
    let name = file_stem(&report.model);
    if formats.json {
        dir.write(format!("reports/{name}.json"), report.to_json())?;
    }
    if formats.markdown {
        dir.write(format!("reports/{name}.md"), report.to_markdown())?;
    }
    report.write_curve_csvs(&dir.path(format!("curves/{name}"))?)?;
    Ok(())
}

pub fn evaluate_and_write(
    dir: &RunDir,
    set: &PredictionSet,
    options: &EvalOptions,
    formats: Formats,
) -> Result<EvaluationReport> {
    let report = evaluate(set, options)?;
    write_report(dir, &report, formats)?;
    Ok(report)
}

pub fn compare_and_write(
    dir: &RunDir,
    a: &PredictionSet,
    b: &PredictionSet,
    options: &EvalOptions,
    formats: Formats,
) -> Result<ComparisonReport> {
    let report = compare(a, b, options).map_err(|e| match e {
        sinusbench::metrics::MetricsError::CaseMismatch => CliError::validation(format!(
            "{} and {} do not cover the same cases",
            a.model, b.model
        )),
        other => other.into(),
    })?;
    let stem = format!("{}_vs_{}", file_stem(&a.model), file_stem(&b.model));
    if formats.json {
        dir.write(format!("comparisons/{stem}.json"), report.to_json())?;
    }
    if formats.markdown {
        dir.write(format!("comparisons/{stem}.md"), report.to_markdown())?;
    }
    Ok(report)
}

pub fn importance_and_write(
    dir: &RunDir,
    name: &str,
    model: &TrainedModel,
    set: &EncodedSet,
    repeats: usize,
    seed: u64,
) -> Result<Vec<PermutationImportance>> {
    let rows = permutation_importance_all(model, set, repeats, seed)?;
    let stem = file_stem(name);
    dir.write_json(format!("importance/{stem}.json"), &rows)?;
    let mut md = format!("# Permutation importance: {name}\n\n");
    md.push_str("Mean decrease in balanced accuracy over permutations of each feature.\n\n");
    md.push_str("| feature | mean delta | sd |\n|---|---:|---:|\n");
    for r in &rows {
        let _ = writeln!(md, "| {} | {:.4} | {:.4} |", r.feature, r.mean_delta_balanced_accuracy, r.sd);
    }
    dir.write(format!("importance/{stem}.md"), md)?;
    Ok(rows)
}

/// One row of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub n: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub recall0: f64,
    pub recall1: f64,
    pub f1_weighted: f64,
    pub auroc: Option<f64>,
    pub brier: f64,
    pub confusion_matrix: [[u64; 2]; 2],
}

/// Collects `reports/*.json` into `summary.json` and `summary.md`.
pub fn write_summary(dir: &RunDir) -> Result<Vec<SummaryRow>> {
    let reports_dir = dir.path("reports")?;
    let mut paths: Vec<_> = match std::fs::read_dir(&reports_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        return Err(CliError::validation(format!("{} has no reports", dir.root().display())));
    }
    paths.sort();
    let mut rows = Vec::new();
    for path in paths {
        let report = EvaluationReport::from_json(&std::fs::read_to_string(&path)?)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let cm = report.confusion_matrix;
        rows.push(SummaryRow {
            model: report.model.clone(),
            n: report.n,
            accuracy: report.metrics.accuracy,
            balanced_accuracy: report.metrics.balanced_accuracy,
            recall0: report.metrics.recall0,
            recall1: report.metrics.recall1,
            f1_weighted: report.metrics.f1_weighted,
            auroc: report.auroc,
            brier: report.brier,
            confusion_matrix: [[cm.tn, cm.fp], [cm.fn_, cm.tp]],
        });
    }
    dir.write_json("summary.json", &rows)?;
    let mut md = String::from("# Run summary\n\n");
    md.push_str("| model | n | accuracy | balanced acc. | recall 0 | recall 1 | weighted F1 | AUROC | Brier | [TN, FP; FN, TP] |\n");
    md.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|---|\n");
    for r in &rows {
        let [[tn, fp], [fn_, tp]] = r.confusion_matrix;
        let auroc = r.auroc.map_or("n/a".to_string(), |a| format!("{a:.3}"));
        let _ = writeln!(
            md,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {} | {:.3} | [{tn}, {fp}; {fn_}, {tp}] |",
            r.model, r.n, r.accuracy, r.balanced_accuracy, r.recall0, r.recall1, r.f1_weighted, auroc, r.brier
        );
    }
    dir.write("summary.md", md)?;
    Ok(rows)
}

/// Model names become file names; anything outside `[A-Za-z0-9._-]` is
/// replaced so a name can never introduce a path separator.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
        .collect()
}
