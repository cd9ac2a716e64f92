//! The `run` command: every stage, in order, under one run directory.

use std::path::PathBuf;

use sinusbench::cohort::{generate_synthetic, serialize_cohort};
use sinusbench::metrics::{EvalOptions, PredictionSet};
use sinusbench::rag::{load_corpus, Bm25Index, Bm25Params};

use crate::args::RunArgs;
use crate::commands::{make_client, runner, write_jsonl};
use crate::config::{ModelSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::rundir::{RunDir, MANIFEST_FILE};
use crate::stages::{self, Formats, ENCODER_FILE, SPLIT_FILE};

/// Artifacts a previous run may have left; cleared under `--force`.
const ARTIFACTS: [&str; 17] = [
    MANIFEST_FILE,
    "config.json",
    "cohort.csv",
    SPLIT_FILE,
    ENCODER_FILE,
    "rejections.json",
    "models",
    "predictions",
    "transcripts",
    "heuristic_traces.jsonl",
    "reports",
    "curves",
    "comparisons",
    "importance",
    "summary.json",
    "summary.md",
    "rag",
];

pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::empty(),
    };
    config.apply_flags(args)?;
    Ok(config)
}

pub fn run(args: &RunArgs) -> Result<PathBuf> {
    let config = resolve_config(args)?;
    execute(&config, args.force)
}

/// Runs the configured pipeline and returns the run directory.
pub fn execute(config: &RunConfig, force: bool) -> Result<PathBuf> {
    let specs = config.validate()?;
    let seed = config.seed();
    let root = config.out_dir.join(config.run_id());
    if root.join(MANIFEST_FILE).exists() && !force {
        return Err(CliError::validation(format!(
            "{} already holds a run; pass --force to replace it",
            root.display()
        )));
    }
    let dir = RunDir::open(&root)?;
    for artifact in ARTIFACTS {
        dir.remove(artifact)?;
    }
    let formats = Formats { json: config.wants("json"), markdown: config.wants("markdown") };
    dir.write_json("config.json", config)?;

    let schema = stages::load_schema(config.schema.as_deref())?;
    let mut manifest = dir.manifest()?;
    manifest.run_id = config.run_id();
    manifest.schema_checksum = Some(schema.checksum().to_string());
    manifest.config = Some(serde_json::to_value(config)?);
    manifest.seeds.insert("master".into(), seed);
    if let Some(p) = &config.schema {
        manifest.record_input(p)?;
    }

    let cohort_path = match &config.cohort {
        Some(p) => p.clone(),
        None => {
            let synth_seed = config.synth.seed.unwrap_or(seed);
            let records = generate_synthetic(config.synth.n, synth_seed, &config.synth.generator, &schema)?;
            manifest.seeds.insert("synth".into(), synth_seed);
            manifest.record_stage("synth");
            dir.write("cohort.csv", serialize_cohort(&records)?)?
        }
    };
    manifest.record_input(&cohort_path)?;
    let cohort = stages::load_cohort(&cohort_path, &schema)?;

    let (split, encoder) = stages::preprocess(&cohort.records, &schema, config.test_fraction, seed)?;
    dir.write_json(SPLIT_FILE, &split)?;
    dir.write_json(ENCODER_FILE, &encoder.state())?;
    dir.write_json(
        "rejections.json",
        &serde_json::json!({ "rejections": cohort.rejections, "unlabeled": cohort.unlabeled }),
    )?;
    manifest.seeds.insert("split".into(), seed);
    manifest.record_stage("preprocess");
    let train_records = split.train(&cohort.records);
    let test_records = stages::test_records(&split, &cohort.records)?;
    let train_set = encoder.encode_labeled(&train_records)?;
    let test_set = encoder.encode_labeled(&test_records)?;

    let rag_index = match &config.corpus {
        Some(p) => {
            manifest.record_input(p)?;
            Some(Bm25Index::build(load_corpus(p)?, Bm25Params::default())?)
        }
        None => None,
    };

    let mut predictions: Vec<(PredictionSet, Vec<String>)> = Vec::new();
    let mut trained = Vec::new();
    for spec in &specs {
        let name = spec.name();
        let (set, flags) = match spec {
            ModelSpec::Learned { learner, loss, .. } => {
                let model = stages::train(*learner, *loss, &train_set, &config.training, seed, &schema)?;
                dir.write(format!("models/{}.json", stages::file_stem(&name)), model.to_json())?;
                manifest.seeds.insert(format!("train/{name}"), seed);
                let set = stages::model_predictions(&name, &model, &test_set)?;
                trained.push((name.clone(), model));
                (set, Vec::new())
            }
            ModelSpec::Heuristic => {
                let (set, traces) = stages::heuristic_predictions(&test_records)?;
                write_jsonl(&dir, "heuristic_traces.jsonl", &traces)?;
                (set, vec![stages::HEURISTIC_THRESHOLD_NOTE.to_string()])
            }
            ModelSpec::Replay { name: model } | ModelSpec::Live { name: model } => {
                let store = &config.replay_stores[model];
                let live = matches!(spec, ModelSpec::Live { .. }).then_some(config.live_command.as_slice());
                let client = make_client(model, store, live)?;
                let prompts =
                    stages::case_prompts(&test_records, &schema, rag_index.as_ref().map(|i| (i, config.rag_k)))?;
                let runner = runner(
                    &dir,
                    &name,
                    config.decoding.clone(),
                    config.k,
                    config.parallelism,
                    config.fixed_timestamp.as_deref(),
                )?;
                let (set, transcripts) =
                    stages::genai_predictions(&name, client.as_ref(), &test_records, &prompts, &runner)?;
                if live.is_none() {
                    manifest.record_input(store)?;
                }
                (set, stages::transcript_flags(&transcripts))
            }
        };
        dir.write_json(format!("predictions/{}.json", stages::file_stem(&name)), &set)?;
        manifest.record_stage(format!("predict {name}"));
        predictions.push((set, flags));
    }

    let base = EvalOptions {
        thresholds: config.thresholds.clone(),
        bins: config.bins,
        bootstrap_resamples: config.bootstrap,
        seed,
        schema_checksum: Some(schema.checksum().to_string()),
        flags: Vec::new(),
    };
    manifest.seeds.insert("bootstrap".into(), seed);
    for (set, flags) in &predictions {
        let options = EvalOptions { flags: flags.clone(), ..base.clone() };
        stages::evaluate_and_write(&dir, set, &options, formats)?;
        manifest.record_stage(format!("evaluate {}", set.model));
    }
    for (i, (a, _)) in predictions.iter().enumerate() {
        for (b, _) in &predictions[i + 1..] {
            stages::compare_and_write(&dir, a, b, &base, formats)?;
            manifest.record_stage(format!("compare {} {}", a.model, b.model));
        }
    }
    for (name, model) in &trained {
        stages::importance_and_write(&dir, name, model, &test_set, config.importance_repeats, seed)?;
        manifest.seeds.insert(format!("importance/{name}"), seed);
        manifest.record_stage(format!("importance {name}"));
    }
    if formats.json {
        stages::write_summary(&dir)?;
        manifest.record_stage("report");
    }
    dir.write_json(MANIFEST_FILE, &manifest)?;
    Ok(root)
}
