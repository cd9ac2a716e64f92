//! Single-step subcommands. Each one that takes `--run-dir` locks it, writes
//! only inside it and records its inputs and seeds in the manifest.

use std::path::Path;

use sinusbench::cohort::{generate_synthetic, label_of, serialize_cohort, CohortSchema, GeneratorConfig, PatientRecord};
use sinusbench::metrics::{EvalOptions, PredictionSet};
use sinusbench::models::TrainedModel;
use sinusbench::protocol::{
    AuditLog, CommandTransport, DecodingParams, FixedClock, LiveClient, ModelClient, ModelIdentity, ReplayClient,
    ReplayStore, TrialRunner,
};
use sinusbench::rag::{load_corpus, retrieve, Bm25Index, Bm25Params};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::rundir::RunDir;
use crate::stages::{self, Formats, Learner, Loss, TrainSettings, ENCODER_FILE, HEURISTIC, SPLIT_FILE};

fn prevalence_line(records: &[PatientRecord]) -> String {
    let positives = records.iter().filter(|r| label_of(r) == Some(1)).count();
    format!(
        "{} cases, {} reach the MCID ({:.1}%)",
        records.len(),
        positives,
        100.0 * positives as f64 / records.len().max(1) as f64
    )
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if args.n == 0 {
        return Err(CliError::validation("--n must be at least 1"));
    }
    if args.out.exists() && !args.force {
        return Err(CliError::validation(format!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        )));
    }
    let schema = stages::load_schema(args.schema.as_deref())?;
    let config = match &args.generator_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?
        }
        None => GeneratorConfig::default(),
    };
    let records = generate_synthetic(args.n, args.seed, &config, &schema)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, serialize_cohort(&records)?)?;
    println!("{}: {}", args.out.display(), prevalence_line(&records));
    Ok(())
}

/// Loads schema and cohort for a run-dir command and records both inputs.
fn open_with_cohort(io: &CohortArgs) -> Result<(RunDir, CohortSchema, stages::LoadedCohort)> {
    let dir = RunDir::open(&io.run_dir)?;
    let schema = stages::load_schema(io.schema.as_deref())?;
    let cohort = stages::load_cohort(&io.cohort, &schema)?;
    Ok((dir, schema, cohort))
}

fn record_inputs(dir: &RunDir, stage: &str, schema: &CohortSchema, inputs: &[&Path], seeds: &[(&str, u64)]) -> Result<()> {
    dir.update_manifest(|m| {
        m.schema_checksum = Some(schema.checksum().to_string());
        for p in inputs {
            m.record_input(p)?;
        }
        for (k, v) in seeds {
            m.seeds.insert(k.to_string(), *v);
        }
        m.record_stage(stage);
        Ok(())
    })
}

pub fn preprocess(args: &PreprocessArgs) -> Result<()> {
    let (dir, schema, cohort) = open_with_cohort(&args.io)?;
    let (split, encoder) = stages::preprocess(&cohort.records, &schema, args.test_fraction, args.seed)?;
    dir.write_json(SPLIT_FILE, &split)?;
    dir.write_json(ENCODER_FILE, &encoder.state())?;
    dir.write_json(
        "rejections.json",
        &serde_json::json!({ "rejections": cohort.rejections, "unlabeled": cohort.unlabeled }),
    )?;
    record_inputs(&dir, "preprocess", &schema, &[&args.io.cohort], &[("split", args.seed)])?;
    println!(
        "train {} / test {} (prevalence {:.3} / {:.3}); {} row(s) rejected, {} unlabelled",
        split.train_ids.len(),
        split.test_ids.len(),
        split.label_prevalence_train,
        split.label_prevalence_test,
        cohort.rejections.len(),
        cohort.unlabeled.len()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let (dir, schema, cohort) = open_with_cohort(&args.io)?;
    let (split, encoder) = stages::load_preprocessed(&dir, &schema)?;
    let train_set = encoder.encode_labeled(&split.train(&cohort.records))?;
    let learner = match args.model {
        ModelArg::Mlp => Learner::Mlp,
        ModelArg::Logreg => Learner::Logreg,
        ModelArg::Gnb => Learner::Gnb,
    };
    let loss = match args.loss {
        LossArg::Weighted => Loss::Weighted,
        LossArg::Focal => Loss::Focal,
    };
    let mut settings = TrainSettings { hidden_units: args.hidden_units, ..TrainSettings::default() };
    settings.optimizer.max_epochs = args.epochs;
    let model = stages::train(learner, loss, &train_set, &settings, args.seed, &schema)?;
    let name = args.name.clone().unwrap_or_else(|| format!("{:?}", learner).to_lowercase());
    let stem = stages::file_stem(&name);
    dir.write(format!("models/{stem}.json"), model.to_json())?;
    record_inputs(&dir, &format!("train {name}"), &schema, &[&args.io.cohort], &[(&format!("train/{name}"), args.seed)])?;
    println!("trained {name} on {} cases ({} iterations)", train_set.len(), model.metadata.iterations);
    Ok(())
}

fn load_model(dir: &RunDir, name: &str, schema: &CohortSchema) -> Result<TrainedModel> {
    let path = dir.path(format!("models/{}.json", stages::file_stem(name)))?;
    if !path.exists() {
        return Err(CliError::validation(format!("no trained model `{name}` in {}", dir.root().display())));
    }
    Ok(TrainedModel::load(&path, schema.checksum())?)
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (dir, schema, cohort) = open_with_cohort(&args.io)?;
    let (split, encoder) = stages::load_preprocessed(&dir, &schema)?;
    let test = stages::test_records(&split, &cohort.records)?;
    let set = if args.model == HEURISTIC {
        let (set, traces) = stages::heuristic_predictions(&test)?;
        write_jsonl(&dir, "heuristic_traces.jsonl", &traces)?;
        set
    } else {
        let model = load_model(&dir, &args.model, &schema)?;
        stages::model_predictions(&args.model, &model, &encoder.encode_labeled(&test)?)?
    };
    let path = dir.write_json(format!("predictions/{}.json", stages::file_stem(&args.model)), &set)?;
    record_inputs(&dir, &format!("predict {}", args.model), &schema, &[&args.io.cohort], &[])?;
    println!("{} predictions written to {}", set.len(), path.display());
    Ok(())
}

pub(crate) fn write_jsonl(dir: &RunDir, relative: &str, rows: &[serde_json::Value]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    dir.write(relative, text)?;
    Ok(())
}

/// Client for a registered model: replay from `store`, or a live command
/// transport that records every reply into `store`.
pub(crate) fn make_client(
    name: &str,
    store: &Path,
    live_command: Option<&[String]>,
) -> Result<Box<dyn ModelClient>> {
    let identity = ModelIdentity::registry(name)
        .ok_or_else(|| CliError::validation(format!("`{name}` is not a registered language model")))?;
    let store = ReplayStore::open(store)?;
    Ok(match live_command {
        None => {
            if !store.dir().is_dir() {
                return Err(CliError::validation(format!("replay store {} not found", store.dir().display())));
            }
            Box::new(ReplayClient::new(identity, store))
        }
        Some([program, args @ ..]) => Box::new(
            LiveClient::new(identity, CommandTransport { program: program.clone(), args: args.to_vec() })
                .recording_to(store),
        ),
        Some([]) => return Err(CliError::validation("live mode needs a command")),
    })
}

pub(crate) fn runner(
    dir: &RunDir,
    name: &str,
    decoding: DecodingParams,
    k: usize,
    parallelism: usize,
    fixed_timestamp: Option<&str>,
) -> Result<TrialRunner> {
    let relative = format!("transcripts/{}.jsonl", stages::file_stem(name));
    dir.remove(&relative)?;
    let path = dir.path(&relative)?;
    std::fs::create_dir_all(path.parent().expect("has parent"))?;
    let mut runner = TrialRunner::new(decoding, k);
    runner.audit = Some(AuditLog::open(path)?);
    runner.parallelism = parallelism;
    if let Some(t) = fixed_timestamp {
        runner.clock = Box::new(FixedClock(t.to_string()));
    }
    Ok(runner)
}

pub fn genai(args: &GenaiArgs) -> Result<()> {
    let (dir, schema, cohort) = open_with_cohort(&args.io)?;
    let records = match args.cases {
        CaseSelection::Test => {
            let (split, _) = stages::load_preprocessed(&dir, &schema)?;
            stages::test_records(&split, &cohort.records)?
        }
        CaseSelection::All => cohort.records.clone(),
    };
    let decoding = DecodingParams {
        temperature: args.temperature,
        top_p: args.top_p,
        max_tokens: args.max_tokens,
        seed: None,
    };
    decoding.validate()?;
    let index = match &args.corpus {
        Some(p) => Some(Bm25Index::build(load_corpus(p)?, Bm25Params::default())?),
        None => None,
    };
    let prompts = stages::case_prompts(&records, &schema, index.as_ref().map(|i| (i, args.rag_k)))?;
    let command: Option<Vec<String>> = match args.mode {
        GenaiMode::Replay => None,
        GenaiMode::Live => {
            let program = args
                .command
                .clone()
                .ok_or_else(|| CliError::validation("--mode live needs --command"))?;
            Some(std::iter::once(program).chain(args.command_arg.iter().cloned()).collect())
        }
    };
    let client = make_client(&args.model_name, &args.store, command.as_deref())?;
    let name = args.model_name.to_lowercase();
    let runner = runner(&dir, &name, decoding, args.k, args.parallelism, args.fixed_timestamp.as_deref())?;
    let (set, transcripts) = stages::genai_predictions(&name, client.as_ref(), &records, &prompts, &runner)?;
    dir.write_json(format!("predictions/{}.json", stages::file_stem(&name)), &set)?;
    let mut inputs: Vec<&Path> = vec![&args.io.cohort];
    if let Some(c) = &args.corpus {
        inputs.push(c);
    }
    if args.mode == GenaiMode::Replay {
        inputs.push(&args.store);
    }
    record_inputs(&dir, &format!("genai {name}"), &schema, &inputs, &[])?;
    for flag in stages::transcript_flags(&transcripts) {
        println!("note: {flag}");
    }
    let cm = set.confusion();
    println!("{name}: {} cases, [TN {}, FP {}; FN {}, TP {}]", set.len(), cm.tn, cm.fp, cm.fn_, cm.tp);
    Ok(())
}

pub fn rag_build(args: &RagBuildArgs) -> Result<()> {
    let dir = RunDir::open(&args.run_dir)?;
    let index = Bm25Index::build(load_corpus(&args.corpus)?, Bm25Params::default())?;
    let mut terms: Vec<&str> = index.vocabulary().collect();
    terms.sort_unstable();
    let df: std::collections::BTreeMap<&str, usize> = terms.iter().map(|t| (*t, index.document_frequency(t))).collect();
    dir.write_json(
        "rag/index.json",
        &serde_json::json!({
            "passages": index.passages().iter().map(|p| &p.passage_id).collect::<Vec<_>>(),
            "average_doc_length": index.average_doc_length(),
            "document_frequency": df,
        }),
    )?;
    if let Some(query) = &args.query {
        let hits = retrieve(&index, query, args.k)?;
        dir.write_json("rag/retrieval.json", &hits)?;
        for h in &hits.hits {
            println!("{:.4}\t{}\t{}", h.score, h.passage.passage_id, h.passage.source_tag);
        }
        if hits.short_corpus {
            println!("note: corpus has fewer than {} passages", args.k);
        }
    }
    dir.update_manifest(|m| {
        m.record_input(&args.corpus)?;
        m.record_stage("rag-build");
        Ok(())
    })?;
    println!("indexed {} passages, {} distinct terms", index.len(), df.len());
    Ok(())
}

fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let set: PredictionSet =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    set.validate()?;
    Ok(set)
}

fn eval_options(flags: &EvalFlags) -> EvalOptions {
    let mut options = EvalOptions { bins: flags.bins, bootstrap_resamples: flags.bootstrap, seed: flags.seed, ..EvalOptions::default() };
    if let Some(t) = &flags.thresholds {
        options.thresholds = t.clone();
    }
    options
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let dir = RunDir::open(&args.run_dir)?;
    let set = read_predictions(&args.predictions)?;
    let mut options = eval_options(&args.eval);
    options.flags = args.flag.clone();
    if set.model == HEURISTIC && !options.flags.iter().any(|f| f == stages::HEURISTIC_THRESHOLD_NOTE) {
        options.flags.push(stages::HEURISTIC_THRESHOLD_NOTE.into());
    }
    let report = stages::evaluate_and_write(&dir, &set, &options, Formats::default())?;
    dir.update_manifest(|m| {
        m.record_input(&args.predictions)?;
        m.seeds.insert(format!("evaluate/{}", set.model), args.eval.seed);
        m.record_stage(format!("evaluate {}", set.model));
        Ok(())
    })?;
    print!("{}", report.to_markdown());
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let dir = RunDir::open(&args.run_dir)?;
    let a = read_predictions(&args.a)?;
    let b = read_predictions(&args.b)?;
    let report = stages::compare_and_write(&dir, &a, &b, &eval_options(&args.eval), Formats::default())?;
    dir.update_manifest(|m| {
        m.record_input(&args.a)?;
        m.record_input(&args.b)?;
        m.seeds.insert(format!("compare/{}_vs_{}", a.model, b.model), args.eval.seed);
        m.record_stage(format!("compare {} {}", a.model, b.model));
        Ok(())
    })?;
    print!("{}", report.to_markdown());
    Ok(())
}

pub fn importance(args: &ImportanceArgs) -> Result<()> {
    let (dir, schema, cohort) = open_with_cohort(&args.io)?;
    let (split, encoder) = stages::load_preprocessed(&dir, &schema)?;
    let model = load_model(&dir, &args.model, &schema)?;
    let test = encoder.encode_labeled(&stages::test_records(&split, &cohort.records)?)?;
    let rows = stages::importance_and_write(&dir, &args.model, &model, &test, args.repeats, args.seed)?;
    record_inputs(&dir, &format!("importance {}", args.model), &schema, &[&args.io.cohort], &[(&format!("importance/{}", args.model), args.seed)])?;
    for r in rows.iter().take(5) {
        println!("{:<20} {:+.4} (sd {:.4})", r.feature, r.mean_delta_balanced_accuracy, r.sd);
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let dir = RunDir::open(&args.run_dir)?;
    let rows = stages::write_summary(&dir)?;
    dir.update_manifest(|m| {
        m.record_stage("report");
        Ok(())
    })?;
    println!("summarised {} report(s) into {}", rows.len(), dir.path("summary.md")?.display());
    Ok(())
}
