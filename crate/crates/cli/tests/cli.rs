use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sinusbench::cohort::CohortSchema;
use sinusbench::metrics::{ComparisonReport, EvaluationReport};
use sinusbench_cli::rundir::Manifest;
use sinusbench_cli::stages;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sinusbench"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().expect("binary runs");
    (out.status.code().expect("exited"), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixtures/claude")
}

fn synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("cohort-{n}-{seed}.csv"));
    run_ok(bin().args(["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out"]).arg(&out));
    out
}

#[test]
fn synth_writes_requested_rows_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(tmp.path(), 524, 7);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 525);

    let b = tmp.path().join("again.csv");
    run_ok(bin().args(["synth", "--n", "524", "--seed", "7", "--out"]).arg(&b));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (code, err) = exit_code(bin().args(["synth", "--n", "524", "--seed", "7", "--out"]).arg(&a));
    assert_eq!(code, 2);
    assert!(err.contains("--force"));
    run_ok(bin().args(["synth", "--n", "10", "--seed", "7", "--force", "--out"]).arg(&a));
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 11);

    let (code, _) = exit_code(bin().args(["synth", "--n", "0", "--seed", "7", "--out"]).arg(tmp.path().join("z.csv")));
    assert_eq!(code, 2);
}

#[test]
fn short_flags_are_not_accepted() {
    let (code, _) = exit_code(bin().args(["synth", "-n", "5", "--seed", "1", "--out", "x.csv"]));
    assert_eq!(code, 2);
}

#[test]
fn leakage_in_cohort_columns_or_schema_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = synth(tmp.path(), 120, 3);
    let rows: Vec<String> = std::fs::read_to_string(&cohort).unwrap().lines().map(String::from).collect();
    let mut leaky = vec![format!("{},FOLLOWUP_ENDO_SCORE", rows[0])];
    leaky.extend(rows[1..].iter().map(|r| format!("{r},3")));
    let leaky_path = tmp.path().join("leaky.csv");
    std::fs::write(&leaky_path, leaky.join("\n")).unwrap();

    let (code, err) = exit_code(
        bin().args(["run", "--seed", "1", "--models", "heuristic", "--out-dir"]).arg(tmp.path().join("runs")).arg("--cohort").arg(&leaky_path),
    );
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("FOLLOWUP_ENDO_SCORE"));

    let mut schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../data/schema/cohort_schema.v1.json")).unwrap();
    schema["features"].as_array_mut().unwrap().push("SNOT22_6MO_TOTAL".into());
    let schema_path = tmp.path().join("schema.json");
    std::fs::write(&schema_path, schema.to_string()).unwrap();
    let (code, err) = exit_code(
        bin().args(["preprocess", "--seed", "1", "--cohort"]).arg(&cohort).arg("--schema").arg(&schema_path).arg("--run-dir").arg(tmp.path().join("pre")),
    );
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("SNOT22_6MO_TOTAL"));
}

#[test]
fn missing_seed_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = exit_code(bin().args(["run", "--models", "heuristic", "--out-dir"]).arg(tmp.path()));
    assert_eq!(code, 2);
    assert!(err.contains("seed"));
}

#[test]
fn locked_run_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("locked");
    std::fs::create_dir_all(&run_dir).unwrap();
    std::fs::write(run_dir.join("run.lock"), "1").unwrap();
    let (code, err) = exit_code(bin().args(["report", "--run-dir"]).arg(&run_dir));
    assert_eq!(code, 2);
    assert!(err.contains("locked"));
}

#[test]
fn compare_fixture_reports_both_confusion_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("cmp");
    let f = fixture();
    run_ok(
        bin().args(["genai", "--mode", "replay", "--model-name", "claude", "--cases", "all"])
            .arg("--cohort").arg(f.join("cohort.csv"))
            .arg("--store").arg(f.join("replay"))
            .arg("--run-dir").arg(&run_dir),
    );
    run_ok(
        bin().args(["compare", "--bootstrap", "300"])
            .arg("--a").arg(f.join("mlp_predictions.json"))
            .arg("--b").arg(run_dir.join("predictions/claude.json"))
            .arg("--run-dir").arg(&run_dir),
    );
    let report: ComparisonReport = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("comparisons/mlp-reference_vs_claude.json")).unwrap(),
    )
    .unwrap();
    let cm = |r: &EvaluationReport| {
        let c = r.confusion_matrix;
        [c.tn, c.fp, c.fn_, c.tp]
    };
    assert_eq!(cm(&report.a), [9, 11, 5, 80]);
    assert_eq!(cm(&report.b), [6, 14, 3, 82]);
    let md = std::fs::read_to_string(run_dir.join("comparisons/mlp-reference_vs_claude.md")).unwrap();
    assert!(md.contains("[9,11; 5,80]") && md.contains("[6,14; 3,82]"));

    // A model against itself.
    let claude = run_dir.join("predictions/claude.json");
    run_ok(bin().args(["compare", "--bootstrap", "300"]).arg("--a").arg(&claude).arg("--b").arg(&claude).arg("--run-dir").arg(&run_dir));
    let same: ComparisonReport =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("comparisons/claude_vs_claude.json")).unwrap()).unwrap();
    assert_eq!(same.delong.unwrap().p_value, 1.0);
    assert_eq!(same.mcnemar.p_value, 1.0);
    for boot in [same.auroc_bootstrap, same.accuracy_bootstrap, same.balanced_accuracy_bootstrap] {
        assert_eq!(boot.unwrap().p_value, 1.0);
    }

    // Disjoint case ids.
    let mut other: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&claude).unwrap()).unwrap();
    for id in other["case_ids"].as_array_mut().unwrap() {
        *id = format!("X-{}", id.as_str().unwrap()).into();
    }
    let other_path = tmp.path().join("other.json");
    std::fs::write(&other_path, other.to_string()).unwrap();
    let (code, err) = exit_code(bin().args(["compare"]).arg("--a").arg(&claude).arg("--b").arg(&other_path).arg("--run-dir").arg(&run_dir));
    assert_eq!(code, 2);
    assert!(err.contains("same cases"));
}

#[test]
fn step_by_step_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = synth(tmp.path(), 300, 11);
    let run_dir = tmp.path().join("steps");
    let io = |cmd: &mut Command| {
        cmd.arg("--cohort").arg(&cohort).arg("--run-dir").arg(&run_dir);
    };
    let mut c = bin();
    c.args(["preprocess", "--seed", "5"]);
    io(&mut c);
    run_ok(&mut c);
    let mut c = bin();
    c.args(["train", "--model", "logreg", "--seed", "5"]);
    io(&mut c);
    run_ok(&mut c);
    for model in ["logreg", "heuristic"] {
        let mut c = bin();
        c.args(["predict", "--model", model]);
        io(&mut c);
        run_ok(&mut c);
        run_ok(
            bin().args(["evaluate", "--bootstrap", "200", "--predictions"])
                .arg(run_dir.join(format!("predictions/{model}.json")))
                .arg("--run-dir").arg(&run_dir),
        );
    }
    let mut c = bin();
    c.args(["importance", "--model", "logreg", "--repeats", "5"]);
    io(&mut c);
    run_ok(&mut c);
    run_ok(
        bin().args(["rag-build", "--query", "nasal polyps recurrence after surgery", "--k", "2", "--corpus"])
            .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/rag_corpus.json"))
            .arg("--run-dir").arg(&run_dir),
    );
    run_ok(bin().args(["report", "--run-dir"]).arg(&run_dir));

    for file in [
        "split.json",
        "encoder.json",
        "models/logreg.json",
        "reports/logreg.json",
        "reports/heuristic.md",
        "curves/logreg/roc.csv",
        "heuristic_traces.jsonl",
        "importance/logreg.json",
        "rag/retrieval.json",
        "summary.md",
    ] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }
    assert!(!run_dir.join("run.lock").exists());
    let heuristic: EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("reports/heuristic.json")).unwrap()).unwrap();
    assert!(heuristic.flags.iter().any(|f| f == stages::HEURISTIC_THRESHOLD_NOTE));
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds["split"], 5);
    assert!(manifest.stages.iter().any(|s| s == "train logreg"));
    assert!(manifest.inputs.contains_key(&cohort.display().to_string()));

    // Nothing outside the run directory besides the cohort we made.
    let mut top: Vec<String> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    top.sort();
    assert_eq!(top, ["cohort-300-11.csv", "steps"]);
}

#[cfg(unix)]
fn responder(dir: &Path) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join("responder.sh");
    std::fs::write(
        &path,
        r#"#!/bin/sh
req=$(cat)
score=$(printf '%s' "$req" | sed -n 's/.*SNOT22_BLN_TOTAL: \([0-9]*\).*/\1/p')
if [ "${score:-0}" -ge 35 ]; then
  printf 'High baseline burden.\nPREDICTION: 1\nCONFIDENCE: Somewhat confident\n'
else
  printf 'Low baseline burden.\nPREDICTION: 0\nCONFIDENCE: Neutral\n'
fi
"#,
    )
    .unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Records a store through the live command transport, then replays it:
/// three reports and a manifest, identical across reruns, and a missing
/// hash aborts with exit code 4 naming the hash.
#[cfg(unix)]
#[test]
fn full_run_with_replayed_language_model() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    let out = tmp.path().join("runs");
    let live = serde_json::json!({
        "seed": 7,
        "out_dir": out,
        "run_id": "record",
        "models": ["heuristic", "live:claude"],
        "live_command": [responder(tmp.path())],
        "replay_stores": { "claude": store },
        "k": 3,
        "bootstrap": 200,
    });
    let live_path = tmp.path().join("live.json");
    std::fs::write(&live_path, live.to_string()).unwrap();
    run_ok(bin().arg("run").arg("--config").arg(&live_path));
    assert_eq!(std::fs::read_dir(&store).unwrap().count(), 105);

    let config = serde_json::json!({
        "seed": 7,
        "out_dir": out,
        "models": ["mlp", "heuristic", "replay:claude"],
        "replay_stores": { "claude": store },
        "k": 3,
        "bootstrap": 200,
        "importance_repeats": 3,
        "fixed_timestamp": "2025-10-21T00:00:00Z",
    });
    let config_path = tmp.path().join("replay.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let first = run_ok(bin().arg("run").arg("--config").arg(&config_path).args(["--run-id", "first"]));
    let first_dir = PathBuf::from(String::from_utf8(first.stdout).unwrap().trim());
    run_ok(bin().arg("run").arg("--config").arg(&config_path).args(["--run-id", "second"]));
    let second_dir = out.join("second");

    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(first_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds["master"], 7);
    assert!(manifest.schema_checksum.is_some());
    assert!(manifest.inputs.contains_key(&store.display().to_string()));
    let mut reports: Vec<String> = std::fs::read_dir(first_dir.join("reports"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    reports.sort();
    assert_eq!(reports, ["claude.json", "heuristic.json", "mlp.json"]);
    for dir in ["reports", "comparisons", "predictions", "transcripts", "importance"] {
        for entry in std::fs::read_dir(first_dir.join(dir)).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                std::fs::read(first_dir.join(dir).join(&name)).unwrap(),
                std::fs::read(second_dir.join(dir).join(&name)).unwrap(),
                "{dir}/{name:?} differs between reruns"
            );
        }
    }

    // Same run id again needs --force.
    let (code, _) = exit_code(bin().arg("run").arg("--config").arg(&config_path).args(["--run-id", "first"]));
    assert_eq!(code, 2);
    run_ok(bin().arg("run").arg("--config").arg(&config_path).args(["--run-id", "first", "--force"]));

    // An empty store: the first test case's prompt is missing.
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let (code, err) = exit_code(
        bin().arg("run").arg("--config").arg(&config_path).args(["--run-id", "miss", "--models", "replay:claude", "--replay-store"]).arg(format!("claude={}", empty.display())),
    );
    assert_eq!(code, 4, "{err}");
    let schema = CohortSchema::canonical();
    let miss_dir = out.join("miss");
    let cohort = stages::load_cohort(&miss_dir.join("cohort.csv"), &schema).unwrap();
    let split: sinusbench::cohort::CohortSplit =
        serde_json::from_str(&std::fs::read_to_string(miss_dir.join("split.json")).unwrap()).unwrap();
    let prompts = stages::case_prompts(&stages::test_records(&split, &cohort.records).unwrap(), &schema, None).unwrap();
    assert!(err.contains(&prompts[0].1.hash), "{err}");
}
