use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    auroc, average_precision, balanced_accuracy, bootstrap_ci, brier, class_counts, delong_test, mcnemar,
    net_benefit, paired_bootstrap, pr_curve, reliability_curve, roc_curve, threshold_metrics, BootstrapCi,
    ConfusionMatrix, DelongResult, McNemarResult, MetricsError, NetBenefitPoint, PairedBootstrap, PrPoint,
    PredictionSet, ReliabilityBin, Result, RocPoint, ThresholdMetrics,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Threshold probabilities for the net-benefit curve.
    pub thresholds: Vec<f64>,
    pub bins: usize,
    /// Bootstrap resamples for confidence intervals; 0 skips them.
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub schema_checksum: Option<String>,
    /// Free-form notes copied into the report.
    pub flags: Vec<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            thresholds: (1..20).map(|i| i as f64 * 0.05).collect(),
            bins: 10,
            bootstrap_resamples: 2000,
            seed: 0,
            schema_checksum: None,
            flags: Vec::new(),
        }
    }
}

/// Headline numbers from a paired comparison, attached to each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub against: String,
    pub delong_p: Option<f64>,
    pub mcnemar_p: f64,
    pub auroc_diff_ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub n: usize,
    pub prevalence: f64,
    pub confusion_matrix: ConfusionMatrix,
    pub metrics: ThresholdMetrics,
    pub auroc: Option<f64>,
    pub average_precision: Option<f64>,
    pub brier: f64,
    pub reliability: Vec<ReliabilityBin>,
    pub net_benefit: Vec<NetBenefitPoint>,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    pub accuracy_ci: Option<BootstrapCi>,
    pub auroc_ci: Option<BootstrapCi>,
    pub paired: Option<PairedSummary>,
    pub schema_checksum: Option<String>,
    pub flags: Vec<String>,
}

fn accuracy_of(s: &PredictionSet) -> Result<f64> {
    let hits = s.labels.iter().zip(&s.hard_labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / s.len() as f64)
}

fn auroc_of(s: &PredictionSet) -> Result<f64> {
    auroc(&s.labels, &s.scores)
}

fn balanced_accuracy_of(s: &PredictionSet) -> Result<f64> {
    balanced_accuracy(&s.labels, &s.hard_labels)
}

/// Full single-model evaluation of one prediction set.
pub fn evaluate(set: &PredictionSet, options: &EvalOptions) -> Result<EvaluationReport> {
    set.validate()?;
    if set.is_empty() {
        return Err(MetricsError::Empty);
    }
    let cm = set.confusion();
    let metrics = threshold_metrics(&cm)?;
    let (n0, n1) = class_counts(&set.labels);
    let both = n0 > 0 && n1 > 0;
    let mut flags = options.flags.clone();
    flags.extend(metrics.undefined.iter().map(|m| format!("undefined ratio: {m}")));
    if !both {
        flags.push("single class: ranking metrics omitted".into());
    }
    let (accuracy_ci, auroc_ci) = if both && options.bootstrap_resamples > 0 {
        (
            Some(bootstrap_ci(accuracy_of, set, options.bootstrap_resamples, options.seed)?),
            Some(bootstrap_ci(auroc_of, set, options.bootstrap_resamples, options.seed)?),
        )
    } else {
        (None, None)
    };
    Ok(EvaluationReport {
        model: set.model.clone(),
        n: set.len(),
        prevalence: n1 as f64 / set.len() as f64,
        confusion_matrix: cm,
        metrics,
        auroc: both.then(|| auroc(&set.labels, &set.scores)).transpose()?,
        average_precision: (n1 > 0).then(|| average_precision(&set.labels, &set.scores)).transpose()?,
        brier: brier(&set.labels, &set.scores)?,
        reliability: reliability_curve(&set.labels, &set.scores, options.bins)?,
        net_benefit: net_benefit(&set.labels, &set.scores, &options.thresholds)?,
        roc: if both { roc_curve(&set.labels, &set.scores)? } else { Vec::new() },
        pr: if n1 > 0 { pr_curve(&set.labels, &set.scores)? } else { Vec::new() },
        accuracy_ci,
        auroc_ci,
        paired: None,
        schema_checksum: options.schema_checksum.clone(),
        flags,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metrics;
        let cm = &self.confusion_matrix;
        let mut out = String::new();
        let _ = writeln!(out, "# {}\n", self.model);
        let _ = writeln!(out, "Cases: {} (prevalence {:.3})\n", self.n, self.prevalence);
        let _ = writeln!(out, "| | pred 0 | pred 1 |\n|---|---|---|");
        let _ = writeln!(out, "| **true 0** | {} | {} |", cm.tn, cm.fp);
        let _ = writeln!(out, "| **true 1** | {} | {} |\n", cm.fn_, cm.tp);
        let _ = writeln!(out, "| metric | value |\n|---|---|");
        let rows = [
            ("accuracy", Some(m.accuracy)),
            ("precision (0)", Some(m.precision0)),
            ("recall (0)", Some(m.recall0)),
            ("precision (1)", Some(m.precision1)),
            ("recall (1)", Some(m.recall1)),
            ("F1 (positive class)", Some(m.f1_pos)),
            ("F1 (support-weighted)", Some(m.f1_weighted)),
            ("balanced accuracy", Some(m.balanced_accuracy)),
            ("AUROC", self.auroc),
            ("average precision", self.average_precision),
            ("Brier", Some(self.brier)),
        ];
        for (name, v) in rows {
            let _ = writeln!(out, "| {name} | {} |", fmt_opt(v));
        }
        for (name, ci) in [("accuracy", &self.accuracy_ci), ("AUROC", &self.auroc_ci)] {
            if let Some(ci) = ci {
                let _ = writeln!(out, "| {name} 95% CI | [{:.3}, {:.3}] |", ci.lo95, ci.hi95);
            }
        }
        if let Some(p) = &self.paired {
            let _ = writeln!(out, "\nPaired against `{}`: DeLong p {}, McNemar p {:.4}", p.against, fmt_opt(p.delong_p), p.mcnemar_p);
        }
        if let Some(c) = &self.schema_checksum {
            let _ = writeln!(out, "\nSchema checksum: `{c}`");
        }
        if !self.flags.is_empty() {
            let _ = writeln!(out, "\nFlags:\n");
            for f in &self.flags {
                let _ = writeln!(out, "- {f}");
            }
        }
        out
    }

    /// Writes `roc.csv`, `pr.csv`, `reliability.csv` and `net_benefit.csv`.
    pub fn write_curve_csvs(&self, dir: &Path) -> std::io::Result<()> {
        fn write<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
            let mut w = csv::Writer::from_path(path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()
        }
        std::fs::create_dir_all(dir)?;
        write(&dir.join("roc.csv"), &self.roc)?;
        write(&dir.join("pr.csv"), &self.pr)?;
        write(&dir.join("reliability.csv"), &self.reliability)?;
        write(&dir.join("net_benefit.csv"), &self.net_benefit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWinner {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Model name of the better side, or `"tie"`.
    pub winner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: EvaluationReport,
    pub b: EvaluationReport,
    pub delong: Option<DelongResult>,
    pub mcnemar: McNemarResult,
    pub auroc_bootstrap: Option<PairedBootstrap>,
    pub accuracy_bootstrap: Option<PairedBootstrap>,
    pub balanced_accuracy_bootstrap: Option<PairedBootstrap>,
    pub winners: Vec<MetricWinner>,
}

fn winner(metric: &str, a: Option<f64>, b: Option<f64>, names: (&str, &str), higher_is_better: bool) -> MetricWinner {
    let w = match (a, b) {
        (Some(x), Some(y)) if (x - y).abs() < 1e-12 => "tie".to_string(),
        (Some(x), Some(y)) => {
            if (x > y) == higher_is_better { names.0.to_string() } else { names.1.to_string() }
        }
        _ => "n/a".to_string(),
    };
    MetricWinner { metric: metric.to_string(), a, b, winner: w }
}

/// Head-to-head comparison of two models on the same cases.
pub fn compare(a: &PredictionSet, b: &PredictionSet, options: &EvalOptions) -> Result<ComparisonReport> {
    if a.case_ids != b.case_ids || a.labels != b.labels {
        return Err(MetricsError::CaseMismatch);
    }
    let mut ra = evaluate(a, options)?;
    let mut rb = evaluate(b, options)?;
    let (n0, n1) = class_counts(&a.labels);
    let both = n0 > 0 && n1 > 0;
    let delong = both.then(|| delong_test(&a.labels, &a.scores, &b.scores)).transpose()?;
    let mcnemar = mcnemar(&a.labels, &a.hard_labels, &b.hard_labels)?;
    let boot = |f: fn(&PredictionSet) -> Result<f64>| -> Result<Option<PairedBootstrap>> {
        if both && options.bootstrap_resamples > 0 {
            paired_bootstrap(f, a, b, options.bootstrap_resamples, options.seed).map(Some)
        } else {
            Ok(None)
        }
    };
    let auroc_bootstrap = boot(auroc_of)?;
    let accuracy_bootstrap = boot(accuracy_of)?;
    let balanced_accuracy_bootstrap = boot(balanced_accuracy_of)?;

    let names = (a.model.as_str(), b.model.as_str());
    let (ma, mb) = (&ra.metrics, &rb.metrics);
    let winners = vec![
        winner("accuracy", Some(ma.accuracy), Some(mb.accuracy), names, true),
        winner("balanced_accuracy", Some(ma.balanced_accuracy), Some(mb.balanced_accuracy), names, true),
        winner("f1_pos", Some(ma.f1_pos), Some(mb.f1_pos), names, true),
        winner("recall0", Some(ma.recall0), Some(mb.recall0), names, true),
        winner("recall1", Some(ma.recall1), Some(mb.recall1), names, true),
        winner("auroc", ra.auroc, rb.auroc, names, true),
        winner("average_precision", ra.average_precision, rb.average_precision, names, true),
        winner("brier", Some(ra.brier), Some(rb.brier), names, false),
    ];

    let summary = |against: &str, sign: f64| PairedSummary {
        against: against.to_string(),
        delong_p: delong.as_ref().map(|d| d.p_value),
        mcnemar_p: mcnemar.p_value,
        auroc_diff_ci: auroc_bootstrap.as_ref().map(|bt| {
            if sign > 0.0 { (bt.lo95, bt.hi95) } else { (-bt.hi95, -bt.lo95) }
        }),
    };
    ra.paired = Some(summary(&b.model, 1.0));
    rb.paired = Some(summary(&a.model, -1.0));
    Ok(ComparisonReport {
        a: ra,
        b: rb,
        delong,
        mcnemar,
        auroc_bootstrap,
        accuracy_bootstrap,
        balanced_accuracy_bootstrap,
        winners,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} vs {}\n", self.a.model, self.b.model);
        let _ = writeln!(
            out,
            "Confusion matrices `[tn, fp; fn, tp]`: {} = {}, {} = {}\n",
            self.a.model, self.a.confusion_matrix, self.b.model, self.b.confusion_matrix
        );
        if let Some(d) = &self.delong {
            let _ = writeln!(
                out,
                "DeLong: AUROC {:.3} vs {:.3}, z {:.3}, p {:.4}, 95% CI of difference [{:.3}, {:.3}]",
                d.auc_a, d.auc_b, d.z, d.p_value, d.ci_95_diff.0, d.ci_95_diff.1
            );
        }
        let m = &self.mcnemar;
        let _ = writeln!(out, "McNemar: b {}, c {}, p {:.4} ({:?})\n", m.b_count, m.c_count, m.p_value, m.method);
        for (name, bt) in [
            ("AUROC", &self.auroc_bootstrap),
            ("accuracy", &self.accuracy_bootstrap),
            ("balanced accuracy", &self.balanced_accuracy_bootstrap),
        ] {
            if let Some(bt) = bt {
                let _ = writeln!(out, "Bootstrap {name} difference {:.3}, 95% CI [{:.3}, {:.3}]", bt.diff_point, bt.lo95, bt.hi95);
            }
        }
        let _ = writeln!(out, "\n| metric | {} | {} | winner |\n|---|---|---|---|", self.a.model, self.b.model);
        for w in &self.winners {
            let _ = writeln!(out, "| {} | {} | {} | {} |", w.metric, fmt_opt(w.a), fmt_opt(w.b), w.winner);
        }
        out
    }
}
