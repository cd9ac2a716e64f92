use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::erf::erfc;

use super::{auroc, check_binary, check_same_len, class_counts, MetricsError, Result};

const Z_95: f64 = 1.959963984540054;

/// Two-sided normal p-value for a z statistic.
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    /// Variance of `auc_a − auc_b`.
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_95_diff: (f64, f64),
    /// Set when the variance is zero and the p-value is pinned to 1.
    pub degenerate: bool,
}

/// Placement values: for each positive the fraction of negatives it
/// outranks, for each negative the fraction of positives outranking it.
/// Ties count one half.
fn placements(labels: &[u8], scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut neg: Vec<f64> = labels.iter().zip(scores).filter(|(&y, _)| y == 0).map(|(_, &s)| s).collect();
    let mut pos: Vec<f64> = labels.iter().zip(scores).filter(|(&y, _)| y == 1).map(|(_, &s)| s).collect();
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);
    let below = |sorted: &[f64], x: f64| {
        let lt = sorted.partition_point(|&v| v < x);
        let le = sorted.partition_point(|&v| v <= x);
        lt as f64 + 0.5 * (le - lt) as f64
    };
    let v10 = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 1)
        .map(|(_, &s)| below(&neg, s) / neg.len() as f64)
        .collect();
    let v01 = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 0)
        .map(|(_, &s)| (pos.len() as f64 - below(&pos, s)) / pos.len() as f64)
        .collect();
    (v10, v01)
}

/// Sample covariance with an `n − 1` denominator.
fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

/// Paired comparison of two correlated AUCs on the same cases.
pub fn delong_test(labels: &[u8], scores_a: &[f64], scores_b: &[f64]) -> Result<DelongResult> {
    check_same_len(labels.len(), scores_a.len())?;
    check_same_len(labels.len(), scores_b.len())?;
    let auc_a = auroc(labels, scores_a)?;
    let auc_b = auroc(labels, scores_b)?;
    let (n0, n1) = class_counts(labels);
    let (v10a, v01a) = placements(labels, scores_a);
    let (v10b, v01b) = placements(labels, scores_b);
    let s10 = covariance(&v10a, &v10a) + covariance(&v10b, &v10b) - 2.0 * covariance(&v10a, &v10b);
    let s01 = covariance(&v01a, &v01a) + covariance(&v01b, &v01b) - 2.0 * covariance(&v01a, &v01b);
    let variance = (s10 / n1 as f64 + s01 / n0 as f64).max(0.0);
    let diff = auc_a - auc_b;
    if variance <= f64::EPSILON * f64::EPSILON {
        return Ok(DelongResult {
            auc_a,
            auc_b,
            variance: 0.0,
            z: 0.0,
            p_value: 1.0,
            ci_95_diff: (diff, diff),
            degenerate: true,
        });
    }
    let se = variance.sqrt();
    let z = diff / se;
    Ok(DelongResult {
        auc_a,
        auc_b,
        variance,
        z,
        p_value: normal_two_sided(z),
        ci_95_diff: (diff - Z_95 * se, diff + Z_95 * se),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
    NoDiscordantPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Cases model A gets right and model B gets wrong.
    pub b_count: u64,
    /// Cases model A gets wrong and model B gets right.
    pub c_count: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

/// Exact below 25 discordant pairs, continuity-corrected chi-square above.
pub const MCNEMAR_EXACT_BELOW: u64 = 25;

pub fn mcnemar(labels: &[u8], hard_a: &[u8], hard_b: &[u8]) -> Result<McNemarResult> {
    check_same_len(labels.len(), hard_a.len())?;
    check_same_len(labels.len(), hard_b.len())?;
    check_binary(labels)?;
    check_binary(hard_a)?;
    check_binary(hard_b)?;
    let (mut b, mut c) = (0u64, 0u64);
    for ((&y, &a), &bb) in labels.iter().zip(hard_a).zip(hard_b) {
        match (a == y, bb == y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    if n == 0 {
        return Ok(McNemarResult {
            b_count: 0,
            c_count: 0,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::NoDiscordantPairs,
        });
    }
    if n < MCNEMAR_EXACT_BELOW {
        let binom = Binomial::new(0.5, n).map_err(|e| MetricsError::InvalidInput(e.to_string()))?;
        let p = (2.0 * binom.cdf(b.min(c))).min(1.0);
        return Ok(McNemarResult {
            b_count: b,
            c_count: c,
            statistic: b.min(c) as f64,
            p_value: p,
            method: McNemarMethod::ExactBinomial,
        });
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let statistic = diff.max(0.0).powi(2) / n as f64;
    Ok(McNemarResult {
        b_count: b,
        c_count: c,
        statistic,
        // Upper tail of chi-square with one degree of freedom.
        p_value: erfc((statistic / 2.0).sqrt()),
        method: McNemarMethod::ChiSquareCorrected,
    })
}
