use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::paired::normal_two_sided;
use super::{class_counts, MetricsError, PredictionSet, Result};

/// Attempts per resample before a class-losing draw becomes an error.
pub const REDRAW_CAP: usize = 10;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub point: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub n_resamples: usize,
    /// Resamples discarded because they lost a class.
    pub redraws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    /// `metric(a) − metric(b)` on the full data.
    pub diff_point: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// Standard deviation of the resampled differences.
    pub se: f64,
    /// Two-sided normal p-value of `diff_point / se`.
    pub p_value: f64,
    pub n_resamples: usize,
    pub redraws: usize,
    pub seed: u64,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Case indices for resample `r`. Each resample has its own ChaCha stream,
/// so the result does not depend on evaluation order.
fn draw(labels: &[u8], seed: u64, r: usize) -> Result<(Vec<usize>, usize)> {
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    for attempt in 0..REDRAW_CAP {
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let (n0, n1) = class_counts(&idx.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        if n0 > 0 && n1 > 0 {
            return Ok((idx, attempt));
        }
    }
    Err(MetricsError::RedrawCapExceeded { cap: REDRAW_CAP })
}

fn check_resamples(n_resamples: usize, data: &PredictionSet) -> Result<()> {
    if n_resamples < MIN_RESAMPLES {
        return Err(MetricsError::InvalidInput(format!(
            "at least {MIN_RESAMPLES} resamples are required"
        )));
    }
    if data.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Case-level percentile bootstrap of `metric`. Resamples missing either
/// class are redrawn.
pub fn bootstrap_ci<F>(metric: F, data: &PredictionSet, n_resamples: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&PredictionSet) -> Result<f64>,
{
    check_resamples(n_resamples, data)?;
    let point = metric(data)?;
    let mut values = Vec::with_capacity(n_resamples);
    let mut redraws = 0;
    for r in 0..n_resamples {
        let (idx, extra) = draw(&data.labels, seed, r)?;
        redraws += extra;
        values.push(metric(&data.select(&idx))?);
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        point,
        lo95: quantile(&values, 0.025),
        hi95: quantile(&values, 0.975),
        n_resamples,
        redraws,
        seed,
    })
}

/// Paired bootstrap of `metric(a) − metric(b)`; both sets must cover the
/// same cases with the same labels, and resampling keeps the pairing.
pub fn paired_bootstrap<F>(
    metric: F,
    a: &PredictionSet,
    b: &PredictionSet,
    n_resamples: usize,
    seed: u64,
) -> Result<PairedBootstrap>
where
    F: Fn(&PredictionSet) -> Result<f64>,
{
    if a.case_ids != b.case_ids || a.labels != b.labels {
        return Err(MetricsError::CaseMismatch);
    }
    check_resamples(n_resamples, a)?;
    let diff_point = metric(a)? - metric(b)?;
    let mut diffs = Vec::with_capacity(n_resamples);
    let mut redraws = 0;
    for r in 0..n_resamples {
        let (idx, extra) = draw(&a.labels, seed, r)?;
        redraws += extra;
        diffs.push(metric(&a.select(&idx))? - metric(&b.select(&idx))?);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let se = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
    diffs.sort_by(f64::total_cmp);
    let p_value = if se > 0.0 {
        normal_two_sided(diff_point / se)
    } else {
        1.0
    };
    Ok(PairedBootstrap {
        diff_point,
        lo95: quantile(&diffs, 0.025),
        hi95: quantile(&diffs, 0.975),
        se,
        p_value,
        n_resamples,
        redraws,
        seed,
    })
}
