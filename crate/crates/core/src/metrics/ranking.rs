use serde::{Deserialize, Serialize};

use super::{check_binary, check_same_len, class_counts, MetricsError, Result};

fn check_scores(scores: &[f64]) -> Result<()> {
    match scores.iter().find(|s| s.is_nan()) {
        Some(_) => Err(MetricsError::InvalidInput("NaN score".into())),
        None => Ok(()),
    }
}

/// Indices sorted by score, descending. Equal scores keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Runs of equal score in a descending order, as `(negatives, positives)`.
fn tied_groups(labels: &[u8], scores: &[f64]) -> Vec<(u64, u64)> {
    let order = descending(scores);
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last = None;
    for i in order {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().expect("pushed");
        if labels[i] == 1 {
            g.1 += 1;
        } else {
            g.0 += 1;
        }
    }
    groups
}

/// Area under the ROC curve in the tie-aware Mann-Whitney form
/// `(concordant + ½·tied) / (n0·n1)`.
///
/// The pair counts are accumulated as integers (doubled to keep the half
/// counts exact), so the result equals exhaustive pair counting exactly.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_same_len(labels.len(), scores.len())?;
    check_binary(labels)?;
    check_scores(scores)?;
    let (n0, n1) = class_counts(labels);
    if n0 == 0 {
        return Err(MetricsError::SingleClass(1));
    }
    if n1 == 0 {
        return Err(MetricsError::SingleClass(0));
    }
    // Walk from the lowest score upwards, counting negatives already passed.
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    for (neg, pos) in tied_groups(labels, scores).into_iter().rev() {
        doubled += pos as u128 * (2 * negatives_below + neg as u128);
        negatives_below += neg as u128;
    }
    Ok(doubled as f64 / (2 * n0 as u128 * n1 as u128) as f64)
}

/// Step-wise area under the precision-recall curve.
///
/// Cases with equal scores enter together, so each distinct score is one
/// operating point: `AP = Σ Δrecall · precision`.
pub fn average_precision(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_same_len(labels.len(), scores.len())?;
    check_binary(labels)?;
    check_scores(scores)?;
    let (_, positives) = class_counts(labels);
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut ap = 0.0;
    let (mut tp, mut seen) = (0u64, 0u64);
    for (neg, pos) in tied_groups(labels, scores) {
        tp += pos;
        seen += pos + neg;
        if pos > 0 {
            ap += (pos as f64 / positives as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// The first point sits at an infinite threshold, stored as `null`.
    #[serde(with = "infinite_as_null")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// ROC operating points for "predict 1 when score ≥ threshold", one per
/// distinct score, starting from (0, 0) at an infinite threshold.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<RocPoint>> {
    auroc(labels, scores)?;
    let (n0, n1) = class_counts(labels);
    let order = descending(scores);
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut fp, mut tp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 { tp += 1 } else { fp += 1 }
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            points.push(RocPoint {
                threshold: scores[i],
                fpr: fp as f64 / n0 as f64,
                tpr: tp as f64 / n1 as f64,
            });
        }
    }
    Ok(points)
}

/// Precision-recall operating points, one per distinct score.
pub fn pr_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<PrPoint>> {
    average_precision(labels, scores)?;
    let (_, n1) = class_counts(labels);
    let order = descending(scores);
    let mut points = Vec::new();
    let (mut seen, mut tp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        seen += 1;
        tp += usize::from(labels[i] == 1);
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            points.push(PrPoint {
                threshold: scores[i],
                recall: tp as f64 / n1 as f64,
                precision: tp as f64 / seen as f64,
            });
        }
    }
    Ok(points)
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        assert_eq!(auroc(&[1, 1, 0, 0], &[0.9, 0.8, 0.7, 0.6]).unwrap(), 1.0);
        assert_eq!(average_precision(&[1, 1, 0, 0], &[0.9, 0.8, 0.7, 0.6]).unwrap(), 1.0);
    }

    #[test]
    fn all_tied() {
        assert_eq!(auroc(&[1, 0, 1, 0, 1], &[0.5; 5]).unwrap(), 0.5);
        assert!((average_precision(&[1, 0, 1, 0, 1], &[0.5; 5]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn reversed_single_positive() {
        let ap = average_precision(&[0, 0, 0, 1], &[0.9, 0.8, 0.7, 0.1]).unwrap();
        assert!((ap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        assert_eq!(auroc(&[1, 1], &[0.1, 0.2]), Err(MetricsError::SingleClass(1)));
        assert_eq!(average_precision(&[0, 0], &[0.1, 0.2]), Err(MetricsError::NoPositives));
        assert!(auroc(&[1, 0], &[f64::NAN, 0.2]).is_err());
    }

    #[test]
    fn roc_curve_ends_at_one_one() {
        let pts = roc_curve(&[1, 0, 1, 0], &[0.9, 0.9, 0.4, 0.1]).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].tpr, 0.5);
        assert_eq!(pts[1].fpr, 0.5);
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        // Trapezoids over the curve reproduce the Mann-Whitney area.
        let area: f64 = pts.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        assert!((area - auroc(&[1, 0, 1, 0], &[0.9, 0.9, 0.4, 0.1]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn roc_points_round_trip_json() {
        let pts = roc_curve(&[1, 0], &[0.9, 0.1]).unwrap();
        let json = serde_json::to_string(&pts).unwrap();
        assert!(json.contains("null"));
        let back: Vec<RocPoint> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pts);
    }
}
