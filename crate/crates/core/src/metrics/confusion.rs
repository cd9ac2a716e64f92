use serde::{Deserialize, Serialize};

use super::{check_same_len, MetricsError, Result};

/// Counts laid out `[tn, fp; fn, tp]`: class 0 is row 0, truth on rows,
/// prediction on columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        ConfusionMatrix { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn as_rows(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}; {},{}]", self.tn, self.fp, self.fn_, self.tp)
    }
}

pub fn confusion(labels: &[u8], hard_labels: &[u8]) -> Result<ConfusionMatrix> {
    check_same_len(labels.len(), hard_labels.len())?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(hard_labels) {
        match (y, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => return Err(MetricsError::InvalidInput(format!("non-binary pair ({y}, {p})"))),
        }
    }
    Ok(cm)
}

/// Per-class and aggregate threshold metrics. Ratios with a zero denominator
/// are reported as 0 and named in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub accuracy: f64,
    pub precision0: f64,
    pub recall0: f64,
    pub precision1: f64,
    pub recall1: f64,
    pub f1_pos: f64,
    /// Support-weighted mean of the two per-class F1 scores.
    pub f1_weighted: f64,
    pub balanced_accuracy: f64,
    pub undefined: Vec<String>,
}

pub fn threshold_metrics(cm: &ConfusionMatrix) -> Result<ThresholdMetrics> {
    let n = cm.total();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let mut undefined = Vec::new();
    let mut ratio = |name: &str, num: u64, den: u64| {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision0 = ratio("precision0", cm.tn, cm.tn + cm.fn_);
    let recall0 = ratio("recall0", cm.tn, cm.tn + cm.fp);
    let precision1 = ratio("precision1", cm.tp, cm.tp + cm.fp);
    let recall1 = ratio("recall1", cm.tp, cm.tp + cm.fn_);
    let f1_of = |p: f64, r: f64| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    let f1_pos = f1_of(precision1, recall1);
    if precision1 + recall1 == 0.0 {
        undefined.push("f1_pos".into());
    }
    let support0 = (cm.tn + cm.fp) as f64;
    let support1 = (cm.fn_ + cm.tp) as f64;
    let f1_weighted = (f1_of(precision0, recall0) * support0 + f1_pos * support1) / n as f64;
    Ok(ThresholdMetrics {
        accuracy: (cm.tn + cm.tp) as f64 / n as f64,
        precision0,
        recall0,
        precision1,
        recall1,
        f1_pos,
        f1_weighted,
        balanced_accuracy: (recall0 + recall1) / 2.0,
        undefined,
    })
}

/// Mean of the per-class recalls for hard predictions.
pub fn balanced_accuracy(labels: &[u8], hard_labels: &[u8]) -> Result<f64> {
    Ok(threshold_metrics(&confusion(labels, hard_labels)?)?.balanced_accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_predictions() {
        let cm = confusion(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(cm.as_rows(), [[1, 0], [0, 2]]);
    }

    #[test]
    fn treat_all_predictor() {
        let labels: Vec<u8> = (0..105).map(|i| u8::from(i >= 20)).collect();
        let cm = confusion(&labels, &[1; 105]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(0, 20, 0, 85));
        let m = threshold_metrics(&cm).unwrap();
        assert_eq!(m.recall0, 0.0);
        assert!(m.undefined.contains(&"precision0".to_string()));
        assert_eq!(m.balanced_accuracy, 0.5);
    }

    #[test]
    fn chatgpt_matrix() {
        let m = threshold_metrics(&ConfusionMatrix::new(5, 15, 7, 78)).unwrap();
        assert!((m.accuracy - 0.79).abs() <= 0.005);
        assert_eq!(m.recall0, 0.25);
        assert!((m.precision0 - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn medgpt_flags_zero_precision() {
        let m = threshold_metrics(&ConfusionMatrix::new(0, 20, 1, 84)).unwrap();
        assert_eq!(m.precision0, 0.0);
        assert_eq!(m.recall0, 0.0);
        // 0/1 is defined, just zero.
        assert!(!m.undefined.contains(&"precision0".to_string()));
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(confusion(&[0, 1], &[0]), Err(MetricsError::LengthMismatch(2, 1)));
    }

    proptest! {
        #[test]
        fn accuracy_round_trips_through_the_matrix(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200)) {
            let (labels, preds): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let cm = confusion(&labels, &preds).unwrap();
            let direct = labels.iter().zip(&preds).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64;
            prop_assert_eq!(cm.total() as usize, labels.len());
            prop_assert!((threshold_metrics(&cm).unwrap().accuracy - direct).abs() < 1e-15);
        }
    }
}
