use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{label_of, CohortError, PatientRecord, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    pub seed: u64,
    pub test_fraction: f64,
    pub label_prevalence_train: f64,
    pub label_prevalence_test: f64,
}

impl CohortSplit {
    /// Records of `cohort` in the training partition, in cohort order.
    pub fn train(&self, cohort: &[PatientRecord]) -> Vec<PatientRecord> {
        pick(cohort, &self.train_ids)
    }

    pub fn test(&self, cohort: &[PatientRecord]) -> Vec<PatientRecord> {
        pick(cohort, &self.test_ids)
    }
}

fn pick(cohort: &[PatientRecord], ids: &BTreeSet<String>) -> Vec<PatientRecord> {
    cohort
        .iter()
        .filter(|r| ids.contains(&r.patient_id))
        .cloned()
        .collect()
}

/// Stratified train/test split.
///
/// The test partition holds `round(n · test_fraction)` cases. Per-class test
/// counts come from largest-remainder apportionment of that total, so each
/// class is within half a case of exact proportionality. Within a class the
/// cases are shuffled with a ChaCha8 stream seeded by `seed`.
pub fn stratified_split(
    cohort: &[PatientRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<CohortSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CohortError::BadFraction(test_fraction));
    }
    let mut by_class: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for r in cohort {
        let y = label_of(r).ok_or_else(|| CohortError::Unlabeled(r.patient_id.clone()))?;
        by_class[y as usize].push(&r.patient_id);
    }
    for (label, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(CohortError::ClassTooSmall {
                label: label as u8,
                count: members.len(),
            });
        }
    }

    let n = cohort.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let quotas: Vec<f64> = by_class
        .iter()
        .map(|m| m.len() as f64 * n_test as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut short = n_test - counts.iter().sum::<usize>();
    let mut order = [0usize, 1];
    // Larger remainder first; class 0 wins exact ties.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if short == 0 {
            break;
        }
        if counts[c] < by_class[c].len() {
            counts[c] += 1;
            short -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_ids = BTreeSet::new();
    let mut test_ids = BTreeSet::new();
    for (members, &take) in by_class.iter_mut().zip(&counts) {
        members.shuffle(&mut rng);
        for (i, id) in members.iter().enumerate() {
            if i < take {
                test_ids.insert(id.to_string());
            } else {
                train_ids.insert(id.to_string());
            }
        }
    }
    let prevalence = |ids: &BTreeSet<String>, positives: usize| positives as f64 / ids.len() as f64;
    let test_pos = counts[1];
    let train_pos = by_class[1].len() - test_pos;
    Ok(CohortSplit {
        label_prevalence_train: prevalence(&train_ids, train_pos),
        label_prevalence_test: prevalence(&test_ids, test_pos),
        train_ids,
        test_ids,
        seed,
        test_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(pos: usize, neg: usize) -> Vec<PatientRecord> {
        (0..pos + neg)
            .map(|i| {
                let mut r = PatientRecord::example(&format!("P{i:04}"));
                r.snot22_6mo = Some(if i < pos { 30 } else { 58 });
                r
            })
            .collect()
    }

    #[test]
    fn ten_balanced_cases() {
        let split = stratified_split(&cohort(5, 5), 0.2, 1).unwrap();
        assert_eq!(split.test_ids.len(), 2);
        assert_eq!(split.label_prevalence_test, 0.5);
    }

    #[test]
    fn default_sized_cohort_gives_105_test_cases() {
        let split = stratified_split(&cohort(425, 99), 0.2, 3).unwrap();
        assert_eq!(split.test_ids.len(), 105);
        assert_eq!(split.train_ids.len(), 419);
        assert!(split.train_ids.is_disjoint(&split.test_ids));
    }

    #[test]
    fn deterministic_for_seed() {
        let c = cohort(40, 12);
        let a = stratified_split(&c, 0.2, 9).unwrap();
        let b = stratified_split(&c, 0.2, 9).unwrap();
        assert_eq!(a, b);
        let other = stratified_split(&c, 0.2, 10).unwrap();
        assert_ne!(a.test_ids, other.test_ids);
    }

    #[test]
    fn tiny_class_cannot_be_stratified() {
        assert!(matches!(
            stratified_split(&cohort(10, 1), 0.2, 0),
            Err(CohortError::ClassTooSmall { label: 0, count: 1 })
        ));
    }

    #[test]
    fn unlabeled_records_are_refused() {
        let mut c = cohort(5, 5);
        c[0].snot22_6mo = None;
        assert!(matches!(stratified_split(&c, 0.2, 0), Err(CohortError::Unlabeled(_))));
    }

    #[test]
    fn bad_fraction() {
        assert!(stratified_split(&cohort(5, 5), 1.0, 0).is_err());
        assert!(stratified_split(&cohort(5, 5), 0.0, 0).is_err());
    }
}
