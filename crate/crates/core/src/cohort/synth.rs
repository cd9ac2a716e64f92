use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::record::{columns, PatientRecord, Sex};
use super::{CohortError, CohortSchema, Result};
use crate::heuristic::{predict_heuristic, DECISION_THRESHOLD};

/// Normal draw, rounded to the nearest integer and clamped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: u32,
    pub max: u32,
}

impl RoundedNormal {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let draw = Normal::new(self.mean, self.sd)
            .expect("validated")
            .sample(rng);
        draw.round().clamp(self.min as f64, self.max as f64) as u32
    }

    fn check(&self, column: &str, lo: u32, hi: u32) -> Result<()> {
        if !(self.sd.is_finite() && self.sd >= 0.0 && self.mean.is_finite()) {
            return Err(CohortError::Generator(format!("{column}: bad mean/sd")));
        }
        if self.min > self.max || self.min < lo || self.max > hi {
            return Err(CohortError::Generator(format!(
                "{column}: clamp [{}, {}] outside [{lo}, {hi}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Category labels with relative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeights(pub Vec<(String, f64)>);

impl CategoryWeights {
    fn new(pairs: &[(&str, f64)]) -> Self {
        CategoryWeights(pairs.iter().map(|&(l, w)| (l.to_string(), w)).collect())
    }

    fn check(&self, column: &str, schema: &CohortSchema) -> Result<WeightedIndex<f64>> {
        for (label, _) in &self.0 {
            schema
                .code(column, label)
                .map_err(|e| CohortError::Generator(e.to_string()))?;
        }
        WeightedIndex::new(self.0.iter().map(|(_, w)| *w))
            .map_err(|e| CohortError::Generator(format!("{column}: {e}")))
    }
}

/// Size of the default synthetic cohort.
pub const DEFAULT_COHORT_SIZE: usize = 524;
/// Seed used for the default cohort, split and model.
pub const DEFAULT_SEED: u64 = 7;

/// Latent outcome: success with probability
/// `sigmoid(intercept + slope · (Δ − 9))` where Δ is the heuristic's adjusted
/// improvement. The follow-up total is then drawn to agree with the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub intercept: f64,
    pub slope: f64,
    /// Spread of the realised reduction around Δ for responders.
    pub responder_sd: f64,
    pub non_responder_mean: f64,
    pub non_responder_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub snot22_baseline: RoundedNormal,
    pub ct_total: RoundedNormal,
    pub endoscopy_total: RoundedNormal,
    pub age: RoundedNormal,
    pub male_rate: f64,
    /// Prevalence of each boolean column, keyed by canonical column name.
    pub flag_rates: BTreeMap<String, f64>,
    pub insurance: CategoryWeights,
    pub income: CategoryWeights,
    pub race: CategoryWeights,
    pub outcome: OutcomeModel,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let flag_rates = [
            (columns::CRS_POLYPS, 0.35),
            (columns::PREVIOUS_SURGERY, 0.3),
            (columns::ALLERGY_TESTING, 0.5),
            (columns::SEPTAL_DEVIATION, 0.3),
            (columns::DEPRESSION, 0.2),
            (columns::FIBROMYALGIA, 0.05),
            (columns::SMOKER, 0.15),
            (columns::COPD, 0.05),
            (columns::ASTHMA, 0.2),
            (columns::OSA, 0.15),
            (columns::DIABETES, 0.1),
            (columns::GERD, 0.2),
            (columns::ASA_INTOLERANCE, 0.08),
        ]
        .into_iter()
        .map(|(c, r)| (c.to_string(), r))
        .collect();
        GeneratorConfig {
            snot22_baseline: RoundedNormal { mean: 50.0, sd: 20.0, min: 9, max: 110 },
            ct_total: RoundedNormal { mean: 12.0, sd: 5.0, min: 0, max: 24 },
            endoscopy_total: RoundedNormal { mean: 7.0, sd: 4.0, min: 0, max: 20 },
            age: RoundedNormal { mean: 50.0, sd: 14.0, min: 18, max: 90 },
            male_rate: 0.5,
            flag_rates,
            insurance: CategoryWeights::new(&[
                ("Uninsured", 0.04),
                ("Medicaid", 0.14),
                ("Medicare", 0.25),
                ("Private", 0.57),
            ]),
            income: CategoryWeights::new(&[
                ("<25k", 0.15),
                ("25-50k", 0.22),
                ("50-75k", 0.23),
                ("75-100k", 0.18),
                (">100k", 0.22),
            ]),
            race: CategoryWeights::new(&[
                ("White", 0.78),
                ("Black", 0.1),
                ("Asian", 0.05),
                ("American Indian or Alaska Native", 0.01),
                ("Native Hawaiian or Pacific Islander", 0.01),
                ("Multiracial", 0.03),
                ("Other", 0.02),
            ]),
            outcome: OutcomeModel {
                intercept: 1.5,
                slope: 1.0,
                responder_sd: 6.0,
                non_responder_mean: 2.0,
                non_responder_sd: 5.0,
            },
        }
    }
}

/// Draws `n` labelled synthetic records. Identical `(n, seed, config)` gives
/// identical output.
pub fn generate_synthetic(
    n: usize,
    seed: u64,
    config: &GeneratorConfig,
    schema: &CohortSchema,
) -> Result<Vec<PatientRecord>> {
    if n == 0 {
        return Err(CohortError::Generator("n must be at least 1".into()));
    }
    config.snot22_baseline.check(columns::SNOT22_BASELINE, 0, 110)?;
    config.ct_total.check(columns::CT_TOTAL, 0, 24)?;
    config.endoscopy_total.check(columns::ENDOSCOPY_TOTAL, 0, 20)?;
    config.age.check(columns::AGE, 18, 120)?;
    let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
    if !rate_ok(config.male_rate) {
        return Err(CohortError::Generator("male_rate outside [0, 1]".into()));
    }
    for column in columns::FLAGS {
        match config.flag_rates.get(column) {
            Some(&r) if rate_ok(r) => {}
            Some(_) => {
                return Err(CohortError::Generator(format!("{column}: rate outside [0, 1]")))
            }
            None => return Err(CohortError::Generator(format!("{column}: no rate"))),
        }
    }
    let o = config.outcome;
    if ![o.intercept, o.slope, o.responder_sd, o.non_responder_mean, o.non_responder_sd]
        .iter()
        .all(|v| v.is_finite())
        || o.responder_sd < 0.0
        || o.non_responder_sd < 0.0
    {
        return Err(CohortError::Generator("outcome model parameters".into()));
    }
    let insurance = config.insurance.check(columns::INSURANCE, schema)?;
    let income = config.income.check(columns::INCOME, schema)?;
    let race = config.race.check(columns::RACE, schema)?;
    let responder = Normal::new(0.0, o.responder_sd).expect("checked");
    let non_responder = Normal::new(o.non_responder_mean, o.non_responder_sd).expect("checked");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = PatientRecord::example(&format!("SYN{i:05}"));
        r.snot22_baseline = config.snot22_baseline.sample(&mut rng);
        r.ct_total = config.ct_total.sample(&mut rng);
        r.endoscopy_total = config.endoscopy_total.sample(&mut rng);
        r.age = config.age.sample(&mut rng);
        r.sex = if rng.gen_bool(config.male_rate) { Sex::Male } else { Sex::Female };
        for column in columns::FLAGS {
            *r.flag_mut(column).expect("flag column") = rng.gen_bool(config.flag_rates[column]);
        }
        r.insurance = config.insurance.0[insurance.sample(&mut rng)].0.clone();
        r.income_bracket = config.income.0[income.sample(&mut rng)].0.clone();
        r.race = config.race.0[race.sample(&mut rng)].0.clone();

        let delta = predict_heuristic(&r).adjusted_improvement;
        let p = 1.0 / (1.0 + (-(o.intercept + o.slope * (delta - DECISION_THRESHOLD))).exp());
        let success = rng.gen_bool(p.clamp(0.0, 1.0));
        let baseline = r.snot22_baseline as i64;
        let reduction = if success && baseline >= 9 {
            ((delta + responder.sample(&mut rng)).round() as i64).clamp(9, baseline)
        } else {
            let draw = non_responder.sample(&mut rng).round() as i64;
            draw.clamp(baseline - 110, baseline.min(8))
        };
        r.snot22_6mo = Some((baseline - reduction) as u32);
        if let Some(column) = r.range_violation() {
            return Err(CohortError::Generator(format!("generated {column} out of range")));
        }
        records.push(r);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{label_of, serialize_cohort};

    #[test]
    fn single_record_is_valid() {
        let schema = CohortSchema::canonical();
        let r = generate_synthetic(1, 0, &GeneratorConfig::default(), &schema).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].range_violation().is_none());
        assert!(label_of(&r[0]).is_some());
    }

    #[test]
    fn byte_identical_for_same_seed() {
        let schema = CohortSchema::canonical();
        let cfg = GeneratorConfig::default();
        let a = serialize_cohort(&generate_synthetic(200, 5, &cfg, &schema).unwrap()).unwrap();
        let b = serialize_cohort(&generate_synthetic(200, 5, &cfg, &schema).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serialize_cohort(&generate_synthetic(200, 6, &cfg, &schema).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_parameters_fail_at_generation() {
        let schema = CohortSchema::canonical();
        let mut cfg = GeneratorConfig::default();
        cfg.ct_total.max = 30;
        assert!(generate_synthetic(5, 0, &cfg, &schema).is_err());
        let mut cfg = GeneratorConfig::default();
        cfg.age.min = 10;
        assert!(generate_synthetic(5, 0, &cfg, &schema).is_err());
        let mut cfg = GeneratorConfig::default();
        cfg.race.0.push(("Martian".into(), 0.1));
        assert!(generate_synthetic(5, 0, &cfg, &schema).is_err());
        assert!(generate_synthetic(0, 0, &GeneratorConfig::default(), &schema).is_err());
    }
}
