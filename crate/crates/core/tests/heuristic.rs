use proptest::prelude::*;
use sinusbench::heuristic::{confidence_band, penalty_multipliers, severity_multipliers};
use sinusbench::{predict_heuristic, Confidence, PatientRecord};

const PENALTY_FLAGS: [&str; 10] = [
    "depression",
    "fibromyalgia",
    "smoker",
    "copd",
    "asthma",
    "osa",
    "diabetes",
    "gerd",
    "asa_intolerance",
    "previous_surgery",
];

fn set_flag(r: &mut PatientRecord, name: &str, on: bool) {
    let slot = match name {
        "depression" => &mut r.depression,
        "fibromyalgia" => &mut r.fibromyalgia,
        "smoker" => &mut r.smoker,
        "copd" => &mut r.copd,
        "asthma" => &mut r.asthma,
        "osa" => &mut r.osa,
        "diabetes" => &mut r.diabetes,
        "gerd" => &mut r.gerd,
        "asa_intolerance" => &mut r.asa_intolerance,
        "previous_surgery" => &mut r.previous_surgery,
        _ => unreachable!(),
    };
    *slot = on;
}

fn record() -> impl Strategy<Value = PatientRecord> {
    (0u32..=110, 0u32..=20, 0u32..=24, 18u32..95, any::<bool>(), prop::collection::vec(any::<bool>(), 10)).prop_map(
        |(snot, endo, ct, age, polyps, flags)| {
            let mut r = PatientRecord::example("p");
            r.snot22_baseline = snot;
            r.endoscopy_total = endo;
            r.ct_total = ct;
            r.age = age;
            r.crs_polyps = polyps;
            for (name, on) in PENALTY_FLAGS.iter().zip(flags) {
                set_flag(&mut r, name, on);
            }
            r
        },
    )
}

fn names(factors: &[sinusbench::heuristic::Factor]) -> Vec<(&str, f64)> {
    factors.iter().map(|f| (f.name.as_str(), f.multiplier)).collect()
}

#[test]
fn severity_brackets_at_their_boundaries() {
    assert_eq!(
        names(&severity_multipliers(60, 8, 10, true)),
        [("snot", 1.1), ("endo", 1.0), ("ct", 1.0), ("polyps", 1.05)]
    );
    assert_eq!(names(&severity_multipliers(25, 4, 7, false)), [("snot", 0.7), ("endo", 0.9), ("ct", 1.0)]);
    assert_eq!(names(&severity_multipliers(24, 3, 6, false)), [("snot", 0.5), ("endo", 0.8), ("ct", 0.85)]);
}

#[test]
fn penalties_compose() {
    let mut r = PatientRecord::example("p");
    assert!(penalty_multipliers(&r).is_empty());
    r.depression = true;
    r.smoker = true;
    r.age = 70;
    let p = penalty_multipliers(&r);
    assert_eq!(names(&p), [("depression", 0.7), ("smoker", 0.85), ("age65", 0.9)]);
    let product: f64 = p.iter().map(|f| f.multiplier).product();
    assert!((product - 0.5355).abs() < 1e-12);
    r.age = 65;
    assert!(names(&penalty_multipliers(&r)).contains(&("age65", 0.9)));
}

#[test]
fn worked_examples() {
    let mut r = PatientRecord::example("a");
    r.snot22_baseline = 60;
    r.endoscopy_total = 8;
    r.ct_total = 10;
    r.crs_polyps = true;
    let p = predict_heuristic(&r);
    assert!((p.base_improvement - 27.0).abs() < 1e-12);
    assert!((p.adjusted_improvement - 31.185).abs() < 1e-9);
    assert!((p.predicted_6mo - 28.815).abs() < 1e-9);
    assert_eq!((p.label, p.confidence), (1, Confidence::VeryConfident));

    let mut r = PatientRecord::example("b");
    r.snot22_baseline = 20;
    r.endoscopy_total = 2;
    r.ct_total = 5;
    r.depression = true;
    r.smoker = true;
    let p = predict_heuristic(&r);
    let by_hand = 9.0 * 0.5 * 0.8 * 0.85 * 0.7 * 0.85;
    assert!((p.adjusted_improvement - by_hand).abs() < 1e-12);
    assert_eq!((p.label, p.confidence), (0, Confidence::Neutral));

    let mut r = PatientRecord::example("c");
    r.snot22_baseline = 0;
    let p = predict_heuristic(&r);
    assert_eq!((p.adjusted_improvement, p.label, p.confidence), (0.0, 0, Confidence::Neutral));
}

#[test]
fn confidence_band_edges() {
    assert_eq!(confidence_band(31.185), Confidence::VeryConfident);
    assert_eq!(confidence_band(9.0), Confidence::NotAtAllConfident);
    assert_eq!(confidence_band(19.0), Confidence::SomewhatConfident);
    assert_eq!(confidence_band(24.0), Confidence::VeryConfident);
    assert_eq!(confidence_band(15.0), Confidence::Neutral);
    assert_eq!(confidence_band(12.0), Confidence::SomewhatUnsure);
    assert_eq!(confidence_band(11.999), Confidence::NotAtAllConfident);
}

#[test]
fn follow_up_score_is_ignored() {
    let mut r = PatientRecord::example("f");
    let before = predict_heuristic(&r);
    r.snot22_6mo = Some(3);
    assert_eq!(predict_heuristic(&r), before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn trace_is_sound(r in record()) {
        let p = predict_heuristic(&r);
        let product: f64 = p.factor_trace.iter().map(|f| f.multiplier).product();
        prop_assert!((p.base_improvement * product - p.adjusted_improvement).abs() <= 1e-12);
        let allowed = [0.5, 0.7, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2];
        prop_assert!(p.factor_trace.iter().all(|f| allowed.contains(&f.multiplier)));
        prop_assert_eq!(p.label == 1, p.adjusted_improvement > 9.0);
        prop_assert_eq!(p.predicted_6mo, (r.snot22_baseline as f64 - p.adjusted_improvement).max(0.0));
        prop_assert_eq!(p.confidence, confidence_band(p.adjusted_improvement));
    }

    #[test]
    fn predicted_follow_up_stays_above_bound(r in record()) {
        let p = predict_heuristic(&r);
        prop_assert!(p.predicted_6mo >= 0.3139 * r.snot22_baseline as f64);
    }

    #[test]
    fn penalties_never_raise_the_improvement(r in record(), which in 0usize..11) {
        let mut off = r.clone();
        let mut on = r;
        if which == 10 {
            off.age = 40;
            on.age = 70;
        } else {
            set_flag(&mut off, PENALTY_FLAGS[which], false);
            set_flag(&mut on, PENALTY_FLAGS[which], true);
        }
        let (a, b) = (predict_heuristic(&off), predict_heuristic(&on));
        prop_assert!(b.adjusted_improvement <= a.adjusted_improvement);
        prop_assert!(b.label <= a.label);
    }
}
