//! Regenerates `data/fixtures/claude/`: a 105-case cohort (20 non-responders,
//! 85 responders) and a replay store whose majority votes give the
//! confusion matrix [6,14; 3,82], plus a reference MLP prediction set on the
//! same cases with confusion matrix [9,11; 5,80].
//!
//! cargo run -p sinusbench --example build_claude_fixture -- data/fixtures/claude

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinusbench::cohort::{
    generate_synthetic, label_of, serialize_cohort, CohortSchema, GeneratorConfig, DEFAULT_COHORT_SIZE, DEFAULT_SEED,
};
use sinusbench::metrics::PredictionSet;
use sinusbench::protocol::{build_prompt, serialize_case, ModelIdentity, ReplayEntry, ReplayStore, CANONICAL_PROMPT};
use sinusbench::Confidence;

const NEGATIVES: usize = 20;
const POSITIVES: usize = 85;
/// Cases predicted 0 within each true class.
const TRUE_NEGATIVES: usize = 6;
const FALSE_NEGATIVES: usize = 3;

fn reply(rng: &mut ChaCha8Rng, label: u8, confidence: Confidence) -> String {
    let reason = if label == 1 {
        "Baseline burden is high relative to the expected loss from comorbidities."
    } else {
        "Modifiers outweigh the expected gain from baseline severity."
    };
    match rng.gen_range(0..3) {
        0 => format!("{reason}\nPREDICTION: {label}\nCONFIDENCE: {confidence}"),
        1 => format!("Reasoning: {reason}\n\n**PREDICTION:** {label}\n**CONFIDENCE:** {}", confidence.label().to_lowercase()),
        _ => format!("prediction: {label}\nconfidence: {confidence}.\n{reason}"),
    }
}

fn confident(rng: &mut ChaCha8Rng) -> Confidence {
    [Confidence::VeryConfident, Confidence::SomewhatConfident, Confidence::Neutral][rng.gen_range(0..3)]
}

/// Five replicate texts whose aggregate is `target`.
fn replicates(rng: &mut ChaCha8Rng, target: u8, unparseable: bool) -> Vec<String> {
    if unparseable {
        return (0..5).map(|i| format!("I cannot make a recommendation without imaging review ({i}).")).collect();
    }
    let other = 1 - target;
    let mut out: Vec<String> = match rng.gen_range(0..10) {
        // Unanimous.
        0..=4 => (0..5).map(|_| { let c = confident(rng); reply(rng, target, c) }).collect(),
        // 4-1 and 3-2 majorities.
        5..=6 => {
            let mut v: Vec<String> = (0..4).map(|_| { let c = confident(rng); reply(rng, target, c) }).collect();
            v.push(reply(rng, other, Confidence::SomewhatUnsure));
            v
        }
        7..=8 => {
            let mut v: Vec<String> = (0..3).map(|_| { let c = confident(rng); reply(rng, target, c) }).collect();
            v.push(reply(rng, other, Confidence::Neutral));
            v.push(reply(rng, other, Confidence::SomewhatUnsure));
            v
        }
        // 1-1 tie among valid answers, broken by confidence; three unusable.
        _ => vec![
            reply(rng, target, Confidence::VeryConfident),
            reply(rng, other, Confidence::SomewhatUnsure),
            "PREDICTION: maybe".to_string(),
            format!("PREDICTION: {target}\nCONFIDENCE: extremely sure"),
            "No structured answer.".to_string(),
        ],
    };
    out.shuffle(rng);
    out
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/fixtures/claude".into()));
    let schema = CohortSchema::canonical();
    let cohort = generate_synthetic(DEFAULT_COHORT_SIZE, DEFAULT_SEED, &GeneratorConfig::default(), &schema)
        .expect("default cohort");
    let negatives = cohort.iter().filter(|r| label_of(r) == Some(0)).take(NEGATIVES);
    let positives = cohort.iter().filter(|r| label_of(r) == Some(1)).take(POSITIVES);
    let mut cases: Vec<_> = negatives.chain(positives).cloned().collect();
    cases.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    assert_eq!(cases.len(), NEGATIVES + POSITIVES);

    let mut rng = ChaCha8Rng::seed_from_u64(20251021);
    let mut neg_targets = vec![1u8; NEGATIVES];
    neg_targets[..TRUE_NEGATIVES].fill(0);
    neg_targets.shuffle(&mut rng);
    let mut pos_targets = vec![1u8; POSITIVES];
    pos_targets[..FALSE_NEGATIVES].fill(0);
    pos_targets.shuffle(&mut rng);
    let (mut ni, mut pi) = (0, 0);

    std::fs::create_dir_all(&dir).expect("fixture dir");
    std::fs::write(dir.join("cohort.csv"), serialize_cohort(&cases).expect("serialize")).expect("write cohort");
    let replay_dir = dir.join("replay");
    if replay_dir.exists() {
        std::fs::remove_dir_all(&replay_dir).expect("clear replay dir");
    }
    let store = ReplayStore::open(&replay_dir).expect("replay dir");
    let model = ModelIdentity::registry("claude").expect("registered");
    let mut first_fn = true;
    for case in &cases {
        let target = if label_of(case) == Some(1) {
            pi += 1;
            pos_targets[pi - 1]
        } else {
            ni += 1;
            neg_targets[ni - 1]
        };
        // One false negative comes from a case with no usable answer.
        let unparseable = target == 0 && label_of(case) == Some(1) && std::mem::take(&mut first_fn);
        let prompt = build_prompt(&[serialize_case(case, &schema)], CANONICAL_PROMPT, &[]).expect("prompt");
        store
            .put(&ReplayEntry {
                prompt_hash: prompt.hash,
                model: model.to_string(),
                responses: replicates(&mut rng, target, unparseable),
            })
            .expect("write entry");
    }

    // Reference MLP predictions: 9 of 20 negatives and 80 of 85 positives right.
    let mut mlp_neg = vec![1u8; NEGATIVES];
    mlp_neg[..9].fill(0);
    mlp_neg.shuffle(&mut rng);
    let mut mlp_pos = vec![1u8; POSITIVES];
    mlp_pos[..5].fill(0);
    mlp_pos.shuffle(&mut rng);
    let (mut ni, mut pi) = (0, 0);
    let mut hard = Vec::new();
    for case in &cases {
        hard.push(if label_of(case) == Some(1) {
            pi += 1;
            mlp_pos[pi - 1]
        } else {
            ni += 1;
            mlp_neg[ni - 1]
        });
    }
    let scores: Vec<f64> = hard
        .iter()
        .map(|&h| {
            let s: f64 = rng.gen_range(0.02..0.48);
            ((if h == 1 { 1.0 - s } else { s }) * 1000.0).round() / 1000.0
        })
        .collect();
    let set = PredictionSet::new(
        "mlp-reference",
        cases.iter().map(|c| c.patient_id.clone()).collect(),
        cases.iter().map(|c| label_of(c).expect("labelled")).collect(),
        scores,
        hard,
    )
    .expect("valid prediction set");
    std::fs::write(dir.join("mlp_predictions.json"), serde_json::to_string_pretty(&set).expect("json") + "\n")
        .expect("write predictions");
    println!("wrote {} cases to {}", cases.len(), dir.display());
}
