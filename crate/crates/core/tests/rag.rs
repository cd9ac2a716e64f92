use proptest::prelude::*;
use sinusbench::rag::{augment_prompt, bm25_score, retrieve, tokenize, Bm25Index, Bm25Params, Passage, RagError};

const VOCAB: [&str; 8] = ["polyps", "asthma", "snot", "ct", "smoker", "revision", "endoscopy", "gerd"];

/// Scores a passage straight from the raw texts, with no index.
fn oracle(texts: &[Vec<&str>], query: &[&str], doc: usize, k1: f64, b: f64) -> f64 {
    let n = texts.len() as f64;
    let avg = texts.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let len = texts[doc].len() as f64;
    query
        .iter()
        .map(|q| {
            let df = texts.iter().filter(|t| t.contains(q)).count() as f64;
            let tf = texts[doc].iter().filter(|w| *w == q).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg))
        })
        .sum()
}

fn corpus() -> impl Strategy<Value = Vec<Vec<&'static str>>> {
    prop::collection::vec(prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..12), 1..10)
}

fn index_of(texts: &[Vec<&str>], params: Bm25Params) -> Bm25Index {
    let passages = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Passage::new(&format!("p{i:02}"), "src", &t.join(" ")).unwrap())
        .collect();
    Bm25Index::build(passages, params).unwrap()
}

proptest! {
    #[test]
    fn score_matches_direct_formula(
        texts in corpus(),
        query in prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..6),
        k1 in 0.1f64..3.0,
        b in 0.0f64..1.0,
    ) {
        let index = index_of(&texts, Bm25Params { k1, b });
        let terms: Vec<String> = query.iter().map(|s| s.to_string()).collect();
        for doc in 0..texts.len() {
            let got = bm25_score(&terms, &format!("p{doc:02}"), &index).unwrap();
            let want = oracle(&texts, &query, doc, k1, b);
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn retrieval_is_sorted_and_truncated(
        texts in corpus(),
        query in prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..6),
        k in 1usize..12,
    ) {
        let index = index_of(&texts, Bm25Params::default());
        let r = retrieve(&index, &query.join(" "), k).unwrap();
        prop_assert_eq!(r.hits.len(), k.min(texts.len()));
        prop_assert_eq!(r.short_corpus, texts.len() < k);
        for pair in r.hits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            prop_assert!(a.score > b.score || (a.score == b.score && a.passage.passage_id < b.passage.passage_id));
        }
        // Nothing left out scores above the last hit.
        let floor = r.hits.last().unwrap().score;
        let terms = tokenize(&query.join(" "));
        for p in index.passages() {
            if !r.hits.iter().any(|h| h.passage.passage_id == p.passage_id) {
                prop_assert!(bm25_score(&terms, &p.passage_id, &index).unwrap() <= floor);
            }
        }
    }
}

#[test]
fn tokenizer_lowercases_alphanumeric_runs() {
    assert_eq!(tokenize("CT-score: 12, Polyps!"), ["ct", "score", "12", "polyps"]);
    assert!(tokenize(" ,.; ").is_empty());
}

#[test]
fn ties_fall_back_to_passage_id() {
    let passages = vec![
        Passage::new("z", "s", "polyps").unwrap(),
        Passage::new("a", "s", "polyps").unwrap(),
        Passage::new("m", "s", "asthma").unwrap(),
    ];
    let index = Bm25Index::build(passages, Bm25Params::default()).unwrap();
    let ids: Vec<_> = retrieve(&index, "polyps", 3).unwrap().hits.into_iter().map(|h| h.passage.passage_id).collect();
    assert_eq!(ids, ["a", "z", "m"]);
}

#[test]
fn corpus_errors() {
    assert!(matches!(Passage::new("x", "s", "  "), Err(RagError::EmptyPassage(_))));
    assert!(matches!(Bm25Index::build(vec![], Bm25Params::default()), Err(RagError::EmptyCorpus)));
    let dup = vec![Passage::new("x", "s", "a").unwrap(), Passage::new("x", "s", "b").unwrap()];
    assert!(matches!(Bm25Index::build(dup, Bm25Params::default()), Err(RagError::DuplicateId(_))));
    let index = Bm25Index::build(vec![Passage::new("x", "s", "a").unwrap()], Bm25Params::default()).unwrap();
    assert!(matches!(retrieve(&index, "a", 0), Err(RagError::ZeroK)));
    assert!(matches!(bm25_score(&[], "nope", &index), Err(RagError::UnknownPassage(_))));
}

#[test]
fn augmentation_numbers_and_tags_passages() {
    let ps = [Passage::new("1", "guideline", " first ").unwrap(), Passage::new("2", "trial", "second").unwrap()];
    assert_eq!(
        augment_prompt("BODY", &ps),
        "Reference passages:\n[1] (guideline) first\n[2] (trial) second\n\nBODY"
    );
    assert_eq!(augment_prompt("BODY", &[]), "BODY");
}
