//! BM25 retrieval over a small passage corpus, used to prepend reference
//! text to a prompt.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("passage {0:?} has empty text")]
    EmptyPassage(String),
    #[error("duplicate passage id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown passage {0:?}")]
    UnknownPassage(String),
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RagError> = std::result::Result<T, E>;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub source_tag: String,
    pub text: String,
    #[serde(default)]
    pub token_count: usize,
}

impl Passage {
    pub fn new(passage_id: &str, source_tag: &str, text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(RagError::EmptyPassage(passage_id.to_string()));
        }
        Ok(Passage {
            passage_id: passage_id.to_string(),
            source_tag: source_tag.to_string(),
            text: text.to_string(),
            token_count: tokenize(text).len(),
        })
    }
}

/// Reads a JSON array of `{passage_id, source_tag, text}` objects.
pub fn load_corpus(path: &Path) -> Result<Vec<Passage>> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

pub fn parse_corpus(json: &str) -> Result<Vec<Passage>> {
    let raw: Vec<Passage> = serde_json::from_str(json)?;
    raw.iter().map(|p| Passage::new(&p.passage_id, &p.source_tag, &p.text)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index; immutable once built.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    passages: Vec<Passage>,
    /// term → (passage position, term frequency), positions ascending.
    postings: BTreeMap<String, Vec<(usize, usize)>>,
    doc_lengths: Vec<usize>,
    average_doc_length: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build(passages: Vec<Passage>, params: Bm25Params) -> Result<Self> {
        if passages.is_empty() {
            return Err(RagError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        let mut postings: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(passages.len());
        for (pos, p) in passages.iter().enumerate() {
            if !seen.insert(p.passage_id.clone()) {
                return Err(RagError::DuplicateId(p.passage_id.clone()));
            }
            let tokens = tokenize(&p.text);
            doc_lengths.push(tokens.len());
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((pos, count));
            }
        }
        let average_doc_length = doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64;
        Ok(Bm25Index { passages, postings, doc_lengths, average_doc_length, params })
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn average_doc_length(&self) -> f64 {
        self.average_doc_length
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `ln(1 + (N − df + 0.5) / (df + 0.5))`, always non-negative.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.passages.len() as f64;
        let df = self.document_frequency(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn score_at(&self, query_terms: &[String], pos: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let len_norm = 1.0 - b + b * self.doc_lengths[pos] as f64 / self.average_doc_length;
        query_terms
            .iter()
            .filter_map(|t| {
                let list = self.postings.get(t)?;
                let i = list.binary_search_by_key(&pos, |&(p, _)| p).ok()?;
                let tf = list[i].1 as f64;
                Some(self.idf(t) * tf * (k1 + 1.0) / (tf + k1 * len_norm))
            })
            .sum()
    }
}

/// Okapi BM25 score of one passage. Repeated query terms count repeatedly.
pub fn bm25_score(query_terms: &[String], passage_id: &str, index: &Bm25Index) -> Result<f64> {
    let pos = index
        .passages
        .iter()
        .position(|p| p.passage_id == passage_id)
        .ok_or_else(|| RagError::UnknownPassage(passage_id.to_string()))?;
    Ok(index.score_at(query_terms, pos))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    pub passage: Passage,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<ScoredPassage>,
    /// The corpus had fewer than `k` passages.
    pub short_corpus: bool,
}

impl Retrieval {
    pub fn passages(&self) -> Vec<Passage> {
        self.hits.iter().map(|h| h.passage.clone()).collect()
    }
}

/// Top `k` passages by score, ties broken by passage id.
pub fn retrieve(index: &Bm25Index, query_text: &str, k: usize) -> Result<Retrieval> {
    if k == 0 {
        return Err(RagError::ZeroK);
    }
    let terms = tokenize(query_text);
    let mut scored: Vec<(f64, usize)> = (0..index.len()).map(|pos| (index.score_at(&terms, pos), pos)).collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| index.passages[a.1].passage_id.cmp(&index.passages[b.1].passage_id))
    });
    Ok(Retrieval {
        short_corpus: index.len() < k,
        hits: scored
            .into_iter()
            .take(k)
            .map(|(score, pos)| ScoredPassage { passage: index.passages[pos].clone(), score })
            .collect(),
    })
}

/// Prepends the passages, tagged with their source, to a prompt body.
pub fn augment_prompt(prompt_text: &str, passages: &[Passage]) -> String {
    if passages.is_empty() {
        return prompt_text.to_string();
    }
    let mut out = String::from("Reference passages:\n");
    for (i, p) in passages.iter().enumerate() {
        out.push_str(&format!("[{}] ({}) {}\n", i + 1, p.source_tag, p.text.trim()));
    }
    out.push('\n');
    out.push_str(prompt_text);
    out
}
