//! Okapi BM25 over the paragraphs of a single judgment.
//!
//! ```text
//! score(q, p) = Σ_{t ∈ q} idf(t) · tf(t,p)·(k1 + 1) / (tf(t,p) + k1·(1 − b + b·|p|/avgdl))
//! idf(t)      = ln((N − df(t) + 0.5) / (df(t) + 0.5) + 1)
//! ```
//!
//! `N`, `df` and `avgdl` are computed over the judgment's own paragraphs, since
//! each query is only ever ranked against paragraphs of one judgment. Query
//! terms are deduplicated.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::Tokenizer;
use crate::corpus_model::Judgment;
use crate::error::{Error, Result};

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

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1.is_finite() && k1 >= 0.0) || !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!("invalid BM25 parameters k1={k1} b={b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    para: u32,
    tf: u32,
}

/// Per-judgment lexical statistics.
#[derive(Debug, Clone)]
pub struct TermIndex {
    pub judgment_id: String,
    nums: Vec<u32>,
    lengths: Vec<u32>,
    avgdl: f64,
    postings: HashMap<String, Vec<Posting>>,
    tokenizer: Tokenizer,
}

impl TermIndex {
    pub fn build(judgment: &Judgment, tokenizer: Tokenizer) -> Self {
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut lengths = Vec::with_capacity(judgment.len());
        for (i, p) in judgment.paragraphs.iter().enumerate() {
            let tokens = tokenizer.tokenize(&p.text);
            lengths.push(tokens.len().max(1) as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    para: i as u32,
                    tf: count,
                });
            }
        }
        let total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if lengths.is_empty() {
            1.0
        } else {
            total as f64 / lengths.len() as f64
        };
        TermIndex {
            judgment_id: judgment.judgment_id.clone(),
            nums: judgment.nums().collect(),
            lengths,
            avgdl,
            postings,
            tokenizer,
        }
    }

    pub fn paragraph_count(&self) -> usize {
        self.nums.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn tf(&self, term: &str, para_num: u32) -> u32 {
        let Ok(idx) = self.nums.binary_search(&para_num) else {
            return 0;
        };
        self.postings
            .get(term)
            .and_then(|ps| ps.iter().find(|p| p.para as usize == idx))
            .map_or(0, |p| p.tf)
    }

    pub fn length(&self, para_num: u32) -> Option<u32> {
        self.nums
            .binary_search(&para_num)
            .ok()
            .map(|i| self.lengths[i])
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }
}

/// BM25 score of every paragraph, in paragraph order.
pub fn bm25_score(query_text: &str, index: &TermIndex, params: Bm25Params) -> Vec<(u32, f64)> {
    let n = index.nums.len() as f64;
    let mut scores = vec![0.0f64; index.nums.len()];
    let terms: BTreeSet<String> = index.tokenizer.tokenize(query_text).into_iter().collect();
    for term in &terms {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        for p in postings {
            let tf = f64::from(p.tf);
            let len = f64::from(index.lengths[p.para as usize]);
            let norm = params.k1 * (1.0 - params.b + params.b * len / index.avgdl);
            scores[p.para as usize] += idf * tf * (params.k1 + 1.0) / (tf + norm);
        }
    }
    index.nums.iter().copied().zip(scores).collect()
}
