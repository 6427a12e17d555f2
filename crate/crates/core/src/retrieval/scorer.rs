//! Scoring every pair of a dataset with one method.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bm25::{bm25_score, Bm25Params, TermIndex};
use super::dense::{dot_score, maxsim_score};
use super::embeddings::{EmbeddingKey, EmbeddingStore, Granularity};
use super::external::ExternalScores;
use super::rank::rank_paragraphs;
use super::tokenize::Tokenizer;
use crate::corpus_model::{Corpus, DatasetRecord, Judgment, Ranking};
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bm25,
    Dot,
    MaxSim,
    External,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bm25 => "bm25",
            Method::Dot => "dot",
            Method::MaxSim => "maxsim",
            Method::External => "external",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(Method::Bm25),
            "dot" => Ok(Method::Dot),
            "maxsim" => Ok(Method::MaxSim),
            "external" => Ok(Method::External),
            other => Err(Error::Config(format!("unknown scoring method {other:?}"))),
        }
    }
}

pub enum Scorer<'a> {
    Bm25 { params: Bm25Params, tokenizer: Tokenizer },
    Dot(&'a EmbeddingStore),
    MaxSim { store: &'a EmbeddingStore, normalize: bool },
    External(&'a ExternalScores),
}

impl Scorer<'_> {
    pub fn method(&self) -> Method {
        match self {
            Scorer::Bm25 { .. } => Method::Bm25,
            Scorer::Dot(_) => Method::Dot,
            Scorer::MaxSim { .. } => Method::MaxSim,
            Scorer::External(_) => Method::External,
        }
    }

    fn check(&self) -> Result<()> {
        let want = match self {
            Scorer::Dot(s) => Some((s, Granularity::Single)),
            Scorer::MaxSim { store, .. } => Some((store, Granularity::Token)),
            _ => None,
        };
        if let Some((store, g)) = want {
            if store.granularity() != g {
                return Err(Error::Config(format!(
                    "{} scoring needs a {g:?} embedding store",
                    self.method()
                )));
            }
        }
        Ok(())
    }

    fn score(&self, record: &DatasetRecord, judgment: &Judgment, index: Option<&TermIndex>) -> Result<Vec<(u32, f64)>> {
        let missing = |key: &EmbeddingKey| Error::Embedding(format!("no embedding for {key}"));
        match self {
            Scorer::Bm25 { params, tokenizer } => {
                let built;
                let index = match index {
                    Some(i) => i,
                    None => {
                        built = TermIndex::build(judgment, *tokenizer);
                        &built
                    }
                };
                Ok(bm25_score(&record.query_text, index, *params))
            }
            Scorer::Dot(store) => {
                let qk = EmbeddingKey::Query(record.query_id.clone());
                let q = store.vector(&qk).ok_or_else(|| missing(&qk))?;
                judgment
                    .nums()
                    .map(|num| {
                        let pk = EmbeddingKey::paragraph(&judgment.judgment_id, num);
                        let p = store.vector(&pk).ok_or_else(|| missing(&pk))?;
                        Ok((num, dot_score(q, p)?))
                    })
                    .collect()
            }
            Scorer::MaxSim { store, normalize } => {
                let qk = EmbeddingKey::Query(record.query_id.clone());
                let q = store.matrix(&qk).ok_or_else(|| missing(&qk))?;
                judgment
                    .nums()
                    .map(|num| {
                        let pk = EmbeddingKey::paragraph(&judgment.judgment_id, num);
                        let d = store.matrix(&pk).ok_or_else(|| missing(&pk))?;
                        Ok((num, maxsim_score(q, d, *normalize)?))
                    })
                    .collect()
            }
            Scorer::External(scores) => {
                let pair = scores.pair(&record.query_id, &record.judgment_id);
                let missing: Vec<u32> = judgment
                    .nums()
                    .filter(|n| pair.is_none_or(|p| !p.contains_key(n)))
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::IncompleteScores {
                        judgment_id: judgment.judgment_id.clone(),
                        missing,
                    });
                }
                let pair = pair.expect("checked above");
                Ok(judgment.nums().map(|n| (n, pair[&n])).collect())
            }
        }
    }
}

/// Ranks the paragraphs of every record's judgment. Output follows input order.
pub fn score_pairs(records: &[DatasetRecord], corpus: &Corpus, scorer: &Scorer<'_>, exec: Execution) -> Result<Vec<Ranking>> {
    scorer.check()?;
    for r in records {
        corpus.require(&r.judgment_id)?;
    }
    let indexes: HashMap<&str, TermIndex> = match scorer {
        Scorer::Bm25 { tokenizer, .. } => {
            let mut ids: Vec<&str> = records.iter().map(|r| r.judgment_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            let built = exec.map(&ids, |id| TermIndex::build(corpus.get(id).expect("checked"), *tokenizer));
            ids.into_iter().zip(built).collect()
        }
        _ => HashMap::new(),
    };
    exec.try_map(records, |r| {
        let judgment = corpus.get(&r.judgment_id).expect("checked");
        let scores = scorer.score(r, judgment, indexes.get(r.judgment_id.as_str()))?;
        Ok(rank_paragraphs(&r.query_id, &r.judgment_id, scores))
    })
}
