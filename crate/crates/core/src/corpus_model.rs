//! Shared domain types: judgments, queries, labelled pairs and rankings.
//!
//! Identifiers are opaque strings compared by exact match. Construction is
//! permissive; [`validate_pair`] and [`Judgment::violations`] report invariant
//! breaches so that ingestion can surface bad data instead of crashing.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One court-numbered paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub num: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub judgment_id: String,
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

impl Judgment {
    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    pub fn nums(&self) -> impl Iterator<Item = u32> + '_ {
        self.paragraphs.iter().map(|p| p.num)
    }

    pub fn paragraph(&self, num: u32) -> Option<&Paragraph> {
        self.paragraphs
            .binary_search_by_key(&num, |p| p.num)
            .ok()
            .map(|i| &self.paragraphs[i])
    }

    /// Structural problems with the paragraph list; empty when well formed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.paragraphs.is_empty() {
            out.push("judgment has no paragraphs".to_string());
        }
        let mut prev = 0u32;
        for p in &self.paragraphs {
            if p.num == 0 {
                out.push("paragraph number 0".to_string());
            } else if p.num <= prev {
                out.push(format!("paragraph {} does not follow {}", p.num, prev));
            }
            if p.text.trim().is_empty() {
                out.push(format!("paragraph {} has empty text", p.num));
            }
            prev = prev.max(p.num);
        }
        out
    }
}

/// A query built from a guide heading path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub guide_id: String,
    pub path: Vec<String>,
    pub query_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryJudgmentPair {
    pub query_id: String,
    pub judgment_id: String,
    pub relevant: BTreeSet<u32>,
}

impl QueryJudgmentPair {
    pub fn pair_id(&self) -> String {
        pair_id(&self.query_id, &self.judgment_id)
    }
}

/// Key used for a pair in split files: `<query_id>|<judgment_id>`.
pub fn pair_id(query_id: &str, judgment_id: &str) -> String {
    format!("{query_id}|{judgment_id}")
}

/// One line of `dataset.jsonl`: a query and its labelled judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query_id: String,
    pub guide_id: String,
    pub path: Vec<String>,
    pub query_text: String,
    pub judgment_id: String,
    pub relevant: BTreeSet<u32>,
}

impl DatasetRecord {
    pub fn new(query: &QueryRecord, judgment_id: impl Into<String>, relevant: BTreeSet<u32>) -> Self {
        DatasetRecord {
            query_id: query.query_id.clone(),
            guide_id: query.guide_id.clone(),
            path: query.path.clone(),
            query_text: query.query_text.clone(),
            judgment_id: judgment_id.into(),
            relevant,
        }
    }

    pub fn pair_id(&self) -> String {
        pair_id(&self.query_id, &self.judgment_id)
    }

    pub fn pair(&self) -> QueryJudgmentPair {
        QueryJudgmentPair {
            query_id: self.query_id.clone(),
            judgment_id: self.judgment_id.clone(),
            relevant: self.relevant.clone(),
        }
    }

    pub fn query(&self) -> QueryRecord {
        QueryRecord {
            query_id: self.query_id.clone(),
            guide_id: self.guide_id.clone(),
            path: self.path.clone(),
            query_text: self.query_text.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedParagraph {
    pub num: u32,
    pub score: f64,
}

/// Paragraphs of one judgment ordered by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub judgment_id: String,
    pub entries: Vec<RankedParagraph>,
}

impl Ranking {
    pub fn pair_id(&self) -> String {
        pair_id(&self.query_id, &self.judgment_id)
    }

    pub fn order(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.num)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairViolation {
    EmptyRelevant,
    UnknownParagraph(u32),
    RelevantCoversJudgment,
}

impl fmt::Display for PairViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairViolation::EmptyRelevant => f.write_str("empty relevant set"),
            PairViolation::UnknownParagraph(n) => write!(f, "unknown paragraph {n}"),
            PairViolation::RelevantCoversJudgment => {
                f.write_str("relevant set equals paragraph set")
            }
        }
    }
}

/// Checks a labelled pair against its judgment. An empty report means valid.
pub fn validate_pair(pair: &QueryJudgmentPair, judgment: &Judgment) -> Result<Vec<PairViolation>> {
    if pair.judgment_id != judgment.judgment_id {
        return Err(Error::IdentityMismatch {
            pair: pair.judgment_id.clone(),
            judgment: judgment.judgment_id.clone(),
        });
    }
    let mut report = Vec::new();
    if pair.relevant.is_empty() {
        report.push(PairViolation::EmptyRelevant);
        return Ok(report);
    }
    let known: BTreeSet<u32> = judgment.nums().collect();
    report.extend(
        pair.relevant
            .iter()
            .filter(|n| !known.contains(n))
            .map(|&n| PairViolation::UnknownParagraph(n)),
    );
    if report.is_empty() && pair.relevant.len() == known.len() {
        report.push(PairViolation::RelevantCoversJudgment);
    }
    Ok(report)
}

/// Judgments indexed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    judgments: Vec<Judgment>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(judgments: Vec<Judgment>) -> Self {
        let by_id = judgments
            .iter()
            .enumerate()
            .map(|(i, j)| (j.judgment_id.clone(), i))
            .collect();
        Corpus { judgments, by_id }
    }

    pub fn get(&self, judgment_id: &str) -> Option<&Judgment> {
        self.by_id.get(judgment_id).map(|&i| &self.judgments[i])
    }

    pub fn require(&self, judgment_id: &str) -> Result<&Judgment> {
        self.get(judgment_id)
            .ok_or_else(|| Error::UnknownJudgment(judgment_id.to_string()))
    }

    pub fn contains(&self, judgment_id: &str) -> bool {
        self.by_id.contains_key(judgment_id)
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

impl FromIterator<Judgment> for Corpus {
    fn from_iter<I: IntoIterator<Item = Judgment>>(iter: I) -> Self {
        Corpus::new(iter.into_iter().collect())
    }
}
