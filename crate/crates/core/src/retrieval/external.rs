//! Scores produced outside this crate (for example by a cross-encoder),
//! read from `scores.tsv`: `query_id \t judgment_id \t para_num \t score`.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    scores: HashMap<(String, String), HashMap<u32, f64>>,
}

impl ExternalScores {
    pub fn len(&self) -> usize {
        self.scores.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, query_id: &str, judgment_id: &str, para_num: u32) -> Option<f64> {
        self.pair(query_id, judgment_id)?.get(&para_num).copied()
    }

    /// All paragraph scores for one pair.
    pub fn pair(&self, query_id: &str, judgment_id: &str) -> Option<&HashMap<u32, f64>> {
        self.scores
            .get(&(query_id.to_string(), judgment_id.to_string()))
    }
}

pub fn parse_external_scores(text: &str, path: &Path) -> Result<ExternalScores> {
    let mut out = ExternalScores::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [query_id, judgment_id, num, score] = fields[..] else {
            return Err(Error::format(path, line_no, format!("expected 4 tab-separated fields, got {}", fields.len())));
        };
        let para_num: u32 = num
            .trim()
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("invalid paragraph number {num:?}")))?;
        let value: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::InvalidScore {
                value: score.to_string(),
                line: line_no,
            })?;
        let slot = out
            .scores
            .entry((query_id.to_string(), judgment_id.to_string()))
            .or_default();
        if slot.insert(para_num, value).is_some() {
            return Err(Error::DuplicateScore {
                query_id: query_id.to_string(),
                judgment_id: judgment_id.to_string(),
                para_num,
                line: line_no,
            });
        }
    }
    Ok(out)
}

pub fn load_external_scores(path: &Path) -> Result<ExternalScores> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_scores(&text, path)
}
