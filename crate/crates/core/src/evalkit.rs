//! Recall@k% evaluation and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus_model::{Corpus, DatasetRecord, Ranking};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::retrieval::Tokenizer;
use crate::splits::{Split, SplitAssignment};

pub const DEFAULT_KS: [f64; 3] = [2.0, 5.0, 10.0];

/// Number of top-ranked paragraphs inspected at `k_percent` of `n`.
///
/// Rounds up, with a floor of one paragraph.
pub fn cutoff(k_percent: f64, n: usize) -> usize {
    let m = ((k_percent * n as f64) / 100.0).ceil();
    (m.max(1.0) as usize).min(n.max(1))
}

pub fn recall_at_percent(ranking: &Ranking, relevant: &BTreeSet<u32>, k_percent: f64) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::UndefinedMetric(format!("{}: empty relevant set", ranking.pair_id())));
    }
    if !(k_percent.is_finite() && k_percent > 0.0) {
        return Err(Error::UndefinedMetric(format!("k% must be positive, got {k_percent}")));
    }
    let m = cutoff(k_percent, ranking.entries.len());
    let hits = ranking.order().take(m).filter(|n| relevant.contains(n)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub method: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub macro_per_query: bool,
}

/// Mean recall per k, serialised as `{"2": .., "5": .., "10": ..}` in k order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KTable(pub Vec<(f64, f64)>);

impl KTable {
    pub fn get(&self, k: f64) -> Option<f64> {
        self.0.iter().find(|(kk, _)| *kk == k).map(|&(_, v)| v)
    }
}

impl Serialize for KTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for KTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: BTreeMap<String, f64> = BTreeMap::deserialize(d)?;
        let mut rows = raw
            .into_iter()
            .map(|(k, v)| k.parse::<f64>().map(|k| (k, v)).map_err(serde::de::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(KTable(rows))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub run: RunInfo,
    pub tables: BTreeMap<Split, KTable>,
    pub counts: BTreeMap<Split, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<f64>,
    pub splits: Vec<Split>,
    pub macro_per_query: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: DEFAULT_KS.to_vec(),
            splits: Split::EVALUATED.to_vec(),
            macro_per_query: false,
        }
    }
}

/// Mean Recall@k% per split, over pairs (or over queries when `macro_per_query`).
pub fn evaluate_run(
    rankings: &[Ranking],
    records: &[DatasetRecord],
    assignment: &SplitAssignment,
    opts: &EvalOptions,
    run: RunInfo,
    exec: Execution,
) -> Result<ResultsTable> {
    let mut ks = opts.ks.clone();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Config("no k values to evaluate".into()));
    }
    let by_pair: HashMap<String, &Ranking> = rankings.iter().map(|r| (r.pair_id(), r)).collect();
    let mut tables = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for &split in &opts.splits {
        let mut members: Vec<(String, &DatasetRecord)> = records
            .iter()
            .map(|r| (r.pair_id(), r))
            .filter(|(pid, _)| assignment.split_of(pid) == Some(split))
            .collect();
        members.sort_by(|a, b| a.0.cmp(&b.0));
        counts.insert(split, members.len());
        if members.is_empty() {
            continue;
        }
        let recalls = exec.try_map(&members, |(pid, r)| {
            let ranking = by_pair.get(pid).ok_or_else(|| Error::MissingRanking(pid.clone()))?;
            ks.iter()
                .map(|&k| recall_at_percent(ranking, &r.relevant, k))
                .collect::<Result<Vec<f64>>>()
        })?;
        let rows: Vec<Vec<f64>> = if opts.macro_per_query {
            let mut per_query: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
            for ((_, r), v) in members.iter().zip(&recalls) {
                per_query.entry(r.query_id.as_str()).or_default().push(v);
            }
            per_query
                .values()
                .map(|vs| (0..ks.len()).map(|i| mean(vs.iter().map(|v| v[i]))).collect())
                .collect()
        } else {
            recalls
        };
        let table = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, mean(rows.iter().map(|v| v[i]))))
            .collect();
        tables.insert(split, KTable(table));
    }
    Ok(ResultsTable {
        run: RunInfo {
            macro_per_query: opts.macro_per_query,
            ..run
        },
        tables,
        counts,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(mut values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Summary {
                count: 0,
                min: 0.0,
                max: 0.0,
                mean: 0.0,
                median: 0.0,
            };
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        Summary {
            count: n,
            min: values[0],
            max: values[n - 1],
            mean: mean(values.iter().copied()),
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub judgments: usize,
    pub paragraphs: usize,
    pub queries: usize,
    pub pairs: usize,
    pub paragraphs_per_judgment: Summary,
    pub relevant_percent: Summary,
    pub query_tokens: Summary,
    pub paragraph_tokens: Summary,
}

/// Distribution summaries over the corpus and dataset, tokenised as for BM25.
pub fn corpus_stats(corpus: &Corpus, records: &[DatasetRecord], tokenizer: Tokenizer) -> Result<CorpusStats> {
    let mut relevant_percent = Vec::with_capacity(records.len());
    let mut queries: BTreeMap<&str, &str> = BTreeMap::new();
    for r in records {
        let j = corpus.require(&r.judgment_id)?;
        if let Some(bad) = r.relevant.iter().find(|&&n| j.paragraph(n).is_none()) {
            return Err(Error::UnparseableJudgment {
                judgment_id: j.judgment_id.clone(),
                reason: format!("pair {} cites missing paragraph {bad}", r.pair_id()),
            });
        }
        relevant_percent.push(100.0 * r.relevant.len() as f64 / j.len() as f64);
        queries.insert(&r.query_id, &r.query_text);
    }
    let para_counts: Vec<f64> = corpus.judgments().iter().map(|j| j.len() as f64).collect();
    let para_tokens: Vec<f64> = corpus
        .judgments()
        .iter()
        .flat_map(|j| j.paragraphs.iter())
        .map(|p| tokenizer.count(&p.text) as f64)
        .collect();
    let query_tokens: Vec<f64> = queries.values().map(|t| tokenizer.count(t) as f64).collect();
    Ok(CorpusStats {
        judgments: corpus.len(),
        paragraphs: para_tokens.len(),
        queries: queries.len(),
        pairs: records.len(),
        paragraphs_per_judgment: Summary::of(para_counts),
        relevant_percent: Summary::of(relevant_percent),
        query_tokens: Summary::of(query_tokens),
        paragraph_tokens: Summary::of(para_tokens),
    })
}
