//! Leakage-controlled evaluation splits.
//!
//! Three test conditions are produced: pairs from held-out guides
//! (`test_unseen_article`), pairs of held-out queries from the remaining guides
//! (`test_seen_unseen`), and a pair-level split of everything else into
//! `train`, `val` and `test_seen_seen`. Every query that has pairs outside
//! `train` in the last group also has at least one pair in `train`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_model::DatasetRecord;
use crate::error::{Error, Result};

/// Identifier of the shuffling algorithm, stored with every assignment.
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64/fisher-yates";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    TestSeenSeen,
    TestSeenUnseen,
    TestUnseenArticle,
}

impl Split {
    pub const ALL: [Split; 5] = [
        Split::Train,
        Split::Val,
        Split::TestSeenSeen,
        Split::TestSeenUnseen,
        Split::TestUnseenArticle,
    ];

    /// Splits scored by default at evaluation time.
    pub const EVALUATED: [Split; 4] = [
        Split::Val,
        Split::TestSeenSeen,
        Split::TestSeenUnseen,
        Split::TestUnseenArticle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::TestSeenSeen => "test_seen_seen",
            Split::TestSeenUnseen => "test_seen_unseen",
            Split::TestUnseenArticle => "test_unseen_article",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GuideHoldout {
    Guides(BTreeSet<String>),
    Fraction(f64),
}

impl Default for GuideHoldout {
    fn default() -> Self {
        GuideHoldout::Guides(BTreeSet::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub guide_holdout: GuideHoldout,
    pub query_holdout: f64,
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            guide_holdout: GuideHoldout::default(),
            query_holdout: 0.2,
            train: 0.74,
            val: 0.10,
            test: 0.16,
        }
    }
}

impl SplitRatios {
    pub fn check(&self) -> Result<()> {
        let unit = |name: &str, x: f64, closed_low: bool| {
            let ok = x.is_finite() && x < 1.0 && (x > 0.0 || (closed_low && x == 0.0));
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} fraction {x} out of range")))
            }
        };
        if let GuideHoldout::Fraction(f) = self.guide_holdout {
            unit("guide holdout", f, true)?;
        }
        unit("query holdout", self.query_holdout, true)?;
        unit("train", self.train, false)?;
        unit("val", self.val, true)?;
        unit("test", self.test, true)?;
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("train/val/test fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Contents of `splits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub algorithm: String,
    pub ratios: SplitRatios,
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn split_of(&self, pair_id: &str) -> Option<Split> {
        self.assignment.get(pair_id).copied()
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
        for s in self.assignment.values() {
            *counts.entry(*s).or_default() += 1;
        }
        counts
    }
}

fn take_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Partitions dataset pairs into the five buckets.
///
/// Output depends only on the set of pairs and the seed, not on input order.
pub fn make_splits(records: &[DatasetRecord], ratios: &SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pairs: Vec<&DatasetRecord> = records.iter().collect();
    pairs.sort_by_key(|r| r.pair_id());
    pairs.dedup_by_key(|r| r.pair_id());

    let guides: BTreeSet<&str> = pairs.iter().map(|r| r.guide_id.as_str()).collect();
    let held_guides: BTreeSet<String> = match &ratios.guide_holdout {
        GuideHoldout::Guides(g) => g.clone(),
        GuideHoldout::Fraction(f) => {
            let mut order: Vec<&str> = guides.iter().copied().collect();
            order.shuffle(&mut rng);
            let k = take_count(*f, order.len());
            order[..k].iter().map(|s| s.to_string()).collect()
        }
    };
    if guides.iter().all(|g| held_guides.contains(*g)) {
        return Err(Error::InfeasibleSplit("every guide is held out".into()));
    }

    let mut assignment = BTreeMap::new();
    let mut seen_pairs: Vec<&DatasetRecord> = Vec::new();
    for r in &pairs {
        if held_guides.contains(&r.guide_id) {
            assignment.insert(r.pair_id(), Split::TestUnseenArticle);
        } else {
            seen_pairs.push(r);
        }
    }

    let mut queries: Vec<&str> = seen_pairs
        .iter()
        .map(|r| r.query_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    queries.shuffle(&mut rng);
    let held_queries: BTreeSet<&str> = queries[..take_count(ratios.query_holdout, queries.len())]
        .iter()
        .copied()
        .collect();
    if held_queries.len() == queries.len() {
        return Err(Error::InfeasibleSplit(
            "query holdout leaves no queries for training".into(),
        ));
    }

    let mut pool: Vec<&DatasetRecord> = Vec::new();
    for r in seen_pairs {
        if held_queries.contains(r.query_id.as_str()) {
            assignment.insert(r.pair_id(), Split::TestSeenUnseen);
        } else {
            pool.push(r);
        }
    }

    pool.shuffle(&mut rng);
    let n_val = take_count(ratios.val, pool.len());
    let n_test = take_count(ratios.test, pool.len()).min(pool.len() - n_val);
    let mut buckets: Vec<Split> = Vec::with_capacity(pool.len());
    buckets.extend(std::iter::repeat_n(Split::Val, n_val));
    buckets.extend(std::iter::repeat_n(Split::TestSeenSeen, n_test));
    buckets.resize(pool.len(), Split::Train);

    // Any query without a training pair gets its first pair (in shuffled
    // order) moved to train.
    let mut has_train: BTreeSet<&str> = BTreeSet::new();
    for (r, s) in pool.iter().zip(&buckets) {
        if *s == Split::Train {
            has_train.insert(&r.query_id);
        }
    }
    for (r, s) in pool.iter().zip(buckets.iter_mut()) {
        if !has_train.contains(r.query_id.as_str()) {
            *s = Split::Train;
            has_train.insert(&r.query_id);
        }
    }
    for (r, s) in pool.iter().zip(buckets) {
        assignment.insert(r.pair_id(), s);
    }
    if !assignment.values().any(|s| *s == Split::Train) {
        return Err(Error::InfeasibleSplit("train split is empty".into()));
    }

    Ok(SplitAssignment {
        seed,
        algorithm: RNG_ALGORITHM.to_string(),
        ratios: ratios.clone(),
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitViolation {
    Unassigned(String),
    UnknownPair(String),
    GuideLeak { guide_id: String, split: Split },
    QueryLeak { query_id: String, split: Split },
    UnseenTrainQuery(String),
}

impl fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitViolation::Unassigned(p) => write!(f, "pair {p} is not assigned"),
            SplitViolation::UnknownPair(p) => write!(f, "assignment names unknown pair {p}"),
            SplitViolation::GuideLeak { guide_id, split } => {
                write!(f, "held-out guide {guide_id} also occurs in {split}")
            }
            SplitViolation::QueryLeak { query_id, split } => {
                write!(f, "held-out query {query_id} also occurs in {split}")
            }
            SplitViolation::UnseenTrainQuery(q) => {
                write!(f, "query {q} is in test_seen_seen but not in train")
            }
        }
    }
}

/// Lists every broken split invariant. Empty means the assignment is sound.
pub fn verify_splits(assignment: &SplitAssignment, records: &[DatasetRecord]) -> Vec<SplitViolation> {
    let mut out = Vec::new();
    let mut known: BTreeSet<String> = BTreeSet::new();
    let mut by_split: BTreeMap<Split, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in records {
        let id = r.pair_id();
        match assignment.split_of(&id) {
            Some(s) => by_split.entry(s).or_default().push(r),
            None => out.push(SplitViolation::Unassigned(id.clone())),
        }
        known.insert(id);
    }
    for id in assignment.assignment.keys() {
        if !known.contains(id) {
            out.push(SplitViolation::UnknownPair(id.clone()));
        }
    }

    let members = |split: Split| by_split.get(&split).map(Vec::as_slice).unwrap_or(&[]);
    let unseen_guides: BTreeSet<&str> = members(Split::TestUnseenArticle)
        .iter()
        .map(|r| r.guide_id.as_str())
        .collect();
    let unseen_queries: BTreeSet<&str> = members(Split::TestSeenUnseen)
        .iter()
        .map(|r| r.query_id.as_str())
        .collect();
    let train_queries: BTreeSet<&str> = members(Split::Train)
        .iter()
        .map(|r| r.query_id.as_str())
        .collect();

    let mut reported: BTreeSet<(String, Split)> = BTreeSet::new();
    for split in Split::ALL {
        for r in members(split) {
            if split != Split::TestUnseenArticle
                && unseen_guides.contains(r.guide_id.as_str())
                && reported.insert((r.guide_id.clone(), split))
            {
                out.push(SplitViolation::GuideLeak {
                    guide_id: r.guide_id.clone(),
                    split,
                });
            }
            if matches!(split, Split::Train | Split::Val | Split::TestSeenSeen)
                && unseen_queries.contains(r.query_id.as_str())
                && reported.insert((r.query_id.clone(), split))
            {
                out.push(SplitViolation::QueryLeak {
                    query_id: r.query_id.clone(),
                    split,
                });
            }
        }
    }
    let mut flagged = BTreeSet::new();
    for r in members(Split::TestSeenSeen) {
        if !train_queries.contains(r.query_id.as_str()) && flagged.insert(r.query_id.as_str()) {
            out.push(SplitViolation::UnseenTrainQuery(r.query_id.clone()));
        }
    }
    out
}
