//! Training instances with static (BM25 + random) and model-refreshed negatives.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_model::{Corpus, DatasetRecord, Judgment, Ranking};
use crate::error::{Error, Result};
use crate::io::stable_seed;
use crate::par::Execution;
use crate::splits::{Split, SplitAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Random,
    Bm25,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub query_id: String,
    pub judgment_id: String,
    pub positive: u32,
    pub negatives: Vec<u32>,
    pub provenance: Vec<Provenance>,
    /// Set when the judgment had fewer non-relevant paragraphs than requested.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short: bool,
}

impl TrainingInstance {
    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeSpec {
    pub n_random: usize,
    pub n_bm25: usize,
}

impl NegativeSpec {
    pub fn total(&self) -> usize {
        self.n_random + self.n_bm25
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Dpr,
    Colbert,
    Cross,
}

impl Preset {
    pub fn spec(self) -> NegativeSpec {
        match self {
            Preset::Dpr => NegativeSpec { n_random: 1, n_bm25: 4 },
            Preset::Colbert | Preset::Cross => NegativeSpec { n_random: 4, n_bm25: 3 },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Dpr => "dpr",
            Preset::Colbert => "colbert",
            Preset::Cross => "cross",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpr" => Ok(Preset::Dpr),
            "colbert" => Ok(Preset::Colbert),
            "cross" => Ok(Preset::Cross),
            other => Err(Error::Config(format!("unknown negative preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negatives {
    pub nums: Vec<u32>,
    pub provenance: Vec<Provenance>,
    pub short: bool,
}

fn check_ranking(ranking: &Ranking, judgment: &Judgment) -> Result<()> {
    let ranked: BTreeSet<u32> = ranking.order().collect();
    let missing: Vec<u32> = judgment.nums().filter(|n| !ranked.contains(n)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::IncompleteScores {
            judgment_id: judgment.judgment_id.clone(),
            missing,
        })
    }
}

/// Top BM25 non-relevant paragraphs first, then a seeded uniform draw from the rest.
pub fn sample_static_negatives(
    relevant: &BTreeSet<u32>,
    judgment: &Judgment,
    bm25_ranking: &Ranking,
    spec: NegativeSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Negatives> {
    check_ranking(bm25_ranking, judgment)?;
    let mut taken = BTreeSet::new();
    let mut nums = Vec::with_capacity(spec.total());
    let mut provenance = Vec::with_capacity(spec.total());
    for num in bm25_ranking.order().filter(|n| !relevant.contains(n)) {
        if nums.len() == spec.n_bm25 {
            break;
        }
        if taken.insert(num) {
            nums.push(num);
            provenance.push(Provenance::Bm25);
        }
    }
    let mut pool: Vec<u32> = judgment
        .nums()
        .filter(|n| !relevant.contains(n) && !taken.contains(n))
        .collect();
    let (picked, _) = pool.partial_shuffle(rng, spec.n_random);
    for &num in picked.iter() {
        nums.push(num);
        provenance.push(Provenance::Random);
    }
    let short = nums.len() < spec.total();
    Ok(Negatives { nums, provenance, short })
}

/// The `n` top-scoring non-relevant paragraphs; ties go to the lower number.
pub fn refresh_model_negatives(
    relevant: &BTreeSet<u32>,
    judgment: &Judgment,
    model_scores: &HashMap<u32, f64>,
    n: usize,
) -> Result<Negatives> {
    let missing: Vec<u32> = judgment.nums().filter(|k| !model_scores.contains_key(k)).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteScores {
            judgment_id: judgment.judgment_id.clone(),
            missing,
        });
    }
    let mut candidates: Vec<(u32, f64)> = judgment
        .nums()
        .filter(|k| !relevant.contains(k))
        .map(|k| (k, model_scores[&k]))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(n);
    let nums: Vec<u32> = candidates.into_iter().map(|(k, _)| k).collect();
    Ok(Negatives {
        provenance: vec![Provenance::Model; nums.len()],
        short: nums.len() < n,
        nums,
    })
}

/// Per-instance RNG, independent of iteration order and thread count.
pub fn instance_rng(seed: u64, query_id: &str, judgment_id: &str, positive: u32) -> ChaCha8Rng {
    let s = seed.to_string();
    let p = positive.to_string();
    ChaCha8Rng::seed_from_u64(stable_seed(&[s.as_str(), query_id, judgment_id, p.as_str()]))
}

/// Records whose pair falls in one of `splits`, in canonical pair order.
pub fn filter_split<'a>(records: &'a [DatasetRecord], assignment: &SplitAssignment, splits: &[Split]) -> Vec<&'a DatasetRecord> {
    let mut out: Vec<&DatasetRecord> = records
        .iter()
        .filter(|r| assignment.split_of(&r.pair_id()).is_some_and(|s| splits.contains(&s)))
        .collect();
    out.sort_by_key(|r| r.pair_id());
    out
}

/// One instance per relevant paragraph of each record.
pub fn export_instances(
    records: &[&DatasetRecord],
    corpus: &Corpus,
    bm25: &HashMap<String, Ranking>,
    spec: NegativeSpec,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TrainingInstance>> {
    let per_pair = exec.try_map(records, |r| {
        let judgment = corpus.require(&r.judgment_id)?;
        let pid = r.pair_id();
        let ranking = bm25.get(&pid).ok_or_else(|| Error::MissingRanking(pid.clone()))?;
        r.relevant
            .iter()
            .map(|&positive| {
                let mut rng = instance_rng(seed, &r.query_id, &r.judgment_id, positive);
                let neg = sample_static_negatives(&r.relevant, judgment, ranking, spec, &mut rng)?;
                Ok(TrainingInstance {
                    query_id: r.query_id.clone(),
                    judgment_id: r.judgment_id.clone(),
                    positive,
                    negatives: neg.nums,
                    provenance: neg.provenance,
                    short: neg.short,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_pair.into_iter().flatten().collect())
}

/// Replaces each instance's negatives with `n` model-derived ones.
pub fn refresh_instances(
    instances: &[TrainingInstance],
    records: &[DatasetRecord],
    corpus: &Corpus,
    scores: &crate::retrieval::ExternalScores,
    n: usize,
    exec: Execution,
) -> Result<Vec<TrainingInstance>> {
    let relevant: HashMap<String, &BTreeSet<u32>> = records.iter().map(|r| (r.pair_id(), &r.relevant)).collect();
    let empty = HashMap::new();
    exec.try_map(instances, |inst| {
        let judgment = corpus.require(&inst.judgment_id)?;
        let pid = crate::corpus_model::pair_id(&inst.query_id, &inst.judgment_id);
        let rel = relevant.get(&pid).ok_or_else(|| Error::MissingRanking(pid.clone()))?;
        let pair_scores = scores.pair(&inst.query_id, &inst.judgment_id).unwrap_or(&empty);
        let neg = refresh_model_negatives(rel, judgment, pair_scores, n)?;
        Ok(TrainingInstance {
            negatives: neg.nums,
            provenance: neg.provenance,
            short: neg.short,
            ..inst.clone()
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_model::Paragraph;
    use crate::retrieval::rank_paragraphs;
    use proptest::prelude::*;

    fn judgment(n: u32) -> Judgment {
        Judgment {
            judgment_id: "j".into(),
            title: String::new(),
            paragraphs: (1..=n)
                .map(|num| Paragraph {
                    num,
                    text: format!("{num}. text"),
                })
                .collect(),
        }
    }

    fn ranking_desc(n: u32) -> Ranking {
        rank_paragraphs("q", "j", (1..=n).map(|k| (k, f64::from(n - k))))
    }

    #[test]
    fn dpr_preset_counts() {
        let j = judgment(100);
        let rel = BTreeSet::from([1, 50]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let neg = sample_static_negatives(&rel, &j, &ranking_desc(100), Preset::Dpr.spec(), &mut rng).unwrap();
        assert_eq!(neg.nums.len(), 5);
        assert_eq!(&neg.nums[..4], &[2, 3, 4, 5]);
        assert_eq!(neg.provenance.iter().filter(|&&p| p == Provenance::Random).count(), 1);
        assert!(!neg.short);
        assert!(neg.nums.iter().all(|n| !rel.contains(n)));
    }

    #[test]
    fn colbert_preset_counts() {
        let j = judgment(30);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let neg = sample_static_negatives(&BTreeSet::from([4]), &j, &ranking_desc(30), Preset::Colbert.spec(), &mut rng).unwrap();
        assert_eq!(neg.nums.len(), 7);
        assert_eq!(neg.provenance.iter().filter(|&&p| p == Provenance::Bm25).count(), 3);
    }

    #[test]
    fn short_when_too_few_non_relevant() {
        let j = judgment(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let neg = sample_static_negatives(&BTreeSet::from([1]), &j, &ranking_desc(2), Preset::Dpr.spec(), &mut rng).unwrap();
        assert_eq!(neg.nums, vec![2]);
        assert!(neg.short);
    }

    #[test]
    fn refresh_skips_relevant_and_breaks_ties_low() {
        let j = judgment(6);
        let scores: HashMap<u32, f64> = [(1, 9.0), (2, 1.0), (3, 5.0), (4, 5.0), (5, 0.0), (6, 7.0)].into();
        let neg = refresh_model_negatives(&BTreeSet::from([1]), &j, &scores, 3).unwrap();
        assert_eq!(neg.nums, vec![6, 3, 4]);
        assert!(refresh_model_negatives(&BTreeSet::from([1]), &j, &scores, 0).unwrap().nums.is_empty());
        let flat: HashMap<u32, f64> = (1..=6).map(|k| (k, 0.5)).collect();
        assert_eq!(refresh_model_negatives(&BTreeSet::from([2]), &j, &flat, 2).unwrap().nums, vec![1, 3]);
    }

    #[test]
    fn refresh_requires_complete_scores() {
        let j = judgment(3);
        let scores: HashMap<u32, f64> = [(1, 1.0), (3, 0.0)].into();
        assert!(matches!(
            refresh_model_negatives(&BTreeSet::new(), &j, &scores, 1),
            Err(Error::IncompleteScores { missing, .. }) if missing == vec![2]
        ));
    }

    #[test]
    fn short_flag_omitted_when_false() {
        let inst = TrainingInstance {
            query_id: "q".into(),
            judgment_id: "j".into(),
            positive: 3,
            negatives: vec![1],
            provenance: vec![Provenance::Bm25],
            short: false,
        };
        assert_eq!(
            serde_json::to_string(&inst).unwrap(),
            r#"{"query_id":"q","judgment_id":"j","positive":3,"negatives":[1],"provenance":["bm25"]}"#
        );
    }

    proptest! {
        #[test]
        fn negatives_valid(n in 1u32..40, rel in prop::collection::btree_set(1u32..40, 1..5), seed in any::<u64>(), nr in 0usize..6, nb in 0usize..6) {
            let j = judgment(n);
            let rel: BTreeSet<u32> = rel.into_iter().filter(|&k| k <= n).collect();
            let scores = (1..=n).map(|k| (k, f64::from((k * 7919) % 13)));
            let ranking = rank_paragraphs("q", "j", scores);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let neg = sample_static_negatives(&rel, &j, &ranking, NegativeSpec { n_random: nr, n_bm25: nb }, &mut rng).unwrap();
            let uniq: BTreeSet<u32> = neg.nums.iter().copied().collect();
            prop_assert_eq!(uniq.len(), neg.nums.len());
            prop_assert!(neg.nums.iter().all(|k| !rel.contains(k) && *k >= 1 && *k <= n));
            let available = n as usize - rel.len();
            prop_assert_eq!(neg.nums.len(), (nr + nb).min(available));
            prop_assert_eq!(neg.short, available < nr + nb);
        }

        #[test]
        fn seed_only_moves_random_negatives(seed_a in any::<u64>(), seed_b in any::<u64>()) {
            let j = judgment(40);
            let rel = BTreeSet::from([7]);
            let r = ranking_desc(40);
            let spec = Preset::Colbert.spec();
            let a = sample_static_negatives(&rel, &j, &r, spec, &mut ChaCha8Rng::seed_from_u64(seed_a)).unwrap();
            let b = sample_static_negatives(&rel, &j, &r, spec, &mut ChaCha8Rng::seed_from_u64(seed_b)).unwrap();
            prop_assert_eq!(&a.nums[..3], &b.nums[..3]);
        }
    }
}
