//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use jurisrank_core::corpus_model::{Corpus, DatasetRecord, Judgment, Paragraph, RankedParagraph, Ranking};
use jurisrank_core::evalkit::{recall_at_percent, CorpusStats, ResultsTable};
use jurisrank_core::guide_dataset::parse_pinpoint_citations;
use jurisrank_core::io::read_jsonl;
use jurisrank_core::par::Execution;
use jurisrank_core::pipeline::{run_pipeline, RunConfig, DATASET_FILE, RESULTS_FILE, STATS_FILE, TRAIN_FILE};
use jurisrank_core::retrieval::{bm25_score, maxsim_score, score_pairs, Bm25Params, Matrix, Scorer, TermIndex, Tokenizer};
use jurisrank_core::splits::{make_splits, verify_splits, GuideHoldout, Split, SplitRatios};
use jurisrank_core::train_export::{export_instances, filter_split, Preset, Provenance, TrainingInstance};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CITATION_BUDGET: Duration = Duration::from_secs(1);
const BM25_TOLERANCE: f64 = 1e-6;
const MAXSIM_TOLERANCE: f64 = 1e-6;
/// Reordering query rows reorders a floating-point sum.
const PERMUTATION_TOLERANCE: f64 = 1e-9;
const E2E_BUDGET: Duration = Duration::from_secs(60);
const TABLE1_TOLERANCE: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Citation grammar

#[derive(Clone, Copy)]
enum Item {
    One(u32),
    Span(u32, u32),
}

struct CitationCase {
    text: String,
    refs: Vec<(&'static str, Vec<Item>)>,
    malformed: Vec<&'static str>,
}

fn case(text: &str, refs: Vec<(&'static str, Vec<Item>)>, malformed: Vec<&'static str>) -> CitationCase {
    CitationCase {
        text: text.to_string(),
        refs,
        malformed,
    }
}

/// Brute-force expansion: every range walked one number at a time.
fn expand(items: &[Item]) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for item in items {
        match *item {
            Item::One(n) => {
                out.insert(n);
            }
            Item::Span(a, b) => {
                let mut k = a;
                while k <= b {
                    out.insert(k);
                    k += 1;
                }
            }
        }
    }
    out
}

fn hand_citations() -> Vec<CitationCase> {
    use Item::*;
    vec![
        case("Rantsev v. Cyprus and Russia, 2010, § 281.", vec![("Rantsev v. Cyprus and Russia, 2010", vec![One(281)])], vec![]),
        case("Siliadin v. France, 2005, §§ 112-113", vec![("Siliadin v. France, 2005", vec![Span(112, 113)])], vec![]),
        case("C.N. v. the United Kingdom, 2012, §§ 65-69 and 80", vec![("C.N. v. the United Kingdom, 2012", vec![Span(65, 69), One(80)])], vec![]),
        case("See Chowdury and Others v. Greece, 2017, §§ 86, 89-93, 96", vec![("Chowdury and Others v. Greece, 2017", vec![One(86), Span(89, 93), One(96)])], vec![]),
        case("Stummer v. Austria [GC], 2011, § 117 & 121", vec![("Stummer v. Austria [GC], 2011", vec![One(117), One(121)])], vec![]),
        case("S.M. v. Croatia, 2020, §§ 290–292", vec![("S.M. v. Croatia, 2020", vec![Span(290, 292)])], vec![]),
        case(
            "Siliadin v. France, 2005, § 112; later Siliadin v. France, 2005, §§ 120-121.",
            vec![("Siliadin v. France, 2005", vec![One(112), Span(120, 121)])],
            vec![],
        ),
        case(
            "Van der Mussele v. Belgium, 1983, § 32, and Graziani-Weiss v. Austria, 2011, §§ 36-38.",
            vec![("Van der Mussele v. Belgium, 1983", vec![One(32)]), ("Graziani-Weiss v. Austria, 2011", vec![Span(36, 38)])],
            vec![],
        ),
        case("L.E. v. Greece, 2016, §§ 70-64", vec![], vec!["L.E. v. Greece, 2016"]),
        case(
            "J. and Others v. Austria, 2017, §§ 109-107; Tibet Mentes and Others v. Turkey, 2017, § 3",
            vec![("Tibet Mentes and Others v. Turkey, 2017", vec![One(3)])],
            vec!["J. and Others v. Austria, 2017"],
        ),
        case("Zarb Adami v. Malta, 2006, § 44, 21 October 2010", vec![("Zarb Adami v. Malta, 2006", vec![One(44)])], vec![]),
        case("Karlheinz Schmidt v. Germany, 1994, §§ 22 and 23", vec![("Karlheinz Schmidt v. Germany, 1994", vec![One(22), One(23)])], vec![]),
        case("Adigüzel v. Turkey (dec.), 2005, §§ 5-9", vec![("Adigüzel v. Turkey (dec.), 2005", vec![Span(5, 9)])], vec![]),
        case("Meier v. Switzerland, no. 10109/14, § 64", vec![("Meier v. Switzerland", vec![One(64)])], vec![]),
        case("Chitos v. Greece, cited above, §§ 84-85, 90", vec![("Chitos v. Greece", vec![Span(84, 85), One(90)])], vec![]),
        case("Radi v. Ghana, 2001, § 9-9", vec![], vec!["Radi v. Ghana, 2001"]),
    ]
}

const LEFT: &[&str] = &["Halloran", "Petrescu", "Vasquez and Others", "Nordahl", "Keller", "Moreau", "Brandt", "Kaya", "Horvath"];
const RIGHT: &[&str] = &["Malta", "Romania", "Spain", "Norway", "Switzerland", "France", "Germany", "Turkey", "Hungary"];
const SEPARATORS: &[&str] = &[", ", " and ", " & ", ", and "];

fn generated_citations(count: usize, rng: &mut ChaCha8Rng) -> Vec<CitationCase> {
    let labels: Vec<&'static str> = (0..LEFT.len())
        .map(|i| &*Box::leak(format!("{} v. {}, {}", LEFT[i], RIGHT[i], 2000 + i).into_boxed_str()))
        .collect();
    (0..count)
        .map(|_| {
            let n_cites = rng.random_range(1..=3);
            let mut parts = Vec::new();
            let mut refs = Vec::new();
            let mut malformed = Vec::new();
            for _ in 0..n_cites {
                let label = labels[rng.random_range(0..labels.len())];
                let n_items = rng.random_range(1..=4);
                let mut items = Vec::new();
                let mut rendered = Vec::new();
                let mut bad = false;
                for _ in 0..n_items {
                    let a = rng.random_range(1..400u32);
                    if rng.random_bool(0.4) {
                        let width = rng.random_range(1..6u32);
                        if rng.random_bool(0.05) {
                            rendered.push(format!("{}-{}", a + width, a));
                            bad = true;
                        } else {
                            rendered.push(format!("{a}-{}", a + width));
                            items.push(Item::Span(a, a + width));
                        }
                    } else {
                        rendered.push(a.to_string());
                        items.push(Item::One(a));
                    }
                }
                let mut list = rendered[0].clone();
                for r in &rendered[1..] {
                    list.push_str(SEPARATORS[rng.random_range(0..SEPARATORS.len())]);
                    list.push_str(r);
                }
                let sign = if rendered.len() > 1 || list.contains('-') { "§§" } else { "§" };
                parts.push(format!("{label}, {sign} {list}"));
                if bad {
                    malformed.push(label);
                } else {
                    refs.push((label, items));
                }
            }
            CitationCase {
                text: parts.join("; ") + ".",
                refs,
                malformed,
            }
        })
        .collect()
}

fn check_citation(c: &CitationCase) -> Result<(), String> {
    let scan = parse_pinpoint_citations(&c.text);
    let mut want: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (label, items) in &c.refs {
        want.entry(label).or_default().extend(expand(items));
    }
    // A label that is malformed in one mention but valid in another keeps its valid numbers.
    let got: BTreeMap<&str, BTreeSet<u32>> = scan
        .refs
        .iter()
        .map(|r| (r.case_label.as_str(), r.paragraph_nums.clone()))
        .collect();
    ensure(got == want, || format!("{:?}: got {got:?}, want {want:?}", c.text))?;
    let got_bad: BTreeSet<&str> = scan.malformed.iter().map(|m| m.case_label.as_str()).collect();
    let want_bad: BTreeSet<&str> = c.malformed.iter().copied().collect();
    ensure(got_bad == want_bad, || format!("{:?}: malformed {got_bad:?}, want {want_bad:?}", c.text))
}

fn citation_grammar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0C17);
    let mut cases = hand_citations();
    let hand = cases.len();
    cases.extend(generated_citations(300, &mut rng));
    let malformed = cases.iter().filter(|c| !c.malformed.is_empty()).count();
    let started = Instant::now();
    for c in &cases {
        check_citation(c)?;
    }
    let elapsed = started.elapsed();
    ensure(hand >= 16 && cases.len() >= 30, || "too few fixtures".into())?;
    ensure(malformed > 0, || "no malformed fixture exercised".into())?;
    ensure(elapsed < CITATION_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} strings ({hand} hand-written, {malformed} with malformed ranges) in {elapsed:?}", cases.len()))
}

// ---------------------------------------------------------------------------
// BM25

/// Direct per-paragraph evaluation of the scoring formula from token lists.
fn bm25_oracle(paragraphs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<f64> {
    let n = paragraphs.len() as f64;
    let avgdl = paragraphs.iter().map(|p| p.len() as f64).sum::<f64>() / n;
    let mut terms: Vec<&String> = Vec::new();
    for t in query {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    paragraphs
        .iter()
        .map(|p| {
            let mut s = 0.0;
            for t in &terms {
                let df = paragraphs.iter().filter(|q| q.contains(t)).count() as f64;
                let tf = p.iter().filter(|w| w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * p.len() as f64 / avgdl));
            }
            s
        })
        .collect()
}

fn bm25_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB325);
    let mut params = vec![(1.2, 0.75)];
    for _ in 0..5 {
        params.push((rng.random_range(0.0..3.0), rng.random_range(0.0..=1.0)));
    }
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for case in 0..200 {
        let vocab = rng.random_range(2..=100usize);
        let n = rng.random_range(3..=50usize);
        let paragraphs: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=60);
                (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
            })
            .collect();
        let judgment = Judgment {
            judgment_id: format!("j{case}"),
            title: String::new(),
            paragraphs: paragraphs
                .iter()
                .enumerate()
                .map(|(i, words)| Paragraph {
                    num: i as u32 + 1,
                    text: words.join(" "),
                })
                .collect(),
        };
        let query: Vec<String> = (0..rng.random_range(1..=8)).map(|_| format!("w{}", rng.random_range(0..vocab + 5))).collect();
        let index = TermIndex::build(&judgment, Tokenizer);
        for &(k1, b) in &params {
            let got = bm25_score(&query.join(" "), &index, Bm25Params::new(k1, b).unwrap());
            let want = bm25_oracle(&paragraphs, &query, k1, b);
            for ((num, g), w) in got.iter().zip(&want) {
                let d = (g - w).abs();
                worst = worst.max(d);
                compared += 1;
                ensure(d <= BM25_TOLERANCE, || format!("case {case} para {num} k1={k1} b={b}: {g} vs {w}"))?;
            }
        }
    }
    Ok(format!("200 judgments x 6 parameter sets, {compared} scores, max |diff| {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// MaxSim

fn maxsim_oracle(q: &[Vec<f32>], d: &[Vec<f32>], normalize: bool) -> f64 {
    let unit = |r: &Vec<f32>| -> Vec<f64> {
        let v: Vec<f64> = r.iter().map(|&x| x as f64).collect();
        if !normalize {
            return v;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v
        } else {
            v.iter().map(|x| x / norm).collect()
        }
    };
    let mut total = 0.0;
    for qi in q {
        let a = unit(qi);
        let mut best = f64::NEG_INFINITY;
        for dj in d {
            let bb = unit(dj);
            let mut s = 0.0;
            for k in 0..a.len() {
                s += a[k] * bb[k];
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

fn flat(rows: &[Vec<f32>]) -> Vec<f32> {
    rows.iter().flatten().copied().collect()
}

fn maxsim_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3A25);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let dim = rng.random_range(1..=64usize);
        let rows = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f32>> {
            (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()
        };
        let q = rows(rng.random_range(1..=12), &mut rng);
        let d = rows(rng.random_range(1..=30), &mut rng);
        let extra = rows(rng.random_range(1..=5), &mut rng);
        let normalize = case % 2 == 0;
        let score = |q: &[Vec<f32>], d: &[Vec<f32>]| {
            let (qf, df) = (flat(q), flat(d));
            maxsim_score(Matrix::new(&qf, dim).unwrap(), Matrix::new(&df, dim).unwrap(), normalize).unwrap()
        };
        let got = score(&q, &d);
        let want = maxsim_oracle(&q, &d, normalize);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= MAXSIM_TOLERANCE, || format!("case {case}: {got} vs {want}"))?;

        let mut qp = q.clone();
        let mut dp = d.clone();
        qp.shuffle(&mut rng);
        dp.shuffle(&mut rng);
        let permuted = score(&qp, &dp);
        ensure((permuted - got).abs() <= PERMUTATION_TOLERANCE, || format!("case {case}: permutation moved {got} to {permuted}"))?;

        let mut longer = d.clone();
        longer.extend(extra);
        let appended = score(&q, &longer);
        ensure(appended >= got, || format!("case {case}: appending rows lowered {got} to {appended}"))?;
    }
    Ok(format!("500 cases, max |diff| {worst:.2e}; permutation and append checks held"))
}

// ---------------------------------------------------------------------------
// Recall@k%

fn ranking_of(order: &[u32]) -> Ranking {
    Ranking {
        query_id: "q".into(),
        judgment_id: "j".into(),
        entries: order
            .iter()
            .enumerate()
            .map(|(i, &num)| RankedParagraph {
                num,
                score: (order.len() - i) as f64,
            })
            .collect(),
    }
}

/// Integer cutoff: ceil(k·n/100), at least one.
fn oracle_cutoff(k: u32, n: usize) -> usize {
    ((k as usize * n).div_ceil(100)).max(1)
}

fn recall_oracle(order: &[u32], relevant: &BTreeSet<u32>, k: u32) -> f64 {
    let m = oracle_cutoff(k, order.len());
    let top: Vec<u32> = order.iter().take(m).copied().collect();
    let mut hits = 0;
    for r in relevant {
        if top.contains(r) {
            hits += 1;
        }
    }
    hits as f64 / relevant.len() as f64
}

fn recall_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4EC4);
    let (mut perfect, mut worst) = (0, 0);
    for case in 0..1000 {
        let n = rng.random_range(1..=300u32);
        let mut order: Vec<u32> = (1..=n).collect();
        order.shuffle(&mut rng);
        let size = rng.random_range(1..=n.min(10)) as usize;
        let relevant: BTreeSet<u32> = order.choose_multiple(&mut rng, size).copied().collect();
        let k = rng.random_range(1..=100u32);
        let got = recall_at_percent(&ranking_of(&order), &relevant, k as f64).unwrap();
        let want = recall_oracle(&order, &relevant, k);
        ensure(got == want, || format!("case {case}: n={n} k={k} got {got} want {want}"))?;

        let mut prev = 0.0;
        for kk in 1..=100 {
            let v = recall_at_percent(&ranking_of(&order), &relevant, kk as f64).unwrap();
            ensure(v >= prev, || format!("case {case}: not monotone at k={kk}"))?;
            prev = v;
        }

        let best: Vec<u32> = relevant.iter().copied().chain(order.iter().copied().filter(|x| !relevant.contains(x))).collect();
        let last: Vec<u32> = order.iter().copied().filter(|x| !relevant.contains(x)).chain(relevant.iter().copied()).collect();
        let m = oracle_cutoff(k, n as usize);
        if m >= relevant.len() {
            perfect += 1;
            ensure(recall_at_percent(&ranking_of(&best), &relevant, k as f64).unwrap() == 1.0, || format!("case {case}: perfect ranking below 1"))?;
        }
        if m <= n as usize - relevant.len() {
            worst += 1;
            ensure(recall_at_percent(&ranking_of(&last), &relevant, k as f64).unwrap() == 0.0, || format!("case {case}: worst ranking above 0"))?;
        }
    }
    Ok(format!("1000 instances exact; monotone over k=1..100; {perfect} perfect and {worst} worst-case regimes checked"))
}

// ---------------------------------------------------------------------------
// Splits

fn synthetic_dataset(guides: usize, rng: &mut ChaCha8Rng) -> Vec<DatasetRecord> {
    let mut out = Vec::new();
    for g in 0..guides {
        for q in 0..rng.random_range(1..=6) {
            let query = format!("g{g}q{q}");
            for j in 0..rng.random_range(1..=5) {
                out.push(DatasetRecord {
                    query_id: query.clone(),
                    guide_id: format!("g{g}"),
                    path: vec![format!("g{g}"), query.clone()],
                    query_text: query.clone(),
                    judgment_id: format!("j{}", (g * 7 + j * 3) % 40),
                    relevant: BTreeSet::from([1]),
                });
            }
        }
    }
    out
}

fn split_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5911);
    for case in 0..50 {
        let guides = rng.random_range(5..=40);
        let data = synthetic_dataset(guides, &mut rng);
        let ratios = SplitRatios {
            guide_holdout: if case % 2 == 0 {
                GuideHoldout::Fraction(0.2)
            } else {
                GuideHoldout::Guides(BTreeSet::from([format!("g{}", rng.random_range(0..guides))]))
            },
            ..SplitRatios::default()
        };
        let seed = rng.random();
        let a = make_splits(&data, &ratios, seed).map_err(|e| format!("case {case}: {e}"))?;
        let v = verify_splits(&a, &data);
        ensure(v.is_empty(), || format!("case {case}: {v:?}"))?;
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut rng);
        let b = make_splits(&shuffled, &ratios, seed).unwrap();
        ensure(a == b, || format!("case {case}: assignment depends on input order"))?;
    }

    // Benchmark-shaped runs: one held-out guide plus a 0.2 query holdout.
    let data = synthetic_dataset(20, &mut ChaCha8Rng::seed_from_u64(20));
    let ratios = SplitRatios {
        guide_holdout: GuideHoldout::Guides(BTreeSet::from(["g3".to_string()])),
        ..SplitRatios::default()
    };
    let counts = make_splits(&data, &ratios, 13).unwrap().counts();
    ensure(counts.values().all(|&n| n > 0), || format!("synthetic buckets {counts:?}"))?;
    let fixture = fixture_run_dataset()?;
    let ratios = SplitRatios {
        guide_holdout: GuideHoldout::Guides(BTreeSet::from(["art10".to_string()])),
        ..SplitRatios::default()
    };
    let fixture_counts = make_splits(&fixture, &ratios, 13).unwrap().counts();
    ensure(fixture_counts.values().all(|&n| n > 0), || format!("fixture buckets {fixture_counts:?}"))?;
    let show = |c: &BTreeMap<Split, usize>| c.values().map(usize::to_string).collect::<Vec<_>>().join("/");
    Ok(format!(
        "50 fuzzed datasets clean and order-invariant; benchmark-shaped buckets {} (synthetic), {} (fixture)",
        show(&counts),
        show(&fixture_counts)
    ))
}

// ---------------------------------------------------------------------------
// Negative sampling

fn random_judgment(id: &str, n: u32, rng: &mut ChaCha8Rng) -> Judgment {
    Judgment {
        judgment_id: id.into(),
        title: String::new(),
        paragraphs: (1..=n)
            .map(|num| Paragraph {
                num,
                text: format!("{num}. {}", (0..rng.random_range(3..20)).map(|_| format!("t{}", rng.random_range(0..30))).collect::<Vec<_>>().join(" ")),
            })
            .collect(),
    }
}

fn negative_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E6A);
    // Preset counts on a roomy judgment.
    let big = random_judgment("big", 100, &mut rng);
    let corpus = Corpus::new(vec![big]);
    let rec = DatasetRecord {
        query_id: "q".into(),
        guide_id: "g".into(),
        path: vec!["g".into()],
        query_text: "t1 t2 t3".into(),
        judgment_id: "big".into(),
        relevant: BTreeSet::from([5, 17]),
    };
    let bm25 = bm25_map(std::slice::from_ref(&rec), &corpus);
    for (preset, random, lexical) in [(Preset::Dpr, 1, 4), (Preset::Colbert, 4, 3), (Preset::Cross, 4, 3)] {
        let inst = export_instances(&[&rec], &corpus, &bm25, preset.spec(), 1, Execution::Sequential).unwrap();
        for i in &inst {
            ensure(i.count(Provenance::Random) == random && i.count(Provenance::Bm25) == lexical && !i.short, || {
                format!("{preset}: {:?}", i.provenance)
            })?;
        }
    }

    // Fuzzed instances.
    let mut total = 0usize;
    let mut round = 0u64;
    while total < 10_000 {
        round += 1;
        let judgments: Vec<Judgment> = (0..20).map(|i| random_judgment(&format!("j{i}"), rng.random_range(1..=60), &mut rng)).collect();
        let records: Vec<DatasetRecord> = (0..80)
            .map(|i| {
                let j = &judgments[rng.random_range(0..judgments.len())];
                let n = j.len() as u32;
                let size = rng.random_range(1..=n.min(6));
                let relevant: BTreeSet<u32> = (0..size).map(|_| rng.random_range(1..=n)).collect();
                DatasetRecord {
                    query_id: format!("q{i}"),
                    guide_id: "g".into(),
                    path: vec![format!("q{i}")],
                    query_text: format!("t{} t{}", rng.random_range(0..30), rng.random_range(0..30)),
                    judgment_id: j.judgment_id.clone(),
                    relevant,
                }
            })
            .collect();
        let corpus = Corpus::new(judgments);
        let refs: Vec<&DatasetRecord> = records.iter().collect();
        let bm25 = bm25_map(&records, &corpus);
        let preset = if round.is_multiple_of(2) { Preset::Dpr } else { Preset::Colbert };
        let out = export_instances(&refs, &corpus, &bm25, preset.spec(), round, Execution::Parallel).unwrap();
        let by_pair: HashMap<String, &DatasetRecord> = records.iter().map(|r| (r.pair_id(), r)).collect();
        for inst in &out {
            let r = by_pair[&format!("{}|{}", inst.query_id, inst.judgment_id)];
            let j = corpus.get(&inst.judgment_id).unwrap();
            ensure(r.relevant.contains(&inst.positive), || "positive not relevant".into())?;
            let uniq: BTreeSet<u32> = inst.negatives.iter().copied().collect();
            ensure(uniq.len() == inst.negatives.len(), || "duplicate negative".into())?;
            for n in &inst.negatives {
                ensure(!r.relevant.contains(n), || format!("relevant negative {n} in {inst:?}"))?;
                ensure(j.paragraph(*n).is_some(), || format!("negative {n} outside {}", j.judgment_id))?;
            }
            let available = j.len() - r.relevant.len();
            ensure(inst.negatives.len() == preset.spec().total().min(available), || format!("count {inst:?}"))?;
        }
        total += out.len();
    }

    // Byte-identical export across runs and execution modes.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_fixture(dir.path().join("a"), Execution::Parallel)?;
    let b = run_fixture(dir.path().join("b"), Execution::Sequential)?;
    let bytes = |p: &Path| std::fs::read(p.join(TRAIN_FILE)).map_err(|e| e.to_string());
    let (ta, tb) = (bytes(&a.0)?, bytes(&b.0)?);
    ensure(!ta.is_empty() && ta == tb, || "train.jsonl differs between runs".into())?;
    let lines = read_jsonl::<TrainingInstance>(&a.0.join(TRAIN_FILE)).map_err(|e| e.to_string())?.len();
    Ok(format!("presets exact; {total} fuzzed instances clean; fixture train.jsonl ({lines} instances) byte-identical"))
}

fn bm25_map(records: &[DatasetRecord], corpus: &Corpus) -> HashMap<String, Ranking> {
    let scorer = Scorer::Bm25 {
        params: Bm25Params::default(),
        tokenizer: Tokenizer,
    };
    score_pairs(records, corpus, &scorer, Execution::Sequential)
        .unwrap()
        .into_iter()
        .map(|r| (r.pair_id(), r))
        .collect()
}

// ---------------------------------------------------------------------------
// End to end

fn run_fixture(out: PathBuf, exec: Execution) -> Result<(PathBuf, Duration), String> {
    let mut cfg = RunConfig::load(&fixture_dir().join("run.json")).map_err(|e| e.to_string())?;
    cfg.output_dir = out.clone();
    let started = Instant::now();
    run_pipeline(&cfg, exec).map_err(|e| e.to_string())?;
    Ok((out, started.elapsed()))
}

fn fixture_run_dataset() -> Result<Vec<DatasetRecord>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&fixture_dir().join("run.json")).map_err(|e| e.to_string())?;
    cfg.output_dir = dir.path().to_path_buf();
    cfg.stages = vec![jurisrank_core::pipeline::Stage::Ingest, jurisrank_core::pipeline::Stage::BuildDataset];
    run_pipeline(&cfg, Execution::Sequential).map_err(|e| e.to_string())?;
    read_jsonl(&dir.path().join(DATASET_FILE)).map_err(|e| e.to_string())
}

/// Pairs worked out by hand from the fixture guides: (leaf title, judgment, relevant).
const EXPECTED_PAIRS: &[(&str, &str, &[u32])] = &[
    ("Domestic servitude", "001-200101", &[4, 5, 6]),
    ("Domestic servitude", "001-200102", &[9]),
    ("Domestic servitude", "001-200112", &[12, 14, 15]),
    ("Trafficking in human beings", "001-200103", &[7, 8]),
    ("Trafficking in human beings", "001-200101", &[11]),
    ("Definition of forced labour", "001-200102", &[15, 16, 17]),
    ("Definition of forced labour", "001-200112", &[20]),
    ("Work exacted during detention", "001-200103", &[10]),
    ("Work exacted during detention", "001-200112", &[25, 26]),
    ("Duty to investigate", "001-200101", &[8, 9]),
    ("Duty to investigate", "001-200102", &[20]),
    ("Legislative framework", "001-200112", &[3, 5]),
    ("Legislative framework", "001-200103", &[14]),
    ("Storage of personal data", "001-200104", &[10, 11, 12, 13]),
    ("Storage of personal data", "001-200105", &[6]),
    ("Retention periods", "001-200104", &[22]),
    ("Retention periods", "001-200106", &[18, 19]),
    ("Disclosure of health data", "001-200106", &[9]),
    ("Disclosure of health data", "001-200107", &[4, 7]),
    ("Workplace monitoring", "001-200107", &[11, 12, 13]),
    ("Workplace monitoring", "001-200112", &[22]),
    ("Secret surveillance", "001-200105", &[8, 9]),
    ("Secret surveillance", "001-200104", &[25, 26, 27]),
    ("Secret surveillance", "001-200106", &[23]),
    ("Remedies and safeguards", "001-200104", &[30]),
    ("Remedies and safeguards", "001-200107", &[17]),
    ("Defamation of politicians", "001-200108", &[6, 7, 8]),
    ("Defamation of politicians", "001-200109", &[14]),
    ("Defamation of politicians", "001-200110", &[21]),
    ("Value judgments and facts", "001-200109", &[20, 21]),
    ("Value judgments and facts", "001-200111", &[9, 10, 11]),
    ("Publication bans", "001-200110", &[5, 6]),
    ("Publication bans", "001-200108", &[12]),
    ("Internet blocking", "001-200109", &[30, 31, 32, 33]),
    ("Internet blocking", "001-200110", &[16]),
];

struct Reference {
    count: usize,
    min: f64,
    max: f64,
    /// Mean as an exact fraction.
    mean: (u64, u64),
    median: f64,
}

/// Hand count over the fixture: paragraph counts are 14, 22, 18, 31, 12, 26,
/// 20, 16, 35, 24, 11 and 28; the other figures follow from the pairs above,
/// the leaf paths, and a word count of every paragraph.
const STATS_REFERENCE: [(&str, Reference); 4] = [
    ("paragraphs_per_judgment", Reference { count: 12, min: 11.0, max: 35.0, mean: (257, 12), median: 21.0 }),
    ("relevant_percent", Reference { count: 35, min: 20.0 / 7.0, max: 300.0 / 11.0, mean: (223_645, 25_389), median: 50.0 / 7.0 }),
    ("query_tokens", Reference { count: 16, min: 10.0, max: 16.0, mean: (101, 8), median: 12.5 }),
    ("paragraph_tokens", Reference { count: 257, min: 19.0, max: 76.0, mean: (11_116, 257), median: 43.0 }),
];

/// The relevant-percentage mean sums non-integral terms, so its last bit
/// depends on summation order.
const INEXACT_MEAN_TOLERANCE: f64 = 1e-12;

fn check_stats(stats: &CorpusStats) -> Result<(), String> {
    ensure(
        (stats.judgments, stats.paragraphs, stats.queries, stats.pairs) == (12, 257, 16, 35),
        || format!("totals {} {} {} {}", stats.judgments, stats.paragraphs, stats.queries, stats.pairs),
    )?;
    for (name, r) in &STATS_REFERENCE {
        let s = match *name {
            "paragraphs_per_judgment" => &stats.paragraphs_per_judgment,
            "relevant_percent" => &stats.relevant_percent,
            "query_tokens" => &stats.query_tokens,
            _ => &stats.paragraph_tokens,
        };
        let mean = r.mean.0 as f64 / r.mean.1 as f64;
        let mean_ok = if *name == "relevant_percent" {
            (s.mean - mean).abs() <= INEXACT_MEAN_TOLERANCE
        } else {
            s.mean == mean
        };
        ensure(
            s.count == r.count && s.min == r.min && s.max == r.max && s.median == r.median && mean_ok,
            || format!("{name}: {s:?}"),
        )?;
    }
    Ok(())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, ta) = run_fixture(dir.path().join("first"), Execution::Parallel)?;
    let (b, tb) = run_fixture(dir.path().join("second"), Execution::Parallel)?;
    ensure(ta.max(tb) < E2E_BUDGET, || format!("runs took {ta:?} and {tb:?}"))?;
    let read = |p: &Path| std::fs::read(p.join(RESULTS_FILE)).map_err(|e| e.to_string());
    ensure(read(&a)? == read(&b)?, || "results.json differs".into())?;
    let results: ResultsTable = serde_json::from_slice(&read(&a)?).map_err(|e| e.to_string())?;
    ensure(results.tables.len() == 4, || format!("tables {:?}", results.tables.keys()))?;

    let dataset: Vec<DatasetRecord> = read_jsonl(&a.join(DATASET_FILE)).map_err(|e| e.to_string())?;
    let got: BTreeSet<(String, String, Vec<u32>)> = dataset
        .iter()
        .map(|r| (r.path.last().unwrap().clone(), r.judgment_id.clone(), r.relevant.iter().copied().collect()))
        .collect();
    let want: BTreeSet<(String, String, Vec<u32>)> = EXPECTED_PAIRS
        .iter()
        .map(|(leaf, j, rel)| (leaf.to_string(), j.to_string(), rel.to_vec()))
        .collect();
    ensure(got == want && dataset.len() == want.len(), || {
        format!("dataset differs: extra {:?}, missing {:?}", got.difference(&want).collect::<Vec<_>>(), want.difference(&got).collect::<Vec<_>>())
    })?;

    let stats: CorpusStats = serde_json::from_slice(&std::fs::read(a.join(STATS_FILE)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check_stats(&stats)?;
    let train = filter_split(&dataset, &serde_json::from_slice(&std::fs::read(a.join("splits.json")).unwrap()).unwrap(), &[Split::Train]).len();
    Ok(format!("two runs in {ta:?} and {tb:?}; results.json identical; {} pairs as hand-labelled ({train} train); stats match", dataset.len()))
}

// ---------------------------------------------------------------------------
// Full-corpus reference recall (optional)

const TABLE1_BM25_SEEN_SEEN: [(f64, f64); 3] = [(2.0, 0.07), (5.0, 0.17), (10.0, 0.29)];

fn table1() -> Option<Outcome> {
    let config = std::env::var_os("JURISRANK_FULL_CONFIG")?;
    let run = || -> Outcome {
        let cfg = RunConfig::load(Path::new(&config)).map_err(|e| e.to_string())?;
        run_pipeline(&cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let results: ResultsTable = serde_json::from_slice(&std::fs::read(cfg.output_dir.join(RESULTS_FILE)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let row = results.tables.get(&Split::TestSeenSeen).ok_or("no seen-seen table")?;
        for (k, target) in TABLE1_BM25_SEEN_SEEN {
            let got = row.get(k).ok_or(format!("no k={k}"))?;
            ensure((got - target).abs() <= TABLE1_TOLERANCE, || format!("R@{k}% = {got:.3}, target {target}"))?;
        }
        Ok(format!("{:?}", row.0))
    };
    Some(run())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("citation grammar vs range-expansion oracle", citation_grammar),
        ("bm25 vs direct formula", bm25_equivalence),
        ("maxsim vs nested loop, permutation, append", maxsim_equivalence),
        ("recall@k% vs counting oracle", recall_equivalence),
        ("split leakage and determinism", split_leakage),
        ("negative sampler contracts", negative_contracts),
        ("end-to-end determinism and fixture stats", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    match table1() {
        None => println!("SKIP  full-corpus bm25 seen-seen recall (set JURISRANK_FULL_CONFIG to a full-corpus run config)"),
        Some(Ok(detail)) => println!("PASS  full-corpus bm25 seen-seen recall: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL  full-corpus bm25 seen-seen recall: {why}");
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
