//! File-backed stages and the configured end-to-end run.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus_model::{Corpus, DatasetRecord, Judgment, Ranking};
use crate::error::{Error, Result};
use crate::evalkit::{corpus_stats, evaluate_run, CorpusStats, EvalOptions, ResultsTable, RunInfo, DEFAULT_KS};
use crate::guide_dataset::{build_dataset, load_outlines, AliasTable, Assembly, DEFAULT_DELIMITER};
use crate::ingest::{ingest_dir, IngestReport, SegmentOptions};
use crate::io::{read_json, read_jsonl, sha256_dir, sha256_file, stable_hash, write_json, write_jsonl};
use crate::par::Execution;
use crate::retrieval::{
    load_external_scores, score_pairs, Bm25Params, EmbeddingStore, Method, Scorer, Tokenizer,
};
use crate::splits::{make_splits, verify_splits, Split, SplitAssignment, SplitRatios};
use crate::train_export::{export_instances, filter_split, refresh_instances, Preset, TrainingInstance};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const DROPS_FILE: &str = "drops.jsonl";
pub const SPLITS_FILE: &str = "splits.json";
pub const RANKINGS_FILE: &str = "rankings.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const RESULTS_FILE: &str = "results.json";
pub const STATS_FILE: &str = "stats.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let judgments: Vec<Judgment> = read_jsonl(path)?;
    for j in &judgments {
        let v = j.violations();
        if !v.is_empty() {
            return Err(Error::UnparseableJudgment {
                judgment_id: j.judgment_id.clone(),
                reason: v.join("; "),
            });
        }
    }
    Ok(Corpus::new(judgments))
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    read_jsonl(path)
}

// ---------------------------------------------------------------------------
// Individual stages

pub fn step_ingest(html_dir: &Path, metadata: &Path, start_num: u32, out: &Path, exec: Execution) -> Result<IngestReport> {
    let report = ingest_dir(html_dir, metadata, SegmentOptions { start_num }, exec)?;
    for id in &report.missing_html {
        log::warn!("no HTML for {id}");
    }
    for (id, reason) in &report.unparseable {
        log::warn!("skipped {id}: {reason}");
    }
    write_jsonl(out, &report.judgments)?;
    Ok(report)
}

pub fn step_build_dataset(
    corpus: &Path,
    outlines: &Path,
    aliases: &Path,
    delimiter: &str,
    dataset_out: &Path,
    drops_out: &Path,
) -> Result<Assembly> {
    let corpus = load_corpus(corpus)?;
    let guides = load_outlines(outlines)?;
    let table = AliasTable::load(aliases)?;
    let assembly = build_dataset(&guides, &table, &corpus, delimiter);
    for (reason, n) in assembly.drop_counts() {
        log::info!("dropped {n} citation(s): {reason}");
    }
    write_jsonl(dataset_out, &assembly.records)?;
    write_jsonl(drops_out, &assembly.drops)?;
    Ok(assembly)
}

pub fn step_split(dataset: &Path, ratios: &SplitRatios, seed: u64, out: &Path) -> Result<SplitAssignment> {
    let records = load_dataset(dataset)?;
    let assignment = make_splits(&records, ratios, seed)?;
    let violations = verify_splits(&assignment, &records);
    if !violations.is_empty() {
        return Err(Error::InfeasibleSplit(format!("{violations:?}")));
    }
    write_json(out, &assignment)?;
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSettings {
    pub method: Method,
    pub bm25: Bm25Params,
    pub normalize: bool,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

impl ScoreSettings {
    pub fn bm25(params: Bm25Params) -> Self {
        ScoreSettings {
            method: Method::Bm25,
            bm25: params,
            normalize: true,
            embeddings: None,
            scores: None,
        }
    }
}

/// Ranks every pair, or only the pairs assigned to a split when `splits` is given.
pub fn step_score(
    corpus: &Path,
    dataset: &Path,
    splits: Option<&Path>,
    settings: &ScoreSettings,
    out: &Path,
    exec: Execution,
) -> Result<Vec<Ranking>> {
    let corpus = load_corpus(corpus)?;
    let mut records = load_dataset(dataset)?;
    if let Some(path) = splits {
        let assignment: SplitAssignment = read_json(path)?;
        records.retain(|r| assignment.split_of(&r.pair_id()).is_some());
    }
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| Error::Config(format!("{} scoring needs {what}", settings.method)))
    };
    let store;
    let external;
    let scorer = match settings.method {
        Method::Bm25 => Scorer::Bm25 {
            params: settings.bm25,
            tokenizer: Tokenizer,
        },
        Method::Dot | Method::MaxSim => {
            store = EmbeddingStore::load(&need(&settings.embeddings, "an embeddings directory")?)?;
            if settings.method == Method::Dot {
                Scorer::Dot(&store)
            } else {
                Scorer::MaxSim {
                    store: &store,
                    normalize: settings.normalize,
                }
            }
        }
        Method::External => {
            external = load_external_scores(&need(&settings.scores, "a scores file")?)?;
            Scorer::External(&external)
        }
    };
    let rankings = score_pairs(&records, &corpus, &scorer, exec)?;
    write_jsonl(out, &rankings)?;
    Ok(rankings)
}

pub struct ExportSettings<'a> {
    pub preset: Preset,
    pub splits: &'a [Split],
    pub seed: u64,
    pub bm25: Bm25Params,
}

pub fn step_export(
    corpus: &Path,
    dataset: &Path,
    splits: &Path,
    settings: &ExportSettings<'_>,
    out: &Path,
    exec: Execution,
) -> Result<Vec<TrainingInstance>> {
    let corpus = load_corpus(corpus)?;
    let records = load_dataset(dataset)?;
    let assignment: SplitAssignment = read_json(splits)?;
    let chosen = filter_split(&records, &assignment, settings.splits);
    let owned: Vec<DatasetRecord> = chosen.iter().map(|r| (*r).clone()).collect();
    let scorer = Scorer::Bm25 {
        params: settings.bm25,
        tokenizer: Tokenizer,
    };
    let bm25: HashMap<String, Ranking> = score_pairs(&owned, &corpus, &scorer, exec)?
        .into_iter()
        .map(|r| (r.pair_id(), r))
        .collect();
    let instances = export_instances(&chosen, &corpus, &bm25, settings.preset.spec(), settings.seed, exec)?;
    let short = instances.iter().filter(|i| i.short).count();
    if short > 0 {
        log::warn!("{short} instance(s) have fewer negatives than requested");
    }
    write_jsonl(out, &instances)?;
    Ok(instances)
}

pub fn step_refresh(
    train: &Path,
    corpus: &Path,
    dataset: &Path,
    scores: &Path,
    n: usize,
    out: &Path,
    exec: Execution,
) -> Result<Vec<TrainingInstance>> {
    let instances: Vec<TrainingInstance> = read_jsonl(train)?;
    let corpus = load_corpus(corpus)?;
    let records = load_dataset(dataset)?;
    let scores = load_external_scores(scores)?;
    let refreshed = refresh_instances(&instances, &records, &corpus, &scores, n, exec)?;
    write_jsonl(out, &refreshed)?;
    Ok(refreshed)
}

pub fn step_eval(
    rankings: &Path,
    dataset: &Path,
    splits: &Path,
    opts: &EvalOptions,
    run: RunInfo,
    out: &Path,
    exec: Execution,
) -> Result<ResultsTable> {
    let rankings: Vec<Ranking> = read_jsonl(rankings)?;
    let records = load_dataset(dataset)?;
    let assignment: SplitAssignment = read_json(splits)?;
    let table = evaluate_run(&rankings, &records, &assignment, opts, run, exec)?;
    write_json(out, &table)?;
    Ok(table)
}

pub fn step_stats(corpus: &Path, dataset: &Path, out: &Path) -> Result<CorpusStats> {
    let corpus = load_corpus(corpus)?;
    let records = load_dataset(dataset)?;
    let stats = corpus_stats(&corpus, &records, Tokenizer)?;
    write_json(out, &stats)?;
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Configured runs

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    BuildDataset,
    Split,
    Score,
    ExportNegatives,
    Eval,
    Stats,
}

impl Stage {
    /// Every stage in dependency order.
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::BuildDataset,
        Stage::Split,
        Stage::Score,
        Stage::ExportNegatives,
        Stage::Eval,
        Stage::Stats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::BuildDataset => "build-dataset",
            Stage::Split => "split",
            Stage::Score => "score",
            Stage::ExportNegatives => "export-negatives",
            Stage::Eval => "eval",
            Stage::Stats => "stats",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[JUDGMENTS_FILE],
            Stage::BuildDataset => &[DATASET_FILE, DROPS_FILE],
            Stage::Split => &[SPLITS_FILE],
            Stage::Score => &[RANKINGS_FILE],
            Stage::ExportNegatives => &[TRAIN_FILE],
            Stage::Eval => &[RESULTS_FILE],
            Stage::Stats => &[STATS_FILE],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Inputs not produced by an earlier stage of the same run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub html_dir: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub outlines: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub splits: Option<PathBuf>,
    pub rankings: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_ks() -> Vec<f64> {
    DEFAULT_KS.to_vec()
}

fn default_delimiter() -> String {
    DEFAULT_DELIMITER.to_string()
}

fn default_method() -> Method {
    Method::Bm25
}

fn default_true() -> bool {
    true
}

fn default_start_num() -> u32 {
    1
}

/// A run described by one JSON file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default = "default_ks")]
    pub ks: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default = "default_start_num")]
    pub start_num: u32,
    #[serde(default)]
    pub macro_per_query: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(config.resolved(base))
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.html_dir,
            &mut i.metadata,
            &mut i.outlines,
            &mut i.aliases,
            &mut i.corpus,
            &mut i.dataset,
            &mut i.splits,
            &mut i.rankings,
            &mut i.embeddings,
            &mut i.scores,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self
    }

    /// Digest of the settings that affect outputs; paths are excluded so the
    /// same run hashes identically wherever it is checked out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            obj.remove("inputs");
        }
        stable_hash(&[v.to_string()])
    }

    fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    fn source(&self, produced_by: Stage, file: &str, given: &Option<PathBuf>, what: &str, needed_by: Stage) -> Result<PathBuf> {
        if self.has(produced_by) && produced_by < needed_by {
            return Ok(self.output_dir.join(file));
        }
        match given {
            Some(p) if p.exists() => Ok(p.clone()),
            Some(p) => Err(Error::Config(format!("{what} {} does not exist", p.display()))),
            None => Err(Error::Config(format!(
                "stage {needed_by} needs {what}: run {produced_by} or set inputs.{}",
                what.replace(' ', "_")
            ))),
        }
    }

    fn given(p: &Option<PathBuf>, what: &str, stage: Stage) -> Result<PathBuf> {
        match p {
            Some(p) if p.exists() => Ok(p.clone()),
            Some(p) => Err(Error::Config(format!("{what} {} does not exist", p.display()))),
            None => Err(Error::Config(format!("stage {stage} needs inputs.{what}"))),
        }
    }

    /// Checks the whole run before anything executes.
    pub fn validate(&self) -> Result<Plan> {
        let mut stages = self.stages.clone();
        stages.sort();
        stages.dedup();
        if stages.is_empty() {
            return Err(Error::Config("no stages requested".into()));
        }
        if self.output_dir.is_file() {
            return Err(Error::Config(format!("output_dir {} is a file", self.output_dir.display())));
        }
        Bm25Params::new(self.bm25.k1, self.bm25.b)?;
        if self.ks.is_empty() || self.ks.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Config(format!("ks must be positive, got {:?}", self.ks)));
        }
        let i = &self.inputs;
        let mut steps = Vec::new();
        for &stage in &stages {
            let corpus = || self.source(Stage::Ingest, JUDGMENTS_FILE, &i.corpus, "corpus", stage);
            let dataset = || self.source(Stage::BuildDataset, DATASET_FILE, &i.dataset, "dataset", stage);
            let splits = || self.source(Stage::Split, SPLITS_FILE, &i.splits, "splits", stage);
            let seed = || {
                self.seed
                    .ok_or_else(|| Error::Config(format!("stage {stage} needs a seed")))
            };
            let step = match stage {
                Stage::Ingest => Step::Ingest {
                    html_dir: Self::given(&i.html_dir, "html_dir", stage)?,
                    metadata: Self::given(&i.metadata, "metadata", stage)?,
                },
                Stage::BuildDataset => Step::BuildDataset {
                    corpus: corpus()?,
                    outlines: Self::given(&i.outlines, "outlines", stage)?,
                    aliases: Self::given(&i.aliases, "aliases", stage)?,
                },
                Stage::Split => {
                    self.split.check()?;
                    Step::Split {
                        dataset: dataset()?,
                        seed: seed()?,
                    }
                }
                Stage::Score => {
                    let mut settings = ScoreSettings::bm25(self.bm25);
                    settings.method = self.method;
                    settings.normalize = self.normalize;
                    match self.method {
                        Method::Dot | Method::MaxSim => {
                            let dir = Self::given(&i.embeddings, "embeddings", stage)?;
                            if !dir.join("manifest.json").is_file() {
                                return Err(Error::Config(format!(
                                    "embeddings directory {} has no manifest.json",
                                    dir.display()
                                )));
                            }
                            settings.embeddings = Some(dir);
                        }
                        Method::External => settings.scores = Some(Self::given(&i.scores, "scores", stage)?),
                        Method::Bm25 => {}
                    }
                    Step::Score {
                        corpus: corpus()?,
                        dataset: dataset()?,
                        settings,
                    }
                }
                Stage::ExportNegatives => Step::Export {
                    corpus: corpus()?,
                    dataset: dataset()?,
                    splits: splits()?,
                    preset: self
                        .preset
                        .ok_or_else(|| Error::Config("export-negatives needs a preset".into()))?,
                    seed: seed()?,
                },
                Stage::Eval => Step::Eval {
                    rankings: self.source(Stage::Score, RANKINGS_FILE, &i.rankings, "rankings", stage)?,
                    dataset: dataset()?,
                    splits: splits()?,
                },
                Stage::Stats => Step::Stats {
                    corpus: corpus()?,
                    dataset: dataset()?,
                },
            };
            steps.push((stage, step));
        }
        Ok(Plan { steps })
    }
}

#[derive(Debug, Clone)]
enum Step {
    Ingest { html_dir: PathBuf, metadata: PathBuf },
    BuildDataset { corpus: PathBuf, outlines: PathBuf, aliases: PathBuf },
    Split { dataset: PathBuf, seed: u64 },
    Score { corpus: PathBuf, dataset: PathBuf, settings: ScoreSettings },
    Export { corpus: PathBuf, dataset: PathBuf, splits: PathBuf, preset: Preset, seed: u64 },
    Eval { rankings: PathBuf, dataset: PathBuf, splits: PathBuf },
    Stats { corpus: PathBuf, dataset: PathBuf },
}

impl Step {
    fn inputs(&self) -> Vec<&Path> {
        match self {
            Step::Ingest { html_dir, metadata } => vec![html_dir.as_path(), metadata],
            Step::BuildDataset { corpus, outlines, aliases } => vec![corpus.as_path(), outlines, aliases],
            Step::Split { dataset, .. } => vec![dataset.as_path()],
            Step::Score { corpus, dataset, settings } => {
                let mut v = vec![corpus.as_path(), dataset];
                v.extend(settings.embeddings.as_deref());
                v.extend(settings.scores.as_deref());
                v
            }
            Step::Export { corpus, dataset, splits, .. } => vec![corpus.as_path(), dataset, splits],
            Step::Eval { rankings, dataset, splits } => vec![rankings.as_path(), dataset, splits],
            Step::Stats { corpus, dataset } => vec![corpus.as_path(), dataset],
        }
    }
}

/// Validated stages in dependency order.
#[derive(Debug, Clone)]
pub struct Plan {
    steps: Vec<(Stage, Step)>,
}

impl Plan {
    pub fn stages(&self) -> Vec<Stage> {
        self.steps.iter().map(|(s, _)| *s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub seconds: f64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub method: Method,
    pub seed: Option<u64>,
    pub stages: Vec<StageRecord>,
}

fn digest(path: &Path) -> Result<String> {
    if path.is_dir() {
        sha256_dir(path)
    } else {
        sha256_file(path)
    }
}

/// Runs every requested stage and writes `manifest.json` into the output directory.
///
/// Stops at the first failing stage, removing whatever that stage had written.
pub fn run_pipeline(config: &RunConfig, exec: Execution) -> Result<RunManifest> {
    let plan = config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_hash = config.hash();
    let mut manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config_hash.clone(),
        method: config.method,
        seed: config.seed,
        stages: Vec::new(),
    };
    for (stage, step) in &plan.steps {
        log::info!("stage {stage} starting");
        let started = Instant::now();
        let outputs: Vec<PathBuf> = stage.outputs().iter().map(|f| out.join(f)).collect();
        let result = (|| -> Result<BTreeMap<String, String>> {
            let mut inputs = BTreeMap::new();
            for p in step.inputs() {
                inputs.insert(p.display().to_string(), digest(p)?);
            }
            run_step(config, step, &outputs, &config_hash, exec)?;
            Ok(inputs)
        })();
        let inputs = match result {
            Ok(inputs) => inputs,
            Err(e) => {
                for p in &outputs {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::Stage {
                    stage: stage.to_string(),
                    source: Box::new(e),
                });
            }
        };
        let mut digests = BTreeMap::new();
        for p in &outputs {
            digests.insert(p.file_name().expect("file").to_string_lossy().into_owned(), sha256_file(p)?);
        }
        let seconds = started.elapsed().as_secs_f64();
        log::info!("stage {stage} finished in {seconds:.3}s");
        manifest.stages.push(StageRecord {
            stage: *stage,
            seconds,
            inputs,
            outputs: digests,
        });
    }
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn run_step(config: &RunConfig, step: &Step, outputs: &[PathBuf], config_hash: &str, exec: Execution) -> Result<()> {
    match step {
        Step::Ingest { html_dir, metadata } => {
            let r = step_ingest(html_dir, metadata, config.start_num, &outputs[0], exec)?;
            log::info!(
                "{} judgments, {} filtered, {} missing, {} unparseable",
                r.judgments.len(),
                r.filtered,
                r.missing_html.len(),
                r.unparseable.len()
            );
        }
        Step::BuildDataset { corpus, outlines, aliases } => {
            let a = step_build_dataset(corpus, outlines, aliases, &config.delimiter, &outputs[0], &outputs[1])?;
            log::info!("{} pairs over {} queries, {} drops", a.records.len(), a.queries.len(), a.drops.len());
        }
        Step::Split { dataset, seed } => {
            step_split(dataset, &config.split, *seed, &outputs[0])?;
        }
        Step::Score { corpus, dataset, settings } => {
            step_score(corpus, dataset, None, settings, &outputs[0], exec)?;
        }
        Step::Export { corpus, dataset, splits, preset, seed } => {
            let settings = ExportSettings {
                preset: *preset,
                splits: &[Split::Train],
                seed: *seed,
                bm25: config.bm25,
            };
            step_export(corpus, dataset, splits, &settings, &outputs[0], exec)?;
        }
        Step::Eval { rankings, dataset, splits } => {
            let opts = EvalOptions {
                ks: config.ks.clone(),
                macro_per_query: config.macro_per_query,
                ..EvalOptions::default()
            };
            let run = RunInfo {
                method: config.method.to_string(),
                config_hash: config_hash.to_string(),
                seed: config.seed,
                macro_per_query: false,
            };
            step_eval(rankings, dataset, splits, &opts, run, &outputs[0], exec)?;
        }
        Step::Stats { corpus, dataset } => {
            step_stats(corpus, dataset, &outputs[0])?;
        }
    }
    Ok(())
}
