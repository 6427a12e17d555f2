use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use jurisrank_core::evalkit::{EvalOptions, RunInfo};
use jurisrank_core::io::{sha256_file, stable_hash};
use jurisrank_core::par::{configure_threads, Execution};
use jurisrank_core::pipeline::{
    run_pipeline, step_build_dataset, step_eval, step_export, step_ingest, step_refresh, step_score,
    step_split, step_stats, ExportSettings, RunConfig, ScoreSettings, Stage,
};
use jurisrank_core::retrieval::{Bm25Params, Method};
use jurisrank_core::splits::{GuideHoldout, Split, SplitRatios};
use jurisrank_core::train_export::Preset;
use jurisrank_core::{Error, ErrorKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_STAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "jurisrank", version, about = "Paragraph retrieval benchmark for numbered court judgments")]
struct Cli {
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, env = "JURISRANK_THREADS")]
    threads: Option<usize>,

    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment court HTML into numbered paragraphs.
    Ingest {
        #[arg(long)]
        html_dir: PathBuf,
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        start_num: u32,
    },
    /// Turn guide outlines into query and relevant-paragraph pairs.
    BuildDataset {
        #[arg(long)]
        outlines: PathBuf,
        #[arg(long)]
        aliases: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = " > ")]
        delimiter: String,
        #[arg(long)]
        out: PathBuf,
        /// Where dropped citations go; defaults to drops.jsonl next to --out.
        #[arg(long)]
        drops: Option<PathBuf>,
    },
    /// Assign pairs to train, validation and the three test buckets.
    Split(SplitArgs),
    /// Rank the paragraphs of each pair's judgment.
    Score {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Only score pairs present in this split file.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        bm25: Bm25Args,
        /// Use raw token vectors for MaxSim instead of unit-normalising rows.
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write training instances with BM25 and random negatives.
    ExportNegatives {
        #[arg(long, value_parser = parse_preset)]
        preset: Preset,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "train", value_parser = parse_split)]
        split: Vec<Split>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        bm25: Bm25Args,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace negatives with the top non-relevant paragraphs under model scores.
    RefreshNegatives {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute Recall@k% per split.
    Eval {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        ks: Vec<f64>,
        /// Name recorded in the results header.
        #[arg(long, default_value = "bm25")]
        method: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Average per query first, then over queries.
        #[arg(long)]
        macro_per_query: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus and dataset distribution summaries.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute the stages listed in a run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_stage)]
        stages: Option<Vec<Stage>>,
    },
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated guide ids held out entirely.
    #[arg(long, value_delimiter = ',', conflicts_with = "guide_holdout_fraction")]
    guide_holdout: Vec<String>,
    /// Hold out this fraction of guides, chosen by seed.
    #[arg(long)]
    guide_holdout_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    query_holdout: f64,
    #[arg(long, default_value_t = 0.74)]
    train: f64,
    #[arg(long, default_value_t = 0.10)]
    val: f64,
    #[arg(long, default_value_t = 0.16)]
    test: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> jurisrank_core::Result<Bm25Params> {
        Bm25Params::new(self.k1, self.b)
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()).into());
        }
        configure_threads(n);
    }
    match cli.command {
        Command::Ingest {
            html_dir,
            metadata,
            out,
            start_num,
        } => {
            let r = step_ingest(&html_dir, &metadata, start_num, &out, exec)?;
            log::info!(
                "wrote {} judgments ({} filtered, {} missing html, {} unparseable)",
                r.judgments.len(),
                r.filtered,
                r.missing_html.len(),
                r.unparseable.len()
            );
        }
        Command::BuildDataset {
            outlines,
            aliases,
            corpus,
            delimiter,
            out,
            drops,
        } => {
            let drops = drops.unwrap_or_else(|| sibling(&out, "drops.jsonl"));
            let a = step_build_dataset(&corpus, &outlines, &aliases, &delimiter, &out, &drops)?;
            log::info!("wrote {} pairs, {} drops", a.records.len(), a.drops.len());
        }
        Command::Split(args) => {
            let guide_holdout = match args.guide_holdout_fraction {
                Some(f) => GuideHoldout::Fraction(f),
                None => GuideHoldout::Guides(args.guide_holdout.into_iter().collect()),
            };
            let ratios = SplitRatios {
                guide_holdout,
                query_holdout: args.query_holdout,
                train: args.train,
                val: args.val,
                test: args.test,
            };
            let a = step_split(&args.dataset, &ratios, args.seed, &args.out)?;
            for (split, n) in a.counts() {
                log::info!("{split}: {n}");
            }
        }
        Command::Score {
            method,
            corpus,
            dataset,
            splits,
            embeddings,
            scores,
            bm25,
            no_normalize,
            out,
        } => {
            let settings = ScoreSettings {
                method,
                bm25: bm25.params()?,
                normalize: !no_normalize,
                embeddings,
                scores,
            };
            let r = step_score(&corpus, &dataset, splits.as_deref(), &settings, &out, exec)?;
            log::info!("wrote {} rankings", r.len());
        }
        Command::ExportNegatives {
            preset,
            corpus,
            dataset,
            splits,
            split,
            seed,
            bm25,
            out,
        } => {
            let settings = ExportSettings {
                preset,
                splits: &split,
                seed,
                bm25: bm25.params()?,
            };
            let r = step_export(&corpus, &dataset, &splits, &settings, &out, exec)?;
            log::info!("wrote {} instances", r.len());
        }
        Command::RefreshNegatives {
            train,
            corpus,
            dataset,
            scores,
            n,
            out,
        } => {
            let r = step_refresh(&train, &corpus, &dataset, &scores, n, &out, exec)?;
            log::info!("refreshed {} instances", r.len());
        }
        Command::Eval {
            rankings,
            dataset,
            splits,
            ks,
            method,
            seed,
            macro_per_query,
            out,
        } => {
            let ks_text: Vec<String> = ks.iter().map(f64::to_string).collect();
            let config_hash = stable_hash(&[
                method.clone(),
                ks_text.join(","),
                macro_per_query.to_string(),
                sha256_file(&rankings)?,
                sha256_file(&splits)?,
            ]);
            let opts = EvalOptions {
                ks,
                macro_per_query,
                ..EvalOptions::default()
            };
            let run = RunInfo {
                method,
                config_hash,
                seed,
                macro_per_query,
            };
            let t = step_eval(&rankings, &dataset, &splits, &opts, run, &out, exec)?;
            for (split, row) in &t.tables {
                let cells: Vec<String> = row.0.iter().map(|(k, v)| format!("R@{k}%={v:.4}")).collect();
                log::info!("{split}: {}", cells.join(" "));
            }
        }
        Command::Stats { corpus, dataset, out } => {
            step_stats(&corpus, &dataset, &out)?;
        }
        Command::Run {
            config,
            output_dir,
            seed,
            stages,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(stages) = stages {
                cfg.stages = stages;
            }
            let m = run_pipeline(&cfg, exec).with_context(|| format!("run {}", config.display()))?;
            log::info!("run {} complete, {} stage(s)", m.config_hash, m.stages.len());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::kind) {
        Some(ErrorKind::Config) => EXIT_CONFIG,
        Some(ErrorKind::Data) => EXIT_DATA,
        Some(ErrorKind::Stage) | None => EXIT_STAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
