use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use forge_cli::align::{align, GeneratedRow, RefsRow};
use forge_cli::config::PipelineConfig;
use forge_cli::evaluate::{evaluate_generation, evaluate_retrieval, AnyRun, QrelRow, TextRow};
use forge_cli::jsonl::{self, Header};
use forge_cli::search::{self, HitsRow, IndexSource, LoadedIndex, QueryRow};
use forge_cli::{datasets, thread_count, with_pool};
use forge_core::gradcheck::{run_suite, GradCheckConfig};
use forge_core::index::IndexMode;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "forge", version, about = "Reference-grounded dataset, retrieval and evaluation pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set rho=0.6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Accept input artifacts written under a different config.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the generation, retrieval and warm-up datasets.
    Datasets {
        #[arg(long)]
        wiki: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Index(IndexCommand),
    /// Top-k retrieval for a query file, optionally topic-filtered.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        rerank: bool,
    },
    /// Topic-filter an existing hits file.
    Rerank {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        upper: Option<f64>,
        #[arg(long)]
        lower: Option<f64>,
    },
    /// Relabel reference marks and report refer scores.
    Align {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        emit: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Finite-difference check of the toy encoder gradients.
    LossCheck {
        #[arg(long, default_value_t = 50)]
        instances: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bm25,
    Sparse,
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build an index directory from passages or raw reference documents.
    Build {
        #[arg(long, conflicts_with = "refs", required_unless_present = "refs")]
        passages: Option<PathBuf>,
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Bm25)]
        mode: ModeArg,
    },
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        k: Option<usize>,
    },
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    Retrieval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Generation {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, kind: &str, cfg: &PipelineConfig) -> Result<()> {
    match out {
        Some(p) => jsonl::write_report(p, &Header::new(kind, cfg), value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LossCheckSummary {
    instances: usize,
    max_rel_error: f64,
    checked: usize,
    skipped: usize,
    tolerance: f64,
    passed: bool,
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let mut cfg = PipelineConfig::load(g.config.as_deref(), &g.overrides)?;
    let threads = thread_count();
    match cli.command {
        Command::Datasets { wiki, refs, out } => {
            let report = with_pool(threads, || datasets::run(&wiki, &refs, &out, &cfg, threads))??;
            eprintln!(
                "wiki {}/{} kept, refs {}/{} kept, {} generation rows, {} retrieval rows, {} warm-up pairs",
                report.wiki.kept,
                report.wiki.input,
                report.refs.kept,
                report.refs.input,
                report.generation_rows,
                report.retrieval.kept,
                report.warmup_rows
            );
        }
        Command::Index(IndexCommand::Build { passages, refs, out, mode }) => {
            let source = match (passages, refs) {
                (Some(p), _) => IndexSource::Passages(p),
                (None, Some(r)) => IndexSource::Refs(r),
                (None, None) => bail!("one of --passages or --refs is required"),
            };
            let mode = match mode {
                ModeArg::Bm25 => IndexMode::TermFrequency,
                ModeArg::Sparse => IndexMode::Weighted,
            };
            let stats =
                with_pool(threads, || search::build_command(&source, mode, &out, &cfg, threads))??;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Index(IndexCommand::Search { index, query, k }) => {
            let loaded = LoadedIndex::load(&index, &cfg, g.force)?;
            let q = QueryRow { query_id: "q".into(), query, vector: None };
            for h in loaded.search(&q, k.unwrap_or(cfg.top_k), &cfg)? {
                println!("{}\t{}\t{:.6}", h.rank, h.doc_id, h.score);
            }
        }
        Command::Index(IndexCommand::Stats { index }) => {
            let loaded = LoadedIndex::load(&index, &cfg, true)?;
            println!("{}", serde_json::to_string_pretty(&loaded.stats())?);
        }
        Command::Retrieve { index, queries, out, k, rerank } => {
            let loaded = LoadedIndex::load(&index, &cfg, g.force)?;
            let queries: Vec<QueryRow> = jsonl::read_checked(&queries, &cfg, g.force)?;
            let k = k.unwrap_or(cfg.top_k);
            let rows = with_pool(threads, || search::retrieve(&loaded, &queries, k, rerank, &cfg))??;
            jsonl::write(&out, &Header::new("hits", &cfg), &rows)?;
        }
        Command::Rerank { index, hits, out, mu, upper, lower } => {
            // Flag overrides are applied before the config hash is checked.
            if let Some(mu) = mu {
                cfg.mu = mu;
            }
            if let Some(u) = upper {
                cfg.upper = u;
            }
            if let Some(l) = lower {
                cfg.lower = l;
            }
            cfg.validate()?;
            let loaded = LoadedIndex::load(&index, &cfg, g.force)?;
            let rows: Vec<HitsRow> = jsonl::read_checked(&hits, &cfg, g.force)?;
            let rows = with_pool(threads, || search::rerank_rows(rows, &loaded, &cfg))??;
            jsonl::write(&out, &Header::new("hits", &cfg), &rows)?;
        }
        Command::Align { input, refs, emit: emit_path, report } => {
            let stop = cfg.stopwords()?;
            let generated: Vec<GeneratedRow> = jsonl::read_checked(&input, &cfg, g.force)?;
            let refs: Vec<RefsRow> = jsonl::read_checked(&refs, &cfg, g.force)?;
            let (rows, summary) = with_pool(threads, || align(&generated, &refs, &stop))?;
            jsonl::write(&emit_path, &Header::new("aligned", &cfg), &rows)?;
            jsonl::write_report(&report, &Header::new("refer-score", &cfg), &summary)?;
        }
        Command::Eval(EvalCommand::Retrieval { run, qrels, out }) => {
            let runs: Vec<AnyRun> = jsonl::read_checked(&run, &cfg, g.force)?;
            let qrels: Vec<QrelRow> = jsonl::read_checked(&qrels, &cfg, g.force)?;
            emit(&evaluate_retrieval(runs, qrels)?, out.as_deref(), "retrieval-metrics", &cfg)?;
        }
        Command::Eval(EvalCommand::Generation { candidates, targets, out }) => {
            let c: Vec<TextRow> = jsonl::read_checked(&candidates, &cfg, g.force)?;
            let t: Vec<TextRow> = jsonl::read_checked(&targets, &cfg, g.force)?;
            emit(&evaluate_generation(c, t)?, out.as_deref(), "generation-metrics", &cfg)?;
        }
        Command::LossCheck { instances, out } => {
            let gc = GradCheckConfig::default();
            let reports = run_suite(0..instances, cfg.loss_weights(), &gc)
                .context("gradient check failed to evaluate")?;
            let tolerance = 1e-4;
            let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
            let summary = LossCheckSummary {
                instances: reports.len(),
                max_rel_error,
                checked: reports.iter().map(|r| r.checked).sum(),
                skipped: reports.iter().map(|r| r.skipped).sum(),
                tolerance,
                passed: max_rel_error < tolerance,
            };
            emit(&summary, out.as_deref(), "loss-check", &cfg)?;
            return Ok(summary.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
