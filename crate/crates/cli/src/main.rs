mod commands;
mod config;
mod error;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::lock::OutputLock;

#[derive(Parser)]
#[command(
    name = "revdetect",
    version,
    about = "Attribute peer reviews to human, refined, or AI authors"
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; every command reads and writes its files here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every seeded step; required by `generate` and `train`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Similarity threshold τ.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Number of reference reviews per target.
    #[arg(long, global = true)]
    k_refs: Option<usize>,
    /// Top-k cutoff for the token-rank feature.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Confidence threshold for selective prediction.
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Share of papers assigned to training.
    #[arg(long, global = true)]
    split_fraction: Option<f64>,
    /// Directory of prompt template overrides.
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw corpus files and write corpus.jsonl and split.json.
    Ingest {
        /// JSONL files of papers and reviews.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
    },
    /// Generate AI and refined reviews for the corpus (resumable).
    Generate,
    /// Extract categorized claims from every review.
    ExtractClaims,
    /// Compute the feature table.
    Featurize,
    /// Train the classifier on the training split.
    Train {
        /// Run a cross-validated search with this many trials first.
        #[arg(long)]
        search: Option<usize>,
    },
    /// Classify one review of one paper.
    Classify {
        #[arg(long)]
        review: PathBuf,
        #[arg(long)]
        paper: PathBuf,
        /// Model file; defaults to model.bin in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate on the test split, or on a given predictions file.
    Evaluate {
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Coverage and selective accuracy over the threshold grid.
    SweepTheta {
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = cli.tau {
        cfg.features.tau = v;
    }
    if let Some(v) = cli.k_refs {
        cfg.features.k_refs = v;
    }
    if let Some(v) = cli.top_k {
        cfg.features.top_k = v;
    }
    if let Some(v) = cli.theta {
        cfg.theta = v;
    }
    if let Some(v) = cli.split_fraction {
        cfg.split.fraction = v;
    }
    if let Some(v) = &cli.templates {
        cfg.templates_dir = Some(v.clone());
    }
    if let Some(v) = &cli.out {
        cfg.out = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = build_config(&cli)?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::config("no output directory: pass --out or set `out` in the config"))?;
    let _lock = OutputLock::acquire(&out)?;
    let ctx = Ctx {
        cfg,
        out,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Ingest { inputs } => commands::ingest(&ctx, inputs),
        Command::Generate => commands::generate(&ctx),
        Command::ExtractClaims => commands::extract_claims(&ctx),
        Command::Featurize => commands::featurize(&ctx),
        Command::Train { search } => commands::train(&ctx, *search),
        Command::Classify { review, paper, model } => commands::classify(&ctx, review, paper, model.as_deref()),
        Command::Evaluate { predictions } => commands::evaluate_cmd(&ctx, predictions.as_deref()),
        Command::SweepTheta { predictions } => commands::sweep_theta(&ctx, predictions.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.family.exit_code())
        }
    }
}
