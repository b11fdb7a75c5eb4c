//! Batch front end for the `mvcca` toolkit: fitting, evaluation, ranking,
//! nearest-neighbour retrieval and synthetic data.

pub mod commands;

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mvcca::dataio::Pooling;

pub use commands::{
    cmd_evaluate, cmd_featurize, cmd_fit, cmd_nn_baseline, cmd_nn_retrieve, cmd_rank, cmd_synth,
    FitSummary,
};

#[derive(Debug, Parser)]
#[command(
    name = "mvcca",
    version,
    about = "Multi-view CCA answer ranking toolkit"
)]
pub struct Cli {
    /// Worker threads for per-question work (default: available cores).
    #[arg(long, global = true, env = "MVCCA_THREADS")]
    pub threads: Option<usize>,

    /// Print progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an A-Q (or A-QI with --images) model and write it to --model.
    Fit(FitArgs),
    /// Rank every candidate set and report MR, R@k, MRR (and NDCG, Otsu).
    Evaluate(EvaluateArgs),
    /// Write the ranking of every candidate set as JSON lines.
    Rank(RankArgs),
    /// Retrieve answers from the k nearest training questions.
    NnRetrieve(NnRetrieveArgs),
    /// Rank candidates against the mean answer of the k nearest questions.
    NnBaseline(NnBaselineArgs),
    /// Generate synthetic features with planted correlations.
    Synth(SynthArgs),
    /// Turn one sentence per line into pooled token-embedding features.
    Featurize(FeaturizeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Absolute ridge on the diagonal blocks. Default: 1e-6·trace(C_ii)/n_i.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add Otsu split statistics over candidate correlations.
    #[arg(long)]
    pub otsu: bool,
    #[arg(long, default_value_t = mvcca::metrics::DEFAULT_BINS)]
    pub otsu_bins: usize,
    /// Add NDCG; needs a relevance column in the candidate file.
    #[arg(long)]
    pub ndcg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub candidates: PathBuf,
    /// JSON-lines output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NnRetrieveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query questions, one per row; the row index is the question id.
    #[arg(long)]
    pub questions: PathBuf,
    /// Training questions forming the neighbour bank.
    #[arg(long)]
    pub bank_questions: PathBuf,
    /// Training answers aligned with --bank-questions.
    #[arg(long)]
    pub bank_answers: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Answers kept per query.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NnBaselineArgs {
    /// Use CCA embeddings from this model; raw features otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub questions: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    /// Query images; enables the question+image neighbour search.
    #[arg(long, requires = "bank_images")]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub bank_questions: PathBuf,
    #[arg(long)]
    pub bank_answers: PathBuf,
    #[arg(long, requires = "images")]
    pub bank_images: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// JSON-lines ranks; the metric table then goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub question_dim: usize,
    #[arg(long, default_value_t = 16)]
    pub answer_dim: usize,
    #[arg(long)]
    pub image_dim: Option<usize>,
    /// Planted correlations, one per latent component.
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.6, 0.3, 0.1])]
    pub correlations: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = mvcca::dataio::DEFAULT_CANDIDATES)]
    pub candidate_count: usize,
    /// Attach graded relevance to the candidate file.
    #[arg(long)]
    pub relevance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    /// Mean over in-vocabulary tokens.
    PresentMean,
    /// Sum divided by the 16-token cap.
    #[value(name = "fixed-16")]
    Fixed16,
}

impl From<PoolingArg> for Pooling {
    fn from(p: PoolingArg) -> Self {
        match p {
            PoolingArg::PresentMean => Pooling::PresentMean,
            PoolingArg::Fixed16 => Pooling::FixedLength,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeaturizeArgs {
    /// Token embedding table (`token v1 .. vd` per line).
    #[arg(long)]
    pub table: PathBuf,
    /// Text file, one sentence per line.
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, value_enum, default_value_t = PoolingArg::PresentMean)]
    pub pooling: PoolingArg,
    /// Output feature file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn init_logging(verbose: bool) {
    let level = if verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn thread_count(requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub(crate) fn require_file(flag: &str, path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{flag}: no such file `{}`", path.display());
    }
    Ok(())
}

pub(crate) fn require_parent(flag: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            bail!("{flag}: directory `{}` does not exist", dir.display());
        }
    }
    Ok(())
}

/// Runs one parsed invocation, writing machine output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    match &cli.command {
        Command::Fit(args) => {
            let summary = cmd_fit(args)?;
            writeln!(stdout, "{summary}")?;
        }
        Command::Evaluate(args) => {
            cmd_evaluate(args, threads, stdout)?;
        }
        Command::Rank(args) => cmd_rank(args, threads, stdout)?,
        Command::NnRetrieve(args) => cmd_nn_retrieve(args, threads, stdout)?,
        Command::NnBaseline(args) => cmd_nn_baseline(args, threads, stdout)?,
        Command::Synth(args) => cmd_synth(args, stdout)?,
        Command::Featurize(args) => cmd_featurize(args, stdout)?,
    }
    Ok(())
}
