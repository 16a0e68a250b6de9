//! `pspace`: perceptual spaces from ratings and crowd-driven schema expansion.

mod commands;
mod experiment;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use perceptual_space::crowd::Preset;

#[derive(Parser, Debug)]
#[command(name = "pspace", version, about = "Perceptual spaces from ratings and crowd-driven schema expansion")]
pub struct Cli {
    /// Root seed; every random component derives its own stream from it.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Progress on stderr and per-repetition detail on stdout.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a perceptual space from a ratings file and save it.
    BuildSpace {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest neighbours of one item.
    Neighbors {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        item: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label every item of a space from a small gold sample.
    Expand {
        #[arg(long)]
        space: PathBuf,
        /// Gold sample (`item<TAB>+|-`); alternatively draw one from --truth with --n.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Full labels: the gold source when --gold is absent, and the reference for a g-mean summary.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Gold items per class drawn from --truth.
        #[arg(long)]
        n: Option<usize>,
        /// Real-valued training scores for --regression.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        regression: bool,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flag labels the trained model disagrees with.
    DetectNoise {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a crowd-sourcing campaign and write its judgment stream.
    SimulateCrowd {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "exp1")]
        preset: Preset,
        /// Number of target items taken from the start of --truth; the rest is the gold pool.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a judgment stream, retraining at every checkpoint.
    Boost {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Minutes between checkpoints.
        #[arg(long, default_value_t = 5.0)]
        interval: f64,
        /// Preset whose HIT size and price are used for the dollar column.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against truth labels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Gmean)]
        metric: Metric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an LSI metadata space from item descriptions.
    Lsi {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradients of both models against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        dim: usize,
        /// Random parameter settings per model.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a table or figure over seeded repetitions.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand, Debug)]
pub enum Experiment {
    /// g-mean per attribute and gold size, perceptual vs metadata space.
    Table3 {
        #[command(flatten)]
        source: SpaceArgs,
        /// One labels file per attribute.
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// LSI dimensions for the metadata space.
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 40])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision and recall of noise detection per flip percentage.
    Table4 {
        #[command(flatten)]
        source: SpaceArgs,
        #[arg(long)]
        truth: PathBuf,
        /// Percentages of labels to flip.
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0])]
        x: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        reps: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correct-vs-time and correct-vs-dollars timeline, boosted and majority-only.
    Figures34 {
        #[command(flatten)]
        source: SpaceArgs,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "exp1")]
        preset: Preset,
        #[arg(long, default_value_t = 5.0)]
        interval: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// `item<TAB>user<TAB>score` lines.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Ratings are MovieLens `u.data` (`user item rating timestamp`).
    #[arg(long)]
    pub movielens: bool,
    /// Rating scale bounds as `MIN,MAX`.
    #[arg(long, value_parser = parse_scale, allow_hyphen_values = true, default_value = "1,5")]
    pub scale: (f64, f64),
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = Model::Euclidean)]
    pub model: Model,
}

/// A saved space, or ratings to train one from.
#[derive(Args, Debug, Clone)]
pub struct SpaceArgs {
    #[arg(long, conflicts_with = "ratings")]
    pub space: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Euclidean,
    Svd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Gmean,
    Pr,
    Accuracy,
}

fn parse_scale(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err("MIN must be finite and below MAX".into());
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("PSPACE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    perceptual_space::exec::init_threads(threads);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!();
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::FAILURE
        }
    }
}
