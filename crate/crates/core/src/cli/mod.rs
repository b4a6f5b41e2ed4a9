//! `dabound` command-line front end.
//!
//! Exit codes: 0 success, 1 a verified violation was found, 2 usage or
//! configuration error. Every report echoes the fully resolved
//! configuration, and reruns with the same arguments write identical bytes.

mod bounds;
mod gen;
mod io;
mod train;
mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::LambdaMode;
use crate::campaign::Suite;
use crate::error::{Error, Result};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "DABOUND_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "dabound",
    version,
    about = "PAC-Bayesian domain-adaptation bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a randomized verification campaign.
    Verify(VerifyArgs),
    /// Evaluate bounds on known domains (exact) or on samples (empirical).
    Bounds(BoundsArgs),
    /// Learn a posterior over a stump pool by minimizing the PAC-Bayesian bound.
    Train(TrainArgs),
    /// Generate datasets.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// `exact`, `chi2` or `constant:<value>`.
    #[arg(long, default_value = "constant:0", value_parser = parse_lambda)]
    pub lambda: LambdaMode,
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct VerifyArgs {
    /// identities | best-target | joint-error | chi2-lambda | degenerate | coverage
    #[arg(long, value_parser = parse_suite)]
    pub suite: Suite,
    /// Instances (or Monte Carlo trials for coverage).
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 6)]
    pub max_points: usize,
    #[arg(long, default_value_t = 5)]
    pub max_voters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    /// Points of the fixed domain pair (coverage).
    #[arg(long, default_value_t = 6)]
    pub points: usize,
    /// Voters of the fixed domain pair (coverage).
    #[arg(long, default_value_t = 4)]
    pub voters: usize,
    /// Sample size per trial (coverage).
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Random test posteriors besides the prior (coverage).
    #[arg(long, default_value_t = 10)]
    pub posteriors: usize,
    /// Allowed excess of the violation rate over delta (coverage).
    #[arg(long, default_value_t = 0.03)]
    pub slack: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value = "exact", value_parser = parse_lambda)]
    pub lambda: LambdaMode,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct BoundsArgs {
    /// Source domain JSON (exact mode).
    #[arg(long)]
    pub source_domain: Option<PathBuf>,
    /// Target domain JSON (exact mode).
    #[arg(long)]
    pub target_domain: Option<PathBuf>,
    /// Voter table JSON (exact mode).
    #[arg(long)]
    pub voters: Option<PathBuf>,
    /// Labeled source CSV (empirical mode).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Unlabeled target CSV (empirical mode).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Stump pool JSON (empirical mode).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Generate a pool of this many stumps instead of reading one (empirical mode).
    #[arg(long)]
    pub stumps: Option<usize>,
    /// Posterior JSON; uniform when absent.
    #[arg(long)]
    pub rho: Option<PathBuf>,
    /// Prior JSON; uniform when absent (empirical mode).
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[command(flatten)]
    pub bound: BoundArgs,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct TrainArgs {
    /// Labeled source CSV.
    #[arg(long)]
    pub source: PathBuf,
    /// Unlabeled target CSV.
    #[arg(long)]
    pub target: PathBuf,
    /// Labeled target CSV used only for evaluation.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Stump pool JSON; generated from the sample rows when absent.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub stumps: usize,
    /// Prior JSON; uniform when absent.
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[command(flatten)]
    pub bound: BoundArgs,
    #[arg(long, default_value_t = crate::learner::DEFAULT_STEP_SIZE)]
    pub step_size: f64,
    #[arg(long, default_value_t = crate::learner::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = crate::learner::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Descend from the prior only, without the restarts near each vertex.
    #[arg(long)]
    pub no_restarts: bool,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    RandomFinite,
    Chi2Perturbed,
    RotatedMoons,
    LabelFlip,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub points: usize,
    #[arg(long, default_value_t = 3)]
    pub voters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    /// Perturbation magnitude (chi2-perturbed).
    #[arg(long, default_value_t = 0.01)]
    pub magnitude: f64,
    /// Share of mass moved to the opposite label (label-flip).
    #[arg(long, default_value_t = 0.1)]
    pub noise_rate: f64,
    #[arg(long, default_value_t = 300)]
    pub source_size: usize,
    #[arg(long, default_value_t = 300)]
    pub target_size: usize,
    #[arg(long, default_value_t = 300)]
    pub heldout_size: usize,
    /// Rotation in degrees (rotated-moons).
    #[arg(long, default_value_t = 30.0)]
    pub angle: f64,
    /// Coordinate noise standard deviation (rotated-moons).
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

/// What a successful run found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Violation,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Violation => 1,
        }
    }
}

/// Exit code for a failed run.
pub const USAGE_EXIT: u8 = 2;

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Verify(args) => verify::run(&args),
        Command::Bounds(args) => bounds::run(&args),
        Command::Train(args) => train::run(&args),
        Command::Gen(args) => gen::run(&args),
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| {
        Error::Config(format!(
            "{what} is stochastic; pass --seed or set {SEED_ENV}"
        ))
    })
}
