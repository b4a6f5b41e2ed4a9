//! `dabound bounds`: exact bounds on known domains or the PAC-Bayesian
//! bound on samples.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::io::{self, Subsample};
use super::{require_seed, BoundsArgs, Format, Outcome};
use crate::bounds::{self as b, BoundConfig, BoundReport, LambdaMode};
use crate::campaign::CHECK_TOL;
use crate::datagen;
use crate::domain::{FiniteDomain, Posterior, VoterMatrix};
use crate::error::{Error, Result};
use crate::estimators::{LabeledSample, SamplePair, Stump, UnlabeledSample};
use crate::exact::{self, HdhDistance};

#[derive(Serialize)]
struct ExactConfig<'a> {
    mode: &'static str,
    source_domain: &'a Path,
    target_domain: &'a Path,
    voters: &'a Path,
    rho: &'a Posterior,
    format: Format,
}

#[derive(Serialize)]
struct ExactReport<'a> {
    command: &'static str,
    config: ExactConfig<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reports: Option<&'a [BoundReport]>,
    majority_vote_risk: f64,
    chi2_lambda_bound: Option<f64>,
    chi2_lambda_error: Option<String>,
    chi2: Option<f64>,
    hdh: HdhDistance,
}

#[derive(Serialize)]
struct EmpiricalConfig<'a> {
    mode: &'static str,
    source: &'a Path,
    target: &'a Path,
    pool: Option<&'a Path>,
    stumps: Option<usize>,
    seed: Option<u64>,
    rho: &'a Posterior,
    pi: &'a Posterior,
    bound: BoundConfig,
    format: Format,
}

#[derive(Serialize)]
struct EmpiricalReport<'a> {
    command: &'static str,
    config: EmpiricalConfig<'a>,
    subsample: Option<Subsample>,
    pool: &'a [Stump],
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a BoundReport>,
}

pub(super) fn run(args: &BoundsArgs) -> Result<Outcome> {
    io::ensure_distinct(
        &args.out,
        &[
            &args.source_domain,
            &args.target_domain,
            &args.voters,
            &args.source,
            &args.target,
            &args.pool,
            &args.rho,
            &args.pi,
        ],
    )?;
    let exact_inputs = [&args.source_domain, &args.target_domain, &args.voters];
    let sample_inputs = [&args.source, &args.target];
    let any_exact = exact_inputs.iter().any(|p| p.is_some());
    let any_sample = sample_inputs.iter().any(|p| p.is_some());
    match (any_exact, any_sample) {
        (true, false) => match exact_inputs {
            [Some(s), Some(t), Some(v)] => run_exact(args, s, t, v),
            _ => Err(Error::Config(
                "exact mode needs --source-domain, --target-domain and --voters".into(),
            )),
        },
        (false, true) => match sample_inputs {
            [Some(s), Some(t)] => run_empirical(args, s, t),
            _ => Err(Error::Config(
                "empirical mode needs --source and --target".into(),
            )),
        },
        (true, true) => Err(Error::Config(
            "give either known domains (exact mode) or samples (empirical mode), not both".into(),
        )),
        (false, false) => Err(Error::Config(
            "give --source-domain/--target-domain/--voters or --source/--target".into(),
        )),
    }
}

fn load_posterior(path: Option<&PathBuf>, n: usize) -> Result<Posterior> {
    let p = match path {
        Some(path) => io::read_json::<Posterior>(path)?,
        None => Posterior::uniform(n)?,
    };
    if p.weights().len() != n {
        return Err(Error::Alignment {
            what: "posterior weights",
            expected: n,
            found: p.weights().len(),
        });
    }
    Ok(p)
}

fn violated(reports: &[BoundReport]) -> bool {
    reports
        .iter()
        .any(|r| r.slack().is_some_and(|s| s < -CHECK_TOL))
}

fn run_exact(
    args: &BoundsArgs,
    source_path: &Path,
    target_path: &Path,
    voters_path: &Path,
) -> Result<Outcome> {
    if args.pool.is_some() || args.stumps.is_some() || args.pi.is_some() {
        return Err(Error::Config(
            "--pool, --stumps and --pi only apply to empirical mode".into(),
        ));
    }
    let source: FiniteDomain = io::read_json(source_path)?;
    let target: FiniteDomain = io::read_json(target_path)?;
    let voters: VoterMatrix = io::read_json(voters_path)?;
    let rho = load_posterior(args.rho.as_ref(), voters.n())?;

    let reports = vec![
        b::best_target_bound(&source, &target, &voters, &rho)?,
        b::joint_error_bound(&source, &target, &voters, &rho)?,
    ];
    let (chi2_lambda_bound, chi2_lambda_error) =
        match b::chi2_lambda_bound(&source, &target, &voters, &rho) {
            Ok(v) => (Some(v), None),
            Err(e @ Error::SharedSupport { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
    let chi2 = chi2_lambda_bound
        .map(|_| exact::chi_squared(&target, &source))
        .transpose()?;
    let hdh = exact::hdh_sup_distance(&source, &target, &voters)?;
    let majority_vote_risk = exact::majority_vote_risk(&target, &voters, &rho)?;

    let report = |with_rows: bool| ExactReport {
        command: "bounds",
        config: ExactConfig {
            mode: "exact",
            source_domain: source_path,
            target_domain: target_path,
            voters: voters_path,
            rho: &rho,
            format: args.format,
        },
        reports: with_rows.then_some(reports.as_slice()),
        majority_vote_risk,
        chi2_lambda_bound,
        chi2_lambda_error: chi2_lambda_error.clone(),
        chi2,
        hdh,
    };
    match args.format {
        Format::Json => io::write_json(&args.out, &report(true))?,
        Format::Csv => {
            io::write_csv_rows(&args.out, &reports)?;
            io::write_json(&io::sidecar(&args.out, ".summary.json"), &report(false))?;
        }
    }
    Ok(if violated(&reports) {
        Outcome::Violation
    } else {
        Outcome::Success
    })
}

/// Reads `--pool` or draws `--stumps` stumps from all sample rows.
pub(super) fn resolve_pool(
    pool: Option<&PathBuf>,
    stumps: Option<usize>,
    seed: Option<u64>,
    source: &LabeledSample,
    target: &UnlabeledSample,
) -> Result<Vec<Stump>> {
    let pool = match (pool, stumps) {
        (Some(path), None) => io::read_json::<Vec<Stump>>(path)?,
        (None, Some(count)) => {
            let seed = require_seed(seed, "stump pool generation")?;
            let rows: Vec<Vec<f64>> = source
                .features()
                .iter()
                .chain(target.features())
                .cloned()
                .collect();
            datagen::stump_pool(&rows, count, datagen::derive_seed(seed, io::POOL_STREAM))?
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config("give --pool or --stumps, not both".into()))
        }
        (None, None) => {
            return Err(Error::Config(
                "empirical mode needs --pool or --stumps".into(),
            ))
        }
    };
    if pool.is_empty() {
        return Err(Error::Empty("stump pool"));
    }
    let dim = source.dim();
    if let Some(s) = pool
        .iter()
        .find(|s| s.feature >= dim || !s.threshold.is_finite())
    {
        return Err(Error::Config(format!(
            "stump on feature {} with threshold {} does not fit {dim}-dimensional rows",
            s.feature, s.threshold
        )));
    }
    Ok(pool)
}

fn run_empirical(args: &BoundsArgs, source_path: &Path, target_path: &Path) -> Result<Outcome> {
    if matches!(args.bound.lambda, LambdaMode::Exact | LambdaMode::Chi2) {
        return Err(Error::Config(format!(
            "lambda mode {} needs known domains; use constant:<value> with samples",
            args.bound.lambda
        )));
    }
    let source = io::read_labeled(source_path)?;
    let target = io::read_unlabeled(target_path)?;
    let pool = resolve_pool(args.pool.as_ref(), args.stumps, args.seed, &source, &target)?;
    let (source, target, subsample) = io::equalize(source, target, args.seed)?;
    let pair = SamplePair::new(source, target)?;
    let votes = pair.evaluate(&pool)?;
    let rho = load_posterior(args.rho.as_ref(), pool.len())?;
    let pi = load_posterior(args.pi.as_ref(), pool.len())?;
    let bound = BoundConfig {
        c: args.bound.c,
        alpha: args.bound.alpha,
        delta: args.bound.delta,
        m: pair.source.len(),
        lambda_mode: args.bound.lambda,
    };
    let report = b::pac_bayes_bound(&pair, &votes, &rho, &pi, &bound, None)?;

    let out = |with_report: bool| EmpiricalReport {
        command: "bounds",
        config: EmpiricalConfig {
            mode: "empirical",
            source: source_path,
            target: target_path,
            pool: args.pool.as_deref(),
            stumps: args.stumps,
            seed: args.seed,
            rho: &rho,
            pi: &pi,
            bound,
            format: args.format,
        },
        subsample: subsample.clone(),
        pool: &pool,
        report: with_report.then_some(&report),
    };
    match args.format {
        Format::Json => io::write_json(&args.out, &out(true))?,
        Format::Csv => {
            io::write_csv_rows(&args.out, std::slice::from_ref(&report))?;
            io::write_json(&io::sidecar(&args.out, ".summary.json"), &out(false))?;
        }
    }
    Ok(Outcome::Success)
}
