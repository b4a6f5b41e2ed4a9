//! `dabound train`.

use std::path::Path;

use serde::Serialize;

use super::io::{self, Subsample};
use super::{Outcome, TrainArgs};
use crate::bounds::{BoundConfig, LambdaMode};
use crate::domain::Posterior;
use crate::error::{Error, Result};
use crate::estimators::{self, evaluate_voters, SamplePair, Stump};
use crate::exact;
use crate::learner::{self, LearnerConfig, TrainResult};

#[derive(Serialize)]
struct Resolved<'a> {
    source: &'a Path,
    target: &'a Path,
    heldout: Option<&'a Path>,
    pool: Option<&'a Path>,
    stumps: Option<usize>,
    seed: Option<u64>,
    pi: &'a Posterior,
    learner: LearnerConfig,
}

/// Risks of the learned posterior and of the prior on a labeled target sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeldoutRisks {
    pub size: usize,
    pub gibbs_risk: f64,
    pub majority_vote_risk: f64,
    pub prior_gibbs_risk: f64,
    pub prior_majority_vote_risk: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    config: Resolved<'a>,
    subsample: Option<Subsample>,
    pool: &'a [Stump],
    result: &'a TrainResult,
    heldout: Option<HeldoutRisks>,
}

pub(super) fn run(args: &TrainArgs) -> Result<Outcome> {
    io::ensure_distinct(
        &args.out,
        &[
            &Some(args.source.clone()),
            &Some(args.target.clone()),
            &args.heldout,
            &args.pool,
            &args.pi,
        ],
    )?;
    if matches!(args.bound.lambda, LambdaMode::Exact | LambdaMode::Chi2) {
        return Err(Error::Config(format!(
            "lambda mode {} needs known domains; use constant:<value> with samples",
            args.bound.lambda
        )));
    }
    let source = io::read_labeled(&args.source)?;
    let target = io::read_unlabeled(&args.target)?;
    let heldout = args
        .heldout
        .as_ref()
        .map(|p| io::read_labeled(p))
        .transpose()?;
    let stumps = args.pool.is_none().then_some(args.stumps);
    let pool =
        super::bounds::resolve_pool(args.pool.as_ref(), stumps, args.seed, &source, &target)?;
    let (source, target, subsample) = io::equalize(source, target, args.seed)?;
    let pair = SamplePair::new(source, target)?;
    let votes = pair.evaluate(&pool)?;
    let pi = match &args.pi {
        Some(path) => load_prior(path, pool.len())?,
        None => Posterior::uniform(pool.len())?,
    };
    let config = LearnerConfig {
        bound: BoundConfig {
            c: args.bound.c,
            alpha: args.bound.alpha,
            delta: args.bound.delta,
            m: pair.source.len(),
            lambda_mode: args.bound.lambda,
        },
        step_size: args.step_size,
        max_iters: args.max_iters,
        tolerance: args.tolerance,
        restarts: !args.no_restarts,
    };
    let result = learner::train(&pair, &votes, &pi, &config, None)?;
    log::info!(
        "trained {} voters in {} iterations ({:?}), bound {}",
        pool.len(),
        result.iterations,
        result.stop_reason,
        result.report.rhs
    );

    let heldout = match &heldout {
        Some(sample) => {
            if sample.dim() != pair.source.dim() {
                return Err(Error::Config(format!(
                    "held-out rows have {} features, training rows {}",
                    sample.dim(),
                    pair.source.dim()
                )));
            }
            let hv = evaluate_voters(sample.features(), &pool)?;
            let domain = sample.empirical_domain()?;
            Some(HeldoutRisks {
                size: sample.len(),
                gibbs_risk: estimators::empirical_gibbs_risk(sample, &hv, &result.posterior)?,
                majority_vote_risk: exact::majority_vote_risk(&domain, &hv, &result.posterior)?,
                prior_gibbs_risk: estimators::empirical_gibbs_risk(sample, &hv, &pi)?,
                prior_majority_vote_risk: exact::majority_vote_risk(&domain, &hv, &pi)?,
            })
        }
        None => None,
    };

    io::write_json(
        &args.out,
        &Report {
            command: "train",
            config: Resolved {
                source: &args.source,
                target: &args.target,
                heldout: args.heldout.as_deref(),
                pool: args.pool.as_deref(),
                stumps,
                seed: args.seed,
                pi: &pi,
                learner: config,
            },
            subsample,
            pool: &pool,
            result: &result,
            heldout,
        },
    )?;
    Ok(Outcome::Success)
}

fn load_prior(path: &Path, n: usize) -> Result<Posterior> {
    let pi: Posterior = io::read_json(path)?;
    if pi.weights().len() != n {
        return Err(Error::Alignment {
            what: "prior weights",
            expected: n,
            found: pi.weights().len(),
        });
    }
    Ok(pi)
}
