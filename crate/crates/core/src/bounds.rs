//! Term-by-term evaluators for the domain-adaptation bounds.
//!
//! * [`best_target_bound`]: source Gibbs risk + domain disagreement +
//!   `λ_{ρ,ρ*_T}`, the earlier bound that depends on the best target posterior.
//! * [`joint_error_bound`]: source Gibbs risk + ½ domain disagreement + `λ_ρ`.
//! * [`pac_bayes_bound`]: the PAC-Bayesian (Catoni-style) version built from
//!   a source/target sample pair, a prior and a confidence level.
//! * [`chi2_lambda_bound`]: the `√(χ² · e_S)` surrogate for `λ_ρ`.
//!
//! Every [`BoundReport`] lists the weighted contribution of each term, and
//! `rhs` is their sum in a fixed order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen;
use crate::domain::{FiniteDomain, Posterior, VoterMatrix};
use crate::error::{Error, Result};
use crate::estimators::{self, PairVotes, SamplePair};
use crate::exact;

/// `c' = c / (1 − e^{−c})` and `α' = 2α / (1 − e^{−2α})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatoniConstants {
    pub c_prime: f64,
    pub alpha_prime: f64,
}

fn catoni_factor(x: f64) -> f64 {
    // x / (1 - e^{-x}) without cancellation for small x.
    x / -(-x).exp_m1()
}

pub fn catoni_constants(c: f64, alpha: f64) -> Result<CatoniConstants> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!(
            "c must be positive and finite, got {c}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(CatoniConstants {
        c_prime: catoni_factor(c),
        alpha_prime: catoni_factor(2.0 * alpha),
    })
}

/// `KL(ρ‖π) = Σ ρ ln(ρ/π)` with `0 ln 0 = 0`.
pub fn kl_categorical(rho: &Posterior, pi: &Posterior) -> Result<f64> {
    pi.ensure_len(rho.len())?;
    let mut kl = 0.0;
    for (i, (&r, &p)) in rho.weights().iter().zip(pi.weights()).enumerate() {
        if r == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Err(Error::AbsoluteContinuity { index: i, rho: r });
        }
        kl += r * (r / p).ln();
    }
    // Rounding can leave a tiny negative total when ρ ≈ π.
    Ok(kl.max(0.0))
}

/// How the unobservable `λ_ρ` enters the PAC-Bayesian bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum LambdaMode {
    /// Exact `λ_ρ` from known domains.
    Exact,
    /// The `√(χ² · e_S)` surrogate from known domains.
    Chi2,
    /// A user-supplied value.
    Constant(f64),
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaMode::Exact => write!(f, "exact"),
            LambdaMode::Chi2 => write!(f, "chi2"),
            LambdaMode::Constant(v) => write!(f, "constant:{v}"),
        }
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    /// Accepts `exact`, `chi2` or `constant:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(LambdaMode::Exact),
            "chi2" => Ok(LambdaMode::Chi2),
            other => {
                let value = other
                    .strip_prefix("constant:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "unknown lambda mode {other:?}; expected exact, chi2 or constant:<value>"
                        ))
                    })?;
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::Config(format!(
                        "constant lambda {value} must be non-negative"
                    )));
                }
                Ok(LambdaMode::Constant(value))
            }
        }
    }
}

/// Parameters of the PAC-Bayesian bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub c: f64,
    pub alpha: f64,
    pub delta: f64,
    pub m: usize,
    pub lambda_mode: LambdaMode,
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        catoni_constants(self.c, self.alpha)?;
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Domain(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.m == 0 {
            return Err(Error::Domain("sample size m must be at least 1".into()));
        }
        if let LambdaMode::Constant(v) = self.lambda_mode {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "constant lambda {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    /// `c'/c + α'/α`, the weight of the complexity term.
    pub fn complexity_weight(&self) -> Result<f64> {
        let k = catoni_constants(self.c, self.alpha)?;
        Ok(k.c_prime / self.c + k.alpha_prime / self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `R_S + dis + λ_{ρ,ρ*_T}` on known domains.
    BestTarget,
    /// `R_S + ½ dis + λ_ρ` on known domains.
    JointError,
    /// PAC-Bayesian bound from a sample pair.
    PacBayes,
}

/// Where the reported `λ` value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    /// `λ_ρ` from the true domains.
    Exact,
    /// `√(χ² · e_S)` from the true domains.
    Chi2,
    /// User-supplied constant.
    Constant,
    /// `λ_{ρ,ρ*_T}` built from the best target posterior.
    BestTarget,
}

impl From<LambdaMode> for LambdaSource {
    fn from(mode: LambdaMode) -> Self {
        match mode {
            LambdaMode::Exact => LambdaSource::Exact,
            LambdaMode::Chi2 => LambdaSource::Chi2,
            LambdaMode::Constant(_) => LambdaSource::Constant,
        }
    }
}

/// Every term of one bound evaluation.
///
/// Raw quantities (`source_risk`, `disagreement`, `kl`, `lambda`) are
/// followed by their weighted contributions; `rhs` is
/// `source_term + disagreement_term + complexity_term + lambda_term + constant_term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundKind,
    pub source_risk: f64,
    pub disagreement: f64,
    pub kl: Option<f64>,
    pub lambda: f64,
    pub lambda_source: LambdaSource,
    pub c_prime: Option<f64>,
    pub alpha_prime: Option<f64>,
    /// `R_{P_T}(G_{ρ*_T})`, only for the best-target bound.
    pub best_target_risk: Option<f64>,
    /// `R_{D_T}(G_ρ, G_{ρ*_T})`, only for the best-target bound.
    pub target_cross_disagreement: Option<f64>,
    /// `R_{D_S}(G_ρ, G_{ρ*_T})`, only for the best-target bound.
    pub source_cross_disagreement: Option<f64>,
    pub source_term: f64,
    pub disagreement_term: f64,
    pub complexity_term: f64,
    pub lambda_term: f64,
    pub constant_term: f64,
    pub rhs: f64,
    /// True target Gibbs risk, when the target domain is known.
    pub target_risk: Option<f64>,
}

impl BoundReport {
    pub fn terms_sum(&self) -> f64 {
        self.source_term
            + self.disagreement_term
            + self.complexity_term
            + self.lambda_term
            + self.constant_term
    }

    /// `rhs − target_risk`, when the target risk is known.
    pub fn slack(&self) -> Option<f64> {
        self.target_risk.map(|t| self.rhs - t)
    }

    fn finish(mut self) -> Self {
        self.rhs = self.terms_sum();
        self
    }
}

/// Known source/target domains over a shared universe and the voter table on it.
#[derive(Debug, Clone, Copy)]
pub struct TrueDomains<'a> {
    pub source: &'a FiniteDomain,
    pub target: &'a FiniteDomain,
    pub voters: &'a VoterMatrix,
}

pub fn joint_error_bound(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<BoundReport> {
    let source_risk = exact::gibbs_risk(source, voters, rho)?;
    let disagreement = exact::domain_disagreement(source, target, voters, rho)?;
    let lambda = exact::lambda_rho(source, target, voters, rho)?;
    let target_risk = exact::gibbs_risk(target, voters, rho)?;
    Ok(BoundReport {
        bound: BoundKind::JointError,
        source_risk,
        disagreement,
        kl: None,
        lambda,
        lambda_source: LambdaSource::Exact,
        c_prime: None,
        alpha_prime: None,
        best_target_risk: None,
        target_cross_disagreement: None,
        source_cross_disagreement: None,
        source_term: source_risk,
        disagreement_term: 0.5 * disagreement,
        complexity_term: 0.0,
        lambda_term: lambda,
        constant_term: 0.0,
        rhs: 0.0,
        target_risk: Some(target_risk),
    }
    .finish())
}

pub fn best_target_bound(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<BoundReport> {
    let source_risk = exact::gibbs_risk(source, voters, rho)?;
    let disagreement = exact::domain_disagreement(source, target, voters, rho)?;
    let best = exact::best_target_posterior(target, voters)?;
    let best_target_risk = exact::gibbs_risk(target, voters, &best)?;
    let mt = exact::pair_disagreement(&target.marginal(), voters)?;
    let ms = exact::pair_disagreement(&source.marginal(), voters)?;
    let target_cross = exact::cross_disagreement(&mt, rho, &best)?;
    let source_cross = exact::cross_disagreement(&ms, rho, &best)?;
    let lambda = best_target_risk + target_cross + source_cross;
    let target_risk = exact::gibbs_risk(target, voters, rho)?;
    Ok(BoundReport {
        bound: BoundKind::BestTarget,
        source_risk,
        disagreement,
        kl: None,
        lambda,
        lambda_source: LambdaSource::BestTarget,
        c_prime: None,
        alpha_prime: None,
        best_target_risk: Some(best_target_risk),
        target_cross_disagreement: Some(target_cross),
        source_cross_disagreement: Some(source_cross),
        source_term: source_risk,
        disagreement_term: disagreement,
        complexity_term: 0.0,
        lambda_term: lambda,
        constant_term: 0.0,
        rhs: 0.0,
        target_risk: Some(target_risk),
    }
    .finish())
}

/// `√(χ²(P_T‖P_S) · e_S(G_ρ, G_ρ))`; fails when the supports differ.
pub fn chi2_lambda_bound(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    let chi2 = exact::chi_squared(target, source)?;
    let es = exact::expected_joint_error(source, voters, rho)?;
    Ok((chi2 * es).sqrt())
}

fn lambda_for(mode: LambdaMode, rho: &Posterior, truth: Option<&TrueDomains<'_>>) -> Result<f64> {
    let need_truth = || {
        truth.ok_or_else(|| {
            Error::Config(format!(
                "lambda mode {mode} needs the true source and target domains"
            ))
        })
    };
    match mode {
        LambdaMode::Constant(v) => Ok(v),
        LambdaMode::Exact => {
            let t = need_truth()?;
            exact::lambda_rho(t.source, t.target, t.voters, rho)
        }
        LambdaMode::Chi2 => {
            let t = need_truth()?;
            chi2_lambda_bound(t.source, t.target, t.voters, rho)
        }
    }
}

/// PAC-Bayesian bound on the target Gibbs risk from a sample pair of common size `m`.
pub fn pac_bayes_bound(
    pair: &SamplePair,
    votes: &PairVotes,
    rho: &Posterior,
    pi: &Posterior,
    config: &BoundConfig,
    truth: Option<&TrueDomains<'_>>,
) -> Result<BoundReport> {
    config.validate()?;
    if pair.source.len() != config.m || pair.target.len() != config.m {
        return Err(Error::SizeMismatch(format!(
            "bound needs m_S = m_T = m = {}, got m_S = {} and m_T = {}",
            config.m,
            pair.source.len(),
            pair.target.len()
        )));
    }
    let k = catoni_constants(config.c, config.alpha)?;
    let source_risk = estimators::empirical_gibbs_risk(&pair.source, &votes.source, rho)?;
    let disagreement = estimators::empirical_domain_disagreement(pair, votes, rho)?;
    let kl = kl_categorical(rho, pi)?;
    let lambda = lambda_for(config.lambda_mode, rho, truth)?;
    let target_risk = match truth {
        Some(t) => Some(exact::gibbs_risk(t.target, t.voters, rho)?),
        None => None,
    };
    let weight = k.c_prime / config.c + k.alpha_prime / config.alpha;
    Ok(BoundReport {
        bound: BoundKind::PacBayes,
        source_risk,
        disagreement,
        kl: Some(kl),
        lambda,
        lambda_source: config.lambda_mode.into(),
        c_prime: Some(k.c_prime),
        alpha_prime: Some(k.alpha_prime),
        best_target_risk: None,
        target_cross_disagreement: None,
        source_cross_disagreement: None,
        source_term: k.c_prime * source_risk,
        disagreement_term: k.alpha_prime * 0.5 * disagreement,
        complexity_term: weight * (kl + (3.0 / config.delta).ln()) / config.m as f64,
        lambda_term: lambda,
        constant_term: 0.5 * (k.alpha_prime - 1.0),
        rhs: 0.0,
        target_risk,
    }
    .finish())
}

/// Outcome of a Monte Carlo coverage campaign.
///
/// The bound is simultaneous over posteriors, but only a finite test set is
/// checked, so a low violation rate is a necessary condition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub posteriors: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub delta: f64,
    /// Largest `target_risk − rhs` seen over all trials and posteriors.
    pub max_excess: f64,
    /// Smallest `rhs − target_risk` seen.
    pub min_slack: f64,
    /// Per trial, the largest `target_risk − rhs` over the test posteriors.
    pub trial_max_excess: Vec<f64>,
}

/// Repeatedly draws `S ~ P_S^m`, `T ~ D_T^m` and counts trials where any
/// test posterior's true target Gibbs risk exceeds its bound. Trial `t`
/// uses the stream `derive_seed(seed, t)`, so results do not depend on
/// scheduling.
#[allow(clippy::too_many_arguments)]
pub fn verify_pac_bayes_coverage(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    pi: &Posterior,
    config: &BoundConfig,
    trials: usize,
    test_posteriors: &[Posterior],
    seed: u64,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::Config("coverage needs at least one trial".into()));
    }
    if test_posteriors.is_empty() {
        return Err(Error::Config(
            "coverage needs at least one test posterior".into(),
        ));
    }
    config.validate()?;
    let truth = TrueDomains {
        source,
        target,
        voters,
    };
    let excesses: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, t as u64));
            let (pair, votes) =
                datagen::sample_pair(source, target, voters, config.m, config.m, &mut rng)?;
            let mut worst = f64::NEG_INFINITY;
            for rho in test_posteriors {
                let report = pac_bayes_bound(&pair, &votes, rho, pi, config, Some(&truth))?;
                let excess = report.target_risk.unwrap_or(0.0) - report.rhs;
                worst = worst.max(excess);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let violations = excesses.iter().filter(|&&e| e > 0.0).count();
    let max_excess = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CoverageReport {
        trials,
        posteriors: test_posteriors.len(),
        violations,
        violation_rate: violations as f64 / trials as f64,
        delta: config.delta,
        max_excess,
        min_slack: -max_excess,
        trial_max_excess: excesses,
    })
}
