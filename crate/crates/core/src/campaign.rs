//! Randomized verification campaigns over generated finite instances.
//!
//! Instance `i` of a campaign is generated from the stream
//! `derive_seed(seed, i)`, so rows are identical however the work is
//! scheduled. Each instance yields one [`CheckRow`] per check of its suite.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundConfig, CoverageReport, LambdaMode};
use crate::datagen::{self, FiniteInstance, FiniteSpec};
use crate::domain::Posterior;
use crate::error::{Error, Result};
use crate::exact;

/// Tolerance for exact identities and inequalities.
pub const CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Decomposition identity, factor-two relation, symmetry and domination checks.
    Identities,
    /// `R_T ≤ R_S + dis + λ_{ρ,ρ*_T}`.
    BestTarget,
    /// `R_T ≤ R_S + ½ dis + λ_ρ`.
    JointError,
    /// `λ_ρ ≤ √(χ²(P_T‖P_S) · e_S)`.
    Chi2Lambda,
    /// Source equals target: the joint-error bound is tight, the best-target bound is not.
    Degenerate,
    /// Monte Carlo coverage of the sample bound.
    Coverage,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Identities,
        Suite::BestTarget,
        Suite::JointError,
        Suite::Chi2Lambda,
        Suite::Degenerate,
        Suite::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::BestTarget => "best-target",
            Suite::JointError => "joint-error",
            Suite::Chi2Lambda => "chi2-lambda",
            Suite::Degenerate => "degenerate",
            Suite::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Size limits for the random finite instances of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceLimits {
    pub max_points: usize,
    pub max_voters: usize,
    pub concentration: f64,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_points: 6,
            max_voters: 5,
            concentration: datagen::DEFAULT_CONCENTRATION,
        }
    }
}

/// Instance `index` of a campaign: sizes uniform in `1..=max`, then a
/// random finite instance of those sizes.
pub fn campaign_instance(
    seed: u64,
    index: usize,
    limits: &InstanceLimits,
) -> Result<FiniteInstance> {
    if limits.max_points == 0 || limits.max_voters == 0 {
        return Err(Error::Config("instance limits must be at least 1".into()));
    }
    let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, index as u64));
    let spec = FiniteSpec {
        points: rng.random_range(1..=limits.max_points),
        voters: rng.random_range(1..=limits.max_voters),
        concentration: limits.concentration,
    };
    datagen::random_finite_instance_with(&spec, &mut rng)
}

/// One check on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub instance: usize,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|` for identities, `lhs − rhs` for `lhs ≤ rhs` inequalities.
    pub excess: f64,
    pub violated: bool,
}

// Negated comparisons so that a NaN counts as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl CheckRow {
    fn identity(instance: usize, check: &str, lhs: f64, rhs: f64) -> Self {
        let excess = (lhs - rhs).abs();
        Self {
            instance,
            check: check.into(),
            lhs,
            rhs,
            excess,
            violated: !(excess < CHECK_TOL),
        }
    }

    fn at_most(instance: usize, check: &str, lhs: f64, rhs: f64) -> Self {
        let excess = lhs - rhs;
        Self {
            instance,
            check: check.into(),
            lhs,
            rhs,
            excess,
            violated: !(excess <= CHECK_TOL),
        }
    }

    fn exactly(instance: usize, check: &str, lhs: f64, rhs: f64) -> Self {
        let excess = (lhs - rhs).abs();
        Self {
            instance,
            check: check.into(),
            lhs,
            rhs,
            excess,
            violated: lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub count: usize,
    pub violations: usize,
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub suite: Suite,
    pub instances: usize,
    pub violations: usize,
    pub checks: Vec<CheckSummary>,
    /// Share of instances where the joint-error bound is at most the best-target bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_error_dominance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageSummary>,
}

impl CampaignSummary {
    pub fn passed(&self) -> bool {
        match &self.coverage {
            Some(c) => c.passed,
            None => self.violations == 0,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.check == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub summary: CampaignSummary,
    pub rows: Vec<CheckRow>,
}

fn identity_checks(i: usize, inst: &FiniteInstance) -> Result<Vec<CheckRow>> {
    let FiniteInstance {
        source,
        target,
        voters,
        rho,
    } = inst;
    let gibbs = exact::gibbs_risk(source, voters, rho)?;
    let dis_matrix = exact::pair_disagreement(&source.marginal(), voters)?;
    let dis = exact::expected_disagreement(&dis_matrix, rho)?;
    let joint_matrix = exact::joint_error_matrix(source, voters)?;
    let joint = joint_matrix.quadratic_form(rho)?;
    let mv = exact::majority_vote_risk(source, voters, rho)?;
    let ab = exact::domain_disagreement(source, target, voters, rho)?;
    let ba = exact::domain_disagreement(target, source, voters, rho)?;
    let aa = exact::domain_disagreement(source, source, voters, rho)?;
    let hdh = exact::hdh_sup_distance(source, target, voters)?;
    let risks = exact::voter_risks(source, voters)?;
    let diag_gap = risks
        .iter()
        .enumerate()
        .map(|(h, r)| (joint_matrix.get(h, h) - r).abs())
        .fold(0.0, f64::max);
    let symmetric = dis_matrix.is_symmetric() && joint_matrix.is_symmetric();
    Ok(vec![
        CheckRow::identity(i, "decomposition", gibbs, 0.5 * dis + joint),
        CheckRow::at_most(i, "majority_vote_factor_two", mv, 2.0 * gibbs),
        CheckRow::exactly(i, "disagreement_symmetry", ab, ba),
        CheckRow::exactly(i, "disagreement_self", aa, 0.0),
        CheckRow::at_most(i, "disagreement_below_hdh_sup", ab, hdh.sup),
        CheckRow::identity(i, "joint_error_diagonal", diag_gap, 0.0),
        CheckRow::exactly(i, "pair_matrices_symmetric", symmetric as u8 as f64, 1.0),
    ])
}

fn bound_checks(i: usize, inst: &FiniteInstance, which: Suite) -> Result<(Vec<CheckRow>, bool)> {
    let b1 = bounds::best_target_bound(&inst.source, &inst.target, &inst.voters, &inst.rho)?;
    let b2 = bounds::joint_error_bound(&inst.source, &inst.target, &inst.voters, &inst.rho)?;
    let dominated = b2.rhs <= b1.rhs + CHECK_TOL;
    let report = if which == Suite::BestTarget { &b1 } else { &b2 };
    let name = if which == Suite::BestTarget {
        "best_target_bound"
    } else {
        "joint_error_bound"
    };
    let target = report.target_risk.unwrap_or(f64::NAN);
    Ok((
        vec![
            CheckRow::at_most(i, name, target, report.rhs),
            CheckRow::identity(i, "rhs_is_sum_of_terms", report.rhs, report.terms_sum()),
        ],
        dominated,
    ))
}

fn chi2_lambda_checks(i: usize, inst: &FiniteInstance) -> Result<Vec<CheckRow>> {
    let lambda = exact::lambda_rho(&inst.source, &inst.target, &inst.voters, &inst.rho)?;
    let surrogate = bounds::chi2_lambda_bound(&inst.source, &inst.target, &inst.voters, &inst.rho)?;
    Ok(vec![CheckRow::at_most(
        i,
        "chi2_lambda_bound",
        lambda,
        surrogate,
    )])
}

fn degenerate_checks(i: usize, inst: &FiniteInstance) -> Result<Vec<CheckRow>> {
    let domain = &inst.source;
    let (voters, rho) = (&inst.voters, &inst.rho);
    let target_risk = exact::gibbs_risk(domain, voters, rho)?;
    let b1 = bounds::best_target_bound(domain, domain, voters, rho)?;
    let b2 = bounds::joint_error_bound(domain, domain, voters, rho)?;
    let best = exact::best_target_posterior(domain, voters)?;
    let best_risk = exact::gibbs_risk(domain, voters, &best)?;
    let cross = exact::cross_disagreement(
        &exact::pair_disagreement(&domain.marginal(), voters)?,
        rho,
        &best,
    )?;
    Ok(vec![
        CheckRow::identity(i, "joint_error_bound_tight", b2.rhs, target_risk),
        CheckRow::identity(
            i,
            "best_target_excess",
            b1.rhs - target_risk,
            best_risk + 2.0 * cross,
        ),
        CheckRow::identity(
            i,
            "best_target_risk_term",
            b1.best_target_risk.unwrap_or(f64::NAN),
            best_risk,
        ),
        CheckRow::identity(
            i,
            "best_target_cross_terms",
            b1.target_cross_disagreement.unwrap_or(f64::NAN)
                + b1.source_cross_disagreement.unwrap_or(f64::NAN),
            2.0 * cross,
        ),
    ])
}

fn summarize(suite: Suite, instances: usize, rows: &[CheckRow]) -> CampaignSummary {
    let mut checks: Vec<CheckSummary> = Vec::new();
    for row in rows {
        let entry = match checks.iter_mut().position(|c| c.check == row.check) {
            Some(k) => &mut checks[k],
            None => {
                checks.push(CheckSummary {
                    check: row.check.clone(),
                    count: 0,
                    violations: 0,
                    max_excess: f64::NEG_INFINITY,
                });
                checks.last_mut().expect("just pushed")
            }
        };
        entry.count += 1;
        entry.violations += row.violated as usize;
        entry.max_excess = entry.max_excess.max(row.excess);
    }
    CampaignSummary {
        suite,
        instances,
        violations: rows.iter().filter(|r| r.violated).count(),
        checks,
        joint_error_dominance_rate: None,
        coverage: None,
    }
}

/// Runs an instance-based suite (everything except coverage).
pub fn run_suite(
    suite: Suite,
    instances: usize,
    seed: u64,
    limits: &InstanceLimits,
) -> Result<CampaignResult> {
    if instances == 0 {
        return Err(Error::Config("campaign needs at least one instance".into()));
    }
    if suite == Suite::Coverage {
        return Err(Error::Config(
            "use run_coverage for the coverage suite".into(),
        ));
    }
    let per_instance: Vec<(Vec<CheckRow>, Option<bool>)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst = campaign_instance(seed, i, limits)?;
            Ok(match suite {
                Suite::Identities => (identity_checks(i, &inst)?, None),
                Suite::BestTarget | Suite::JointError => {
                    let (rows, dominated) = bound_checks(i, &inst, suite)?;
                    (rows, Some(dominated))
                }
                Suite::Chi2Lambda => (chi2_lambda_checks(i, &inst)?, None),
                Suite::Degenerate => (degenerate_checks(i, &inst)?, None),
                Suite::Coverage => unreachable!(),
            })
        })
        .collect::<Result<_>>()?;
    let dominated: Vec<bool> = per_instance.iter().filter_map(|(_, d)| *d).collect();
    let rows: Vec<CheckRow> = per_instance.into_iter().flat_map(|(r, _)| r).collect();
    let mut summary = summarize(suite, instances, &rows);
    if !dominated.is_empty() {
        summary.joint_error_dominance_rate =
            Some(dominated.iter().filter(|&&d| d).count() as f64 / dominated.len() as f64);
    }
    Ok(CampaignResult { summary, rows })
}

/// Parameters of the coverage suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub points: usize,
    pub voters: usize,
    pub bound: BoundConfig,
    /// Random test posteriors drawn in addition to the prior.
    pub random_posteriors: usize,
    /// Allowed excess of the violation rate over `delta`.
    pub slack: f64,
}

impl CoverageConfig {
    pub fn new(m: usize, delta: f64) -> Self {
        Self {
            points: 6,
            voters: 4,
            bound: BoundConfig {
                c: 1.0,
                alpha: 1.0,
                delta,
                m,
                lambda_mode: LambdaMode::Exact,
            },
            random_posteriors: 10,
            slack: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub report: CoverageReport,
    pub threshold: f64,
    pub passed: bool,
}

/// Fixed domain pair from `derive_seed(seed, 0)`, uniform prior and test
/// posteriors `{π} ∪ random_posteriors` from `derive_seed(seed, 1)`;
/// trials run on streams derived from `derive_seed(seed, 2)`.
pub fn run_coverage(trials: usize, seed: u64, config: &CoverageConfig) -> Result<CampaignResult> {
    let spec = FiniteSpec::new(config.points, config.voters);
    let inst = datagen::random_finite_instance(&spec, datagen::derive_seed(seed, 0))?;
    let pi = Posterior::uniform(config.voters)?;
    let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, 1));
    let mut posteriors = vec![pi.clone()];
    for _ in 0..config.random_posteriors {
        posteriors.push(datagen::random_posterior(
            &mut rng,
            config.voters,
            spec.concentration,
        )?);
    }
    let report = bounds::verify_pac_bayes_coverage(
        &inst.source,
        &inst.target,
        &inst.voters,
        &pi,
        &config.bound,
        trials,
        &posteriors,
        datagen::derive_seed(seed, 2),
    )?;
    let rows: Vec<CheckRow> = report
        .trial_max_excess
        .iter()
        .enumerate()
        .map(|(t, &e)| CheckRow {
            instance: t,
            check: "pac_bayes_trial".into(),
            lhs: e,
            rhs: 0.0,
            excess: e,
            violated: e > 0.0,
        })
        .collect();
    let threshold = config.bound.delta + config.slack;
    let mut summary = summarize(Suite::Coverage, trials, &rows);
    summary.coverage = Some(CoverageSummary {
        passed: report.violation_rate <= threshold,
        report,
        threshold,
    });
    Ok(CampaignResult { summary, rows })
}
