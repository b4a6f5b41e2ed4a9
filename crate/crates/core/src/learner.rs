//! Exponentiated-gradient minimization of the observable part of the
//! PAC-Bayesian bound over the posterior simplex.
//!
//! The objective is
//!
//! ```text
//! J(ρ) = c'·R_S(G_ρ) + α'·½·dis_ρ(S,T) + (c'/c + α'/α)·KL(ρ‖π)/m
//! ```
//!
//! The `ρ`-independent terms (`ln(3/δ)` part of the complexity term, `λ`,
//! `½(α'−1)`) are left out of `J` but appear in the final report. Updates
//! run in log-space so a weight never leaves the open simplex by
//! underflowing to zero in intermediate steps.

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundConfig, BoundReport, TrueDomains};
use crate::domain::{PairMatrix, Posterior};
use crate::error::{Error, Result};
use crate::estimators::{self, PairVotes, SamplePair};

pub const DEFAULT_STEP_SIZE: f64 = 0.1;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Step halvings tried before an iteration gives up.
pub const MAX_HALVINGS: usize = 30;
/// Share of the prior kept in each restart point `(1 − s)·e_i + s·π`.
pub const RESTART_PRIOR_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub bound: BoundConfig,
    pub step_size: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Also descend from a point near each vertex and keep the best run; the
    /// disagreement term makes the objective non-convex.
    #[serde(default = "default_restarts")]
    pub restarts: bool,
}

fn default_restarts() -> bool {
    true
}

impl LearnerConfig {
    /// Optimizer defaults: step 0.1, 1000 iterations, tolerance 1e-8.
    pub fn new(bound: BoundConfig) -> Self {
        Self {
            bound,
            step_size: DEFAULT_STEP_SIZE,
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
            restarts: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bound.validate()?;
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Objective change fell below the tolerance.
    Converged,
    MaxIters,
    /// No halving of the step decreased the objective.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub posterior: Posterior,
    /// Objective at the starting point followed by every accepted iterate.
    pub objective_trace: Vec<f64>,
    pub report: BoundReport,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Starting point of the returned run: `None` for the prior, `Some(i)`
    /// for the restart near voter `i`.
    pub start: Option<usize>,
}

/// Everything the objective needs, precomputed from the sample pair.
struct Objective {
    risks: Vec<f64>,
    /// `M̂_S − M̂_T`.
    gap: PairMatrix,
    log_pi: Vec<f64>,
    c_prime: f64,
    alpha_prime: f64,
    kl_weight: f64,
}

impl Objective {
    fn new(
        pair: &SamplePair,
        votes: &PairVotes,
        pi: &Posterior,
        config: &BoundConfig,
    ) -> Result<Self> {
        config.validate()?;
        if pair.source.len() != config.m || pair.target.len() != config.m {
            return Err(Error::SizeMismatch(format!(
                "objective needs m_S = m_T = m = {}, got m_S = {} and m_T = {}",
                config.m,
                pair.source.len(),
                pair.target.len()
            )));
        }
        pi.ensure_len(votes.n())?;
        let k = bounds::catoni_constants(config.c, config.alpha)?;
        let risks = estimators::empirical_voter_risks(&pair.source, &votes.source)?;
        let (ms, mt) = estimators::empirical_disagreement_matrices(pair, votes)?;
        Ok(Self {
            risks,
            gap: ms.sub(&mt)?,
            log_pi: pi.weights().iter().map(|p| p.ln()).collect(),
            c_prime: k.c_prime,
            alpha_prime: k.alpha_prime,
            kl_weight: config.complexity_weight()? / config.m as f64,
        })
    }

    fn kl(&self, w: &[f64], log_w: &[f64]) -> Result<f64> {
        let mut kl = 0.0;
        for (i, (&wi, &lw)) in w.iter().zip(log_w).enumerate() {
            if wi == 0.0 {
                continue;
            }
            if self.log_pi[i] == f64::NEG_INFINITY {
                return Err(Error::AbsoluteContinuity { index: i, rho: wi });
            }
            kl += wi * (lw - self.log_pi[i]);
        }
        Ok(kl.max(0.0))
    }

    fn value(&self, w: &[f64], log_w: &[f64]) -> Result<f64> {
        let risk: f64 = w.iter().zip(&self.risks).map(|(a, r)| a * r).sum();
        let dis = self.gap.bilinear_raw(w, w).abs();
        Ok(self.c_prime * risk
            + self.alpha_prime * 0.5 * dis
            + self.kl_weight * self.kl(w, log_w)?)
    }

    /// `(a, b, sign(q))` with the gradient `a + sign(q)·b`: `a` holds the
    /// risk and KL parts, `b = α'·(M̂_S − M̂_T)ρ`.
    fn parts(&self, w: &[f64], log_w: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let q = self.gap.bilinear_raw(w, w);
        let sign = if q > 0.0 {
            1.0
        } else if q < 0.0 {
            -1.0
        } else {
            0.0
        };
        let dw = self.gap.mul_vec_raw(w);
        let a = (0..w.len())
            .map(|i| {
                self.c_prime * self.risks[i] + self.kl_weight * (log_w[i] - self.log_pi[i] + 1.0)
            })
            .collect();
        let b = dw.iter().map(|d| self.alpha_prime * d).collect();
        (a, b, sign)
    }

    fn gradient(&self, w: &[f64], log_w: &[f64]) -> Vec<f64> {
        let (a, b, sign) = self.parts(w, log_w);
        a.iter().zip(&b).map(|(x, y)| x + sign * y).collect()
    }

    /// Candidate directions for one step: the `sign(q)` gradient and, when
    /// different, the element `a + t·b` (`t ∈ [−1, 1]`) of smallest norm in
    /// the `ρ`-weighted tangent metric of the multiplicative update. The
    /// latter moves along the ridge `q = 0` where either one-sided gradient
    /// points across it.
    fn directions(&self, w: &[f64], log_w: &[f64]) -> Vec<Vec<f64>> {
        let (a, b, sign) = self.parts(w, log_w);
        let combine = |t: f64| {
            a.iter()
                .zip(&b)
                .map(|(x, y)| x + t * y)
                .collect::<Vec<f64>>()
        };
        let mut out = vec![combine(sign)];
        let center = |v: &[f64]| {
            let mean: f64 = v.iter().zip(w).map(|(x, p)| x * p).sum();
            v.iter().map(|x| x - mean).collect::<Vec<f64>>()
        };
        let (ca, cb) = (center(&a), center(&b));
        let bb: f64 = cb.iter().zip(w).map(|(x, p)| p * x * x).sum();
        if bb > 0.0 {
            let ab: f64 = ca.iter().zip(&cb).zip(w).map(|((x, y), p)| p * x * y).sum();
            let t = (-ab / bb).clamp(-1.0, 1.0);
            if t != sign {
                out.push(combine(t));
            }
        }
        out
    }
}

fn log_weights(rho: &Posterior) -> Vec<f64> {
    rho.weights().iter().map(|w| w.ln()).collect()
}

/// Observable part of the bound at `rho`.
pub fn objective(
    pair: &SamplePair,
    votes: &PairVotes,
    rho: &Posterior,
    pi: &Posterior,
    config: &BoundConfig,
) -> Result<f64> {
    let obj = Objective::new(pair, votes, pi, config)?;
    rho.ensure_len(votes.n())?;
    obj.value(rho.weights(), &log_weights(rho))
}

/// Gradient of [`objective`] in the ambient space, with `sign(0) = 0` for
/// the absolute value. Requires every weight of `rho` to be positive.
pub fn gradient(
    pair: &SamplePair,
    votes: &PairVotes,
    rho: &Posterior,
    pi: &Posterior,
    config: &BoundConfig,
) -> Result<Vec<f64>> {
    let obj = Objective::new(pair, votes, pi, config)?;
    rho.ensure_len(votes.n())?;
    if let Some(index) = rho.weights().iter().position(|&w| w <= 0.0) {
        return Err(Error::Boundary {
            index,
            value: rho.weight(index),
        });
    }
    Ok(obj.gradient(rho.weights(), &log_weights(rho)))
}

/// Removes the component along the all-ones direction.
pub fn project_tangent(g: &[f64]) -> Vec<f64> {
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    g.iter().map(|v| v - mean).collect()
}

/// Normalizes log-weights; returns `(weights, log_weights)`.
fn softmax(logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let log_w: Vec<f64> = logits.iter().map(|l| l - lse).collect();
    (log_w.iter().map(|l| l.exp()).collect(), log_w)
}

/// Minimizes the objective from `ρ⁰ = π` with multiplicative updates
/// `ρ ∝ ρ · exp(−η g)`, halving `η` within an iteration while the
/// objective would increase. With `restarts`, the same descent also runs
/// from near each vertex and the lowest final objective wins, ties going
/// to the run from the prior.
pub fn train(
    pair: &SamplePair,
    votes: &PairVotes,
    pi: &Posterior,
    config: &LearnerConfig,
    truth: Option<&TrueDomains<'_>>,
) -> Result<TrainResult> {
    config.validate()?;
    if let Some(index) = pi.weights().iter().position(|&w| w <= 0.0) {
        return Err(Error::Boundary {
            index,
            value: pi.weight(index),
        });
    }
    let obj = Objective::new(pair, votes, pi, &config.bound)?;
    let mut best = descend(&obj, pi.weights().to_vec(), config)?;
    let mut start = None;
    if config.restarts {
        for i in 0..pi.len() {
            let w: Vec<f64> = pi
                .weights()
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    RESTART_PRIOR_SHARE * p
                        + if i == j {
                            1.0 - RESTART_PRIOR_SHARE
                        } else {
                            0.0
                        }
                })
                .collect();
            let run = descend(&obj, w, config)?;
            if run.value() < best.value() {
                best = run;
                start = Some(i);
            }
        }
    }
    let Run {
        w,
        trace,
        iterations,
        stop_reason,
    } = best;

    let posterior = Posterior::normalized(w)?;
    let report = bounds::pac_bayes_bound(pair, votes, &posterior, pi, &config.bound, truth)?;
    Ok(TrainResult {
        posterior,
        objective_trace: trace,
        report,
        iterations,
        stop_reason,
        start,
    })
}

struct Run {
    w: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
    stop_reason: StopReason,
}

impl Run {
    fn value(&self) -> f64 {
        *self
            .trace
            .last()
            .expect("trace starts with the initial value")
    }
}

/// One descent from `w0`; each iteration backtracks along every candidate
/// direction and keeps the lowest accepted value.
fn descend(obj: &Objective, w0: Vec<f64>, config: &LearnerConfig) -> Result<Run> {
    let mut log_w: Vec<f64> = w0.iter().map(|w| w.ln()).collect();
    let mut w = w0;
    let mut current = obj.value(&w, &log_w)?;
    let mut trace = vec![current];
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        iterations += 1;
        let mut accepted: Option<(Vec<f64>, Vec<f64>, f64, bool)> = None;
        for g in obj.directions(&w, &log_w) {
            let mut eta = config.step_size;
            for halvings in 0..=MAX_HALVINGS {
                let logits: Vec<f64> = log_w.iter().zip(&g).map(|(l, gi)| l - eta * gi).collect();
                let (cw, clw) = softmax(&logits);
                let value = obj.value(&cw, &clw)?;
                if value <= current {
                    if accepted.as_ref().is_none_or(|a| value < a.2) {
                        accepted = Some((cw, clw, value, halvings == 0));
                    }
                    break;
                }
                eta *= 0.5;
            }
        }
        let Some((cw, clw, value, full_step)) = accepted else {
            stop_reason = StopReason::Stalled;
            break;
        };
        let change = current - value;
        w = cw;
        log_w = clw;
        current = value;
        trace.push(value);
        // A backtracked step near the kink of |q| can make little progress
        // without the iterate being stationary.
        if full_step && change < config.tolerance {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok(Run {
        w,
        trace,
        iterations,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::LambdaMode;
    use crate::domain::Label;
    use crate::estimators::{ConstantVoter, LabeledSample, UnlabeledSample};

    fn tiny_pair() -> (SamplePair, PairVotes) {
        let xs = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
        let ys = vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg];
        let pair = SamplePair::new(
            LabeledSample::new(xs.clone(), ys).unwrap(),
            UnlabeledSample::new(xs).unwrap(),
        )
        .unwrap();
        let votes = pair
            .evaluate(&[ConstantVoter(Label::Pos), ConstantVoter(Label::Neg)])
            .unwrap();
        (pair, votes)
    }

    fn config(m: usize) -> BoundConfig {
        BoundConfig {
            c: 1.0,
            alpha: 1.0,
            delta: 0.05,
            m,
            lambda_mode: LambdaMode::Constant(0.0),
        }
    }

    #[test]
    fn objective_at_prior() {
        let (pair, votes) = tiny_pair();
        let pi = Posterior::uniform(2).unwrap();
        let j = objective(&pair, &votes, &pi, &pi, &config(4)).unwrap();
        let cp = 1.0 / (1.0 - (-1.0f64).exp());
        assert!((j - cp * 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_rejects_boundary() {
        let (pair, votes) = tiny_pair();
        let pi = Posterior::uniform(2).unwrap();
        let edge = Posterior::point_mass(2, 0).unwrap();
        assert!(matches!(
            gradient(&pair, &votes, &edge, &pi, &config(4)),
            Err(Error::Boundary { index: 1, .. })
        ));
    }

    #[test]
    fn zero_gap_contributes_nothing() {
        // Identical source and target rows: M̂_S = M̂_T, so q = 0.
        let (pair, votes) = tiny_pair();
        let pi = Posterior::uniform(2).unwrap();
        let rho = Posterior::new(vec![0.3, 0.7]).unwrap();
        let g = gradient(&pair, &votes, &rho, &pi, &config(4)).unwrap();
        let cfg = config(4);
        let k = bounds::catoni_constants(1.0, 1.0).unwrap();
        let w = cfg.complexity_weight().unwrap() / 4.0;
        let expected: Vec<f64> = [0.5, 0.5]
            .iter()
            .zip(rho.weights())
            .map(|(r, p)| k.c_prime * r + w * ((p / 0.5f64).ln() + 1.0))
            .collect();
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_voter_trains_in_one_iteration() {
        let (pair, _) = tiny_pair();
        let votes = pair.evaluate(&[ConstantVoter(Label::Pos)]).unwrap();
        let pi = Posterior::uniform(1).unwrap();
        let r = train(&pair, &votes, &pi, &LearnerConfig::new(config(4)), None).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.posterior.weights(), &[1.0]);
        assert_eq!(r.stop_reason, StopReason::Converged);
        let g = gradient(&pair, &votes, &pi, &pi, &config(4)).unwrap();
        assert_eq!(project_tangent(&g), vec![0.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let (pair, votes) = tiny_pair();
        let pi = Posterior::uniform(2).unwrap();
        let mut cfg = LearnerConfig::new(config(4));
        cfg.step_size = 0.0;
        assert!(matches!(
            train(&pair, &votes, &pi, &cfg, None),
            Err(Error::Config(_))
        ));
        let cfg = LearnerConfig::new(config(4));
        let edge = Posterior::point_mass(2, 0).unwrap();
        assert!(matches!(
            train(&pair, &votes, &edge, &cfg, None),
            Err(Error::Boundary { .. })
        ));
    }
}
