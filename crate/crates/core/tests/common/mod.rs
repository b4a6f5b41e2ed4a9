//! Shared fixtures and brute-force oracles for the integration tests.
//!
//! The oracles enumerate points, labels and voter pairs with plain loops and
//! never call the engine's matrix code.
#![allow(dead_code)]

use dabound::datagen::{self, FiniteSpec};
use dabound::estimators::{PairVotes, SamplePair};
use dabound::{FiniteDomain, Label, Posterior, VoterMatrix};

pub const TOL: f64 = 1e-12;

/// Two points; source uniform on `(x1, +1)` and `(x2, −1)`.
pub fn tiny_source() -> FiniteDomain {
    FiniteDomain::new(vec!["x1".into(), "x2".into()], vec![[0.0, 0.5], [0.5, 0.0]]).unwrap()
}

/// Same marginal as [`tiny_source`], every label positive.
pub fn tiny_target_all_positive() -> FiniteDomain {
    FiniteDomain::new(vec!["x1".into(), "x2".into()], vec![[0.0, 0.5], [0.0, 0.5]]).unwrap()
}

/// Same marginal as [`tiny_source`], labels flipped.
pub fn tiny_target_flipped() -> FiniteDomain {
    FiniteDomain::new(vec!["x1".into(), "x2".into()], vec![[0.5, 0.0], [0.0, 0.5]]).unwrap()
}

/// `{always +1, always −1}`.
pub fn tiny_voters() -> VoterMatrix {
    VoterMatrix::from_rows(vec![vec![1i64, 1], vec![-1, -1]]).unwrap()
}

pub fn tiny_rho() -> Posterior {
    Posterior::uniform(2).unwrap()
}

fn label_sign(slot: usize) -> i8 {
    if slot == 0 {
        -1
    } else {
        1
    }
}

fn err(vote: i8, y: i8) -> f64 {
    if vote != y {
        1.0
    } else {
        0.0
    }
}

pub fn gibbs_risk(d: &FiniteDomain, v: &VoterMatrix, rho: &Posterior) -> f64 {
    let mut total = 0.0;
    for x in 0..d.len() {
        for slot in 0..2 {
            let p = d.masses()[x][slot];
            for h in 0..v.n() {
                total += p * rho.weight(h) * err(v.vote(h, x), label_sign(slot));
            }
        }
    }
    total
}

pub fn disagreement(d: &FiniteDomain, v: &VoterMatrix, rho: &Posterior) -> f64 {
    let mut total = 0.0;
    for x in 0..d.len() {
        let p = d.masses()[x][0] + d.masses()[x][1];
        for h in 0..v.n() {
            for k in 0..v.n() {
                total += p * rho.weight(h) * rho.weight(k) * err(v.vote(h, x), v.vote(k, x));
            }
        }
    }
    total
}

pub fn cross_disagreement(
    d: &FiniteDomain,
    v: &VoterMatrix,
    rho: &Posterior,
    other: &Posterior,
) -> f64 {
    let mut total = 0.0;
    for x in 0..d.len() {
        let p = d.masses()[x][0] + d.masses()[x][1];
        for h in 0..v.n() {
            for k in 0..v.n() {
                total += p * rho.weight(h) * other.weight(k) * err(v.vote(h, x), v.vote(k, x));
            }
        }
    }
    total
}

pub fn joint_error(d: &FiniteDomain, v: &VoterMatrix, rho: &Posterior) -> f64 {
    let mut total = 0.0;
    for x in 0..d.len() {
        for slot in 0..2 {
            let p = d.masses()[x][slot];
            let y = label_sign(slot);
            for h in 0..v.n() {
                for k in 0..v.n() {
                    total += p
                        * rho.weight(h)
                        * rho.weight(k)
                        * err(v.vote(h, x), y)
                        * err(v.vote(k, x), y);
                }
            }
        }
    }
    total
}

/// Majority vote risk with ties going to +1.
pub fn majority_vote_risk(d: &FiniteDomain, v: &VoterMatrix, rho: &Posterior) -> f64 {
    let mut total = 0.0;
    for x in 0..d.len() {
        let margin: f64 = (0..v.n())
            .map(|h| rho.weight(h) * v.vote(h, x) as f64)
            .sum();
        let vote = if margin >= 0.0 { 1 } else { -1 };
        for slot in 0..2 {
            total += d.masses()[x][slot] * err(vote, label_sign(slot));
        }
    }
    total
}

pub fn chi_squared(target: &FiniteDomain, source: &FiniteDomain) -> f64 {
    let mut total = 0.0;
    for x in 0..source.len() {
        for slot in 0..2 {
            let (t, s) = (target.masses()[x][slot], source.masses()[x][slot]);
            if s > 0.0 {
                total += (t - s) * (t - s) / s;
            }
        }
    }
    total
}

/// Uniform over the voters of minimal target risk (exact ties).
pub fn best_target(target: &FiniteDomain, v: &VoterMatrix) -> Posterior {
    let risks: Vec<f64> = (0..v.n())
        .map(|h| gibbs_risk(target, v, &Posterior::point_mass(v.n(), h).unwrap()))
        .collect();
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let scores = risks
        .iter()
        .map(|&r| if r <= min + TOL { 1.0 } else { 0.0 })
        .collect();
    Posterior::normalized(scores).unwrap()
}

pub fn catoni(c: f64) -> f64 {
    c / (1.0 - (-c).exp())
}

pub fn kl(rho: &Posterior, pi: &Posterior) -> f64 {
    rho.weights()
        .iter()
        .zip(pi.weights())
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, p)| r * (r / p).ln())
        .sum()
}

/// Observable part of the sample bound, from raw sample rows:
/// `c′ R̂_S + α′ ½ |d̂is_S − d̂is_T| + (c′/c + α′/α) KL / m`.
pub struct SampleObjective {
    pub source_votes: Vec<Vec<i8>>,
    pub labels: Vec<i8>,
    pub target_votes: Vec<Vec<i8>>,
    pub pi: Posterior,
    pub c: f64,
    pub alpha: f64,
}

impl SampleObjective {
    pub fn new(pair: &SamplePair, votes: &PairVotes, pi: &Posterior, c: f64, alpha: f64) -> Self {
        let column =
            |vm: &VoterMatrix, i: usize| (0..vm.n()).map(|h| vm.vote(h, i)).collect::<Vec<i8>>();
        Self {
            source_votes: (0..pair.source.len())
                .map(|i| column(&votes.source, i))
                .collect(),
            labels: pair.source.labels().iter().map(|l| l.sign()).collect(),
            target_votes: (0..pair.target.len())
                .map(|i| column(&votes.target, i))
                .collect(),
            pi: pi.clone(),
            c,
            alpha,
        }
    }

    fn dis(rows: &[Vec<i8>], w: &[f64]) -> f64 {
        let mut total = 0.0;
        for row in rows {
            for h in 0..w.len() {
                for k in 0..w.len() {
                    total += w[h] * w[k] * err(row[h], row[k]);
                }
            }
        }
        total / rows.len() as f64
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let m = self.labels.len() as f64;
        let mut risk = 0.0;
        for (row, &y) in self.source_votes.iter().zip(&self.labels) {
            for (h, &wh) in w.iter().enumerate() {
                risk += wh * err(row[h], y);
            }
        }
        risk /= m;
        let dis = (Self::dis(&self.source_votes, w) - Self::dis(&self.target_votes, w)).abs();
        let cp = catoni(self.c);
        // α′ = 2α / (1 − e^{−2α})
        let ap = catoni(2.0 * self.alpha);
        let kl: f64 = w
            .iter()
            .zip(self.pi.weights())
            .filter(|(r, _)| **r > 0.0)
            .map(|(r, p)| r * (r / p).ln())
            .sum();
        cp * risk + ap * 0.5 * dis + (cp / self.c + ap / self.alpha) * kl / m
    }

    /// Minimum over the 3-simplex grid `{(i, j, k) / steps}`.
    pub fn grid_min3(&self, steps: usize) -> (f64, [f64; 3]) {
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=steps {
            for j in 0..=steps - i {
                let k = steps - i - j;
                let w = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    k as f64 / steps as f64,
                ];
                let v = self.value(&w);
                if v < best.0 {
                    best = (v, w);
                }
            }
        }
        best
    }
}

/// Random finite domain pair and voter table, sampled to equal sizes `m`.
pub fn empirical_instance(
    seed: u64,
    points: usize,
    voters: usize,
    m: usize,
) -> (SamplePair, PairVotes) {
    let inst = datagen::random_finite_instance(&FiniteSpec::new(points, voters), seed).unwrap();
    let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, 1));
    datagen::sample_pair(&inst.source, &inst.target, &inst.voters, m, m, &mut rng).unwrap()
}

pub fn label(sign: i64) -> Label {
    Label::from_sign(sign).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fixed domain pair used by the consistency checks.
pub fn consistency_instance() -> dabound::datagen::FiniteInstance {
    datagen::random_finite_instance(&FiniteSpec::new(6, 4), 2024).unwrap()
}

/// Absolute errors of the empirical source risk, source disagreement,
/// domain disagreement and source joint error for one sample of size `m`.
pub fn estimator_errors(inst: &dabound::datagen::FiniteInstance, m: usize, seed: u64) -> [f64; 4] {
    use dabound::estimators as est;
    let (s, t, v, rho) = (&inst.source, &inst.target, &inst.voters, &inst.rho);
    let mut rng = datagen::rng_from_seed(seed);
    let (pair, votes) = datagen::sample_pair(s, t, v, m, m, &mut rng).unwrap();
    let (ms, _) = est::empirical_disagreement_matrices(&pair, &votes).unwrap();
    [
        (est::empirical_gibbs_risk(&pair.source, &votes.source, rho).unwrap()
            - gibbs_risk(s, v, rho))
        .abs(),
        (ms.quadratic_form(rho).unwrap() - disagreement(s, v, rho)).abs(),
        (est::empirical_domain_disagreement(&pair, &votes, rho).unwrap()
            - (disagreement(s, v, rho) - disagreement(t, v, rho)).abs())
        .abs(),
        (est::empirical_joint_error(&pair.source, &votes.source, rho).unwrap()
            - joint_error(s, v, rho))
        .abs(),
    ]
}

/// Largest componentwise gap between the tangent-projected analytic gradient
/// and central differences along `e_i − 1/n` at a random interior posterior.
pub fn gradient_check(seed: u64) -> f64 {
    use dabound::bounds::{BoundConfig, LambdaMode};
    use dabound::learner;
    use rand::Rng;

    let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, 7));
    let n = rng.random_range(2..=6);
    let m = 40;
    let (pair, votes) = empirical_instance(seed, 6, n, m);
    let config = BoundConfig {
        c: rng.random_range(0.2..3.0),
        alpha: rng.random_range(0.2..3.0),
        delta: 0.05,
        m,
        lambda_mode: LambdaMode::Constant(0.0),
    };
    let interior = |rng: &mut datagen::SeededRng| {
        let w = datagen::dirichlet(rng, n, 1.0).unwrap();
        let w: Vec<f64> = w.iter().map(|x| 0.9 * x + 0.1 / n as f64).collect();
        Posterior::normalized(w).unwrap()
    };
    let rho = interior(&mut rng);
    let pi = interior(&mut rng);
    let g =
        learner::project_tangent(&learner::gradient(&pair, &votes, &rho, &pi, &config).unwrap());
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, gi) in g.iter().enumerate() {
        let shifted = |sign: f64| {
            let w: Vec<f64> = rho
                .weights()
                .iter()
                .enumerate()
                .map(|(j, &x)| x + sign * h * (if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64))
                .collect();
            learner::objective(&pair, &votes, &Posterior::new(w).unwrap(), &pi, &config).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        worst = worst.max((fd - gi).abs());
    }
    worst
}

/// Trained objective and the grid minimum on a random `n = 3` instance.
pub fn learner_vs_grid(seed: u64) -> (f64, f64) {
    use dabound::bounds::{BoundConfig, LambdaMode};
    use dabound::learner::{self, LearnerConfig};

    let m = 50;
    let (pair, votes) = empirical_instance(seed, 5, 3, m);
    let pi = Posterior::uniform(3).unwrap();
    let bound = BoundConfig {
        c: 1.0,
        alpha: 1.0,
        delta: 0.05,
        m,
        lambda_mode: LambdaMode::Constant(0.0),
    };
    let result = learner::train(&pair, &votes, &pi, &LearnerConfig::new(bound), None).unwrap();
    let oracle = SampleObjective::new(&pair, &votes, &pi, 1.0, 1.0);
    (
        oracle.value(result.posterior.weights()),
        oracle.grid_min3(100).0,
    )
}
