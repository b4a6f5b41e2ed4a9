//! Seeded generators: random finite instances, shared-support perturbations,
//! label-flip pairs, rotated two-moons samples and decision-stump pools.
//!
//! Every generator is a pure function of its spec and seed. Streams for
//! sub-tasks (campaign instances, Monte Carlo trials) are derived from a
//! master seed with [`derive_seed`], never from shared mutable state.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{FiniteDomain, Label, Posterior, VoterMatrix};
use crate::error::{Error, Result};
use crate::estimators::{LabeledSample, PairVotes, SamplePair, Stump, UnlabeledSample};
use crate::exact;

/// Concentration of the symmetric Dirichlet used for random masses and posteriors.
pub const DEFAULT_CONCENTRATION: f64 = 1.0;

/// Deterministic generator type used throughout.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 mix of `(master, stream)`: a counter-based child seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw from a symmetric Dirichlet via normalized Gamma variates.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, len: usize, concentration: f64) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Empty("dirichlet dimension"));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::Config(format!("invalid concentration {concentration}: {e}")))?;
    let mut draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        // Every gamma draw underflowed; fall back to the barycenter.
        return Ok(vec![1.0 / len as f64; len]);
    }
    draws.iter_mut().for_each(|v| *v /= total);
    Ok(draws)
}

pub fn random_posterior<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    concentration: f64,
) -> Result<Posterior> {
    Posterior::normalized(dirichlet(rng, n, concentration)?)
}

/// Size parameters for random finite instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpec {
    pub points: usize,
    pub voters: usize,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

fn default_concentration() -> f64 {
    DEFAULT_CONCENTRATION
}

impl FiniteSpec {
    pub fn new(points: usize, voters: usize) -> Self {
        Self {
            points,
            voters,
            concentration: DEFAULT_CONCENTRATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.voters == 0 {
            return Err(Error::Config(
                "point and voter counts must be at least 1".into(),
            ));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::Config(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        Ok(())
    }
}

/// Parameters of the rotated two-moons task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoonsSpec {
    pub source_size: usize,
    pub target_size: usize,
    pub heldout_size: usize,
    /// Degrees, in `[0, 180)`.
    pub angle: f64,
    /// Standard deviation of the Gaussian coordinate noise.
    pub noise: f64,
}

impl MoonsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.source_size == 0 || self.target_size == 0 || self.heldout_size == 0 {
            return Err(Error::Config("sample sizes must be at least 1".into()));
        }
        if !(0.0..180.0).contains(&self.angle) {
            return Err(Error::Config(format!(
                "angle {} outside [0, 180)",
                self.angle
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise {} must be non-negative",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Every kind of dataset the generators produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    RandomFinite {
        #[serde(flatten)]
        finite: FiniteSpec,
    },
    Chi2Perturbed {
        #[serde(flatten)]
        finite: FiniteSpec,
        magnitude: f64,
    },
    RotatedMoons {
        #[serde(flatten)]
        moons: MoonsSpec,
    },
    LabelFlip {
        #[serde(flatten)]
        finite: FiniteSpec,
        noise_rate: f64,
    },
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::RandomFinite { finite } => finite.validate(),
            DatasetSpec::Chi2Perturbed { finite, magnitude } => {
                finite.validate()?;
                if !(*magnitude >= 0.0 && magnitude.is_finite()) {
                    return Err(Error::Config(format!(
                        "magnitude {magnitude} must be non-negative"
                    )));
                }
                Ok(())
            }
            DatasetSpec::RotatedMoons { moons } => moons.validate(),
            DatasetSpec::LabelFlip { finite, noise_rate } => {
                finite.validate()?;
                if !(0.0..=0.5).contains(noise_rate) {
                    return Err(Error::Config(format!(
                        "noise rate {noise_rate} outside [0, 1/2]"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Source and target domains over one point universe, with voters and a posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteInstance {
    pub source: FiniteDomain,
    pub target: FiniteDomain,
    pub voters: VoterMatrix,
    pub rho: Posterior,
}

fn random_domain<R: Rng + ?Sized>(
    rng: &mut R,
    points: usize,
    concentration: f64,
) -> Result<FiniteDomain> {
    let flat = dirichlet(rng, 2 * points, concentration)?;
    FiniteDomain::from_masses(flat.chunks(2).map(|c| [c[0], c[1]]).collect())
}

fn random_voters<R: Rng + ?Sized>(rng: &mut R, n: usize, points: usize) -> Result<VoterMatrix> {
    let rows: Vec<Vec<i64>> = (0..n)
        .map(|_| {
            (0..points)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect()
        })
        .collect();
    VoterMatrix::from_rows(rows)
}

/// Dirichlet source and target, uniform ±1 voter table and Dirichlet posterior.
pub fn random_finite_instance(spec: &FiniteSpec, seed: u64) -> Result<FiniteInstance> {
    random_finite_instance_with(spec, &mut rng_from_seed(seed))
}

pub fn random_finite_instance_with<R: Rng + ?Sized>(
    spec: &FiniteSpec,
    rng: &mut R,
) -> Result<FiniteInstance> {
    spec.validate()?;
    let source = random_domain(rng, spec.points, spec.concentration)?;
    let target = random_domain(rng, spec.points, spec.concentration)?;
    let voters = random_voters(rng, spec.voters, spec.points)?;
    let rho = random_posterior(rng, spec.voters, spec.concentration)?;
    Ok(FiniteInstance {
        source,
        target,
        voters,
        rho,
    })
}

/// Target that keeps the source marginal and moves a `noise_rate` share of
/// each atom's mass onto the opposite label.
pub fn label_flip_target(source: &FiniteDomain, noise_rate: f64) -> Result<FiniteDomain> {
    if !(0.0..=0.5).contains(&noise_rate) {
        return Err(Error::Config(format!(
            "noise rate {noise_rate} outside [0, 1/2]"
        )));
    }
    let mass = source
        .masses()
        .iter()
        .map(|[n, p]| {
            [
                (1.0 - noise_rate) * n + noise_rate * p,
                (1.0 - noise_rate) * p + noise_rate * n,
            ]
        })
        .collect();
    source.with_masses(mass)
}

pub fn label_flip_instance(
    spec: &FiniteSpec,
    noise_rate: f64,
    seed: u64,
) -> Result<FiniteInstance> {
    let mut inst = random_finite_instance(spec, seed)?;
    inst.target = label_flip_target(&inst.source, noise_rate)?;
    Ok(inst)
}

/// Result of [`chi2_perturbed_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedPair {
    pub source: FiniteDomain,
    pub target: FiniteDomain,
    pub chi2: f64,
}

/// Perturbs `base` along a random mean-zero, unit-norm direction over its
/// positive atoms: `target = base + magnitude · u`.
pub fn chi2_perturbed_pair(
    base: &FiniteDomain,
    magnitude: f64,
    seed: u64,
) -> Result<PerturbedPair> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::Config(format!(
            "magnitude {magnitude} must be non-negative"
        )));
    }
    let flat: Vec<f64> = base
        .masses()
        .iter()
        .flat_map(|m| m.iter().copied())
        .collect();
    let support: Vec<usize> = (0..flat.len()).filter(|&a| flat[a] > 0.0).collect();

    let mut rng = rng_from_seed(seed);
    let mut dir: Vec<f64> = support.iter().map(|_| rng.sample(StandardNormal)).collect();
    let mean = dir.iter().sum::<f64>() / dir.len() as f64;
    dir.iter_mut().for_each(|v| *v -= mean);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        dir.iter_mut().for_each(|v| *v /= norm);
    }

    let mut perturbed = flat.clone();
    for (&atom, &u) in support.iter().zip(&dir) {
        let m = flat[atom] + magnitude * u;
        if m <= 0.0 {
            return Err(Error::SupportDestroyed { magnitude, atom });
        }
        perturbed[atom] = m;
    }
    let total: f64 = perturbed.iter().sum();
    let target = base.with_masses(
        perturbed
            .chunks(2)
            .map(|c| [c[0] / total, c[1] / total])
            .collect(),
    )?;
    let chi2 = exact::chi_squared(&target, base)?;
    Ok(PerturbedPair {
        source: base.clone(),
        target,
        chi2,
    })
}

/// Source and target moons samples plus a labeled target sample that is
/// kept apart from the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MoonsData {
    pub pair: SamplePair,
    pub heldout: LabeledSample,
}

fn moon_point<R: Rng + ?Sized>(rng: &mut R, noise: &Normal<f64>) -> ([f64; 2], Label) {
    let upper = rng.random::<bool>();
    let t = rng.random::<f64>() * std::f64::consts::PI;
    let (x, y, label) = if upper {
        (t.cos(), t.sin(), Label::Pos)
    } else {
        (1.0 - t.cos(), 0.5 - t.sin(), Label::Neg)
    };
    ([x + noise.sample(rng), y + noise.sample(rng)], label)
}

fn rotate(p: [f64; 2], angle_deg: f64) -> Vec<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn moons_rows<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    angle: f64,
    noise: &Normal<f64>,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    (0..size)
        .map(|_| {
            let (p, label) = moon_point(rng, noise);
            (rotate(p, angle), label)
        })
        .unzip()
}

/// Two interleaved unit half-circles (the lower one offset by (1, -0.5))
/// as source; the target is the same law rotated about the origin.
pub fn rotated_moons(spec: &MoonsSpec, seed: u64) -> Result<MoonsData> {
    spec.validate()?;
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let (sx, sy) = moons_rows(&mut rng, spec.source_size, 0.0, &noise);
    let (tx, _) = moons_rows(&mut rng, spec.target_size, spec.angle, &noise);
    let (hx, hy) = moons_rows(&mut rng, spec.heldout_size, spec.angle, &noise);
    Ok(MoonsData {
        pair: SamplePair::new(LabeledSample::new(sx, sy)?, UnlabeledSample::new(tx)?)?,
        heldout: LabeledSample::new(hx, hy)?,
    })
}

/// `count` stumps with thresholds at uniformly drawn empirical quantiles of
/// a uniformly drawn coordinate. Stumps come in polarity pairs; an odd
/// count ends with a single positive stump.
pub fn stump_pool(rows: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Stump>> {
    if count == 0 {
        return Err(Error::Config("stump count must be at least 1".into()));
    }
    let first = rows.first().ok_or(Error::Empty("stump rows"))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::Empty("feature dimension"));
    }
    let mut columns: Vec<Vec<f64>> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    for c in &mut columns {
        c.sort_by(f64::total_cmp);
    }
    let mut rng = rng_from_seed(seed);
    let mut pool = Vec::with_capacity(count);
    while pool.len() < count {
        let feature = rng.random_range(0..d);
        let q: f64 = rng.random();
        let col = &columns[feature];
        let threshold = col[(q * (col.len() - 1) as f64).round() as usize];
        let stump = Stump {
            feature,
            threshold,
            polarity: Label::Pos,
        };
        pool.push(stump);
        if pool.len() < count {
            pool.push(Stump {
                polarity: Label::Neg,
                ..stump
            });
        }
    }
    Ok(pool)
}

/// I.i.d. atoms `(point, label)` drawn from `domain`.
pub fn draw_atoms<R: Rng + ?Sized>(
    domain: &FiniteDomain,
    m: usize,
    rng: &mut R,
) -> Result<Vec<(usize, Label)>> {
    let flat: Vec<f64> = domain
        .masses()
        .iter()
        .flat_map(|p| p.iter().copied())
        .collect();
    let index = WeightedIndex::new(&flat).map_err(|e| Error::InvalidPmf(e.to_string()))?;
    Ok((0..m)
        .map(|_| {
            let a = index.sample(rng);
            (a / 2, if a % 2 == 0 { Label::Neg } else { Label::Pos })
        })
        .collect())
}

fn point_features(domain: &FiniteDomain, point: usize) -> Vec<f64> {
    match domain.features() {
        Some(f) => f[point].clone(),
        None => vec![point as f64],
    }
}

/// Draws `S ~ P_S^{m_s}` and `T ~ D_T^{m_t}` from two domains over a shared
/// universe and gathers the matching voter columns. Points without
/// features are represented by their index.
pub fn sample_pair<R: Rng + ?Sized>(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    m_source: usize,
    m_target: usize,
    rng: &mut R,
) -> Result<(SamplePair, PairVotes)> {
    source.ensure_same_universe(target)?;
    voters.ensure_points(source.len())?;
    if m_source == 0 || m_target == 0 {
        return Err(Error::Empty("sample"));
    }
    let s_atoms = draw_atoms(source, m_source, rng)?;
    let t_atoms = draw_atoms(target, m_target, rng)?;
    let s_idx: Vec<usize> = s_atoms.iter().map(|a| a.0).collect();
    let t_idx: Vec<usize> = t_atoms.iter().map(|a| a.0).collect();
    let src = LabeledSample::new(
        s_idx.iter().map(|&i| point_features(source, i)).collect(),
        s_atoms.iter().map(|a| a.1).collect(),
    )?;
    let tgt = UnlabeledSample::new(t_idx.iter().map(|&i| point_features(target, i)).collect())?;
    let votes = PairVotes::new(voters.gather(&s_idx)?, voters.gather(&t_idx)?)?;
    Ok((SamplePair::new(src, tgt)?, votes))
}
