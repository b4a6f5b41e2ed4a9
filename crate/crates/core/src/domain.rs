//! Finite domains, voter tables, posteriors and the square matrices that
//! carry pairwise voter statistics.
//!
//! Every expectation in the toolkit reduces to a weighted sum over the
//! atoms of a [`FiniteDomain`] or to a quadratic form in a [`Posterior`]
//! against a [`PairMatrix`]. Product distributions over voter pairs are
//! never materialized.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance at which a probability vector is accepted as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A binary label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_sign(value: i64) -> Result<Self> {
        match value {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(Error::InvalidLabel(other)),
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    /// Slot of this label in a `[neg, pos]` pair.
    pub fn slot(self) -> usize {
        match self {
            Label::Neg => 0,
            Label::Pos => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }

    pub const BOTH: [Label; 2] = [Label::Neg, Label::Pos];
}

impl TryFrom<i64> for Label {
    type Error = Error;
    fn try_from(value: i64) -> Result<Self> {
        Label::from_sign(value)
    }
}

impl From<Label> for i64 {
    fn from(label: Label) -> i64 {
        label.sign() as i64
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.sign())
    }
}

/// Slot in a `[neg, pos]` mass pair of the label a vote of `vote` gets wrong.
#[inline]
pub(crate) fn error_slot(vote: i8) -> usize {
    if vote > 0 {
        0
    } else {
        1
    }
}

/// Exact joint mass function over a finite point set × {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDomain {
    points: Vec<String>,
    features: Option<Vec<Vec<f64>>>,
    /// `mass[x] = [P(x, -1), P(x, +1)]`.
    mass: Vec<[f64; 2]>,
}

impl FiniteDomain {
    /// Builds a domain from per-point `[neg, pos]` masses.
    ///
    /// Totals within [`NORMALIZATION_TOL`] of one are renormalized; a warning
    /// is logged when the correction is visible.
    pub fn new(points: Vec<String>, mass: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("domain point set"));
        }
        if mass.len() != points.len() {
            return Err(Error::Alignment {
                what: "mass table",
                expected: points.len(),
                found: mass.len(),
            });
        }
        let mut seen = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if seen.insert(p.as_str(), i).is_some() {
                return Err(Error::InvalidPmf(format!(
                    "duplicate point identifier {p:?}"
                )));
            }
        }
        let mut total = 0.0;
        for (i, pair) in mass.iter().enumerate() {
            for &m in pair {
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::InvalidPmf(format!(
                        "mass {m} at point {:?} is not a finite non-negative number",
                        points[i]
                    )));
                }
                total += m;
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("total mass {total} is not 1")));
        }
        let mut mass = mass;
        if total != 1.0 {
            if (total - 1.0).abs() > 1e-12 {
                log::warn!("renormalizing domain with total mass {total}");
            }
            for pair in &mut mass {
                pair[0] /= total;
                pair[1] /= total;
            }
        }
        Ok(Self {
            points,
            features: None,
            mass,
        })
    }

    /// Builds a domain over points named `x0, x1, ...`.
    pub fn from_masses(mass: Vec<[f64; 2]>) -> Result<Self> {
        let points = (0..mass.len()).map(|i| format!("x{i}")).collect();
        Self::new(points, mass)
    }

    /// Attaches a feature vector to every point.
    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.points.len() {
            return Err(Error::Alignment {
                what: "feature table",
                expected: self.points.len(),
                found: features.len(),
            });
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if let Some(bad) = features.iter().position(|f| f.len() != d) {
                return Err(Error::Alignment {
                    what: "feature vector",
                    expected: d,
                    found: features[bad].len(),
                });
            }
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Same points and features with a different mass table.
    pub fn with_masses(&self, mass: Vec<[f64; 2]>) -> Result<Self> {
        let mut out = Self::new(self.points.clone(), mass)?;
        out.features = self.features.clone();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }

    pub fn masses(&self) -> &[[f64; 2]] {
        &self.mass
    }

    pub fn mass(&self, point: usize, label: Label) -> f64 {
        self.mass[point][label.slot()]
    }

    /// Marginal over points.
    pub fn marginal(&self) -> Marginal {
        Marginal {
            mass: self.mass.iter().map(|[n, p]| n + p).collect(),
        }
    }

    pub fn shares_universe_with(&self, other: &FiniteDomain) -> bool {
        self.points == other.points
    }

    pub(crate) fn ensure_same_universe(&self, other: &FiniteDomain) -> Result<()> {
        if self.points.len() != other.points.len() {
            return Err(Error::PointUniverse(format!(
                "{} points vs {} points",
                self.points.len(),
                other.points.len()
            )));
        }
        if let Some(i) = (0..self.points.len()).find(|&i| self.points[i] != other.points[i]) {
            return Err(Error::PointUniverse(format!(
                "point {i} is {:?} in one domain and {:?} in the other",
                self.points[i], other.points[i]
            )));
        }
        Ok(())
    }
}

/// JSON shape of a [`FiniteDomain`]:
///
/// ```json
/// { "points": ["x1", "x2"],
///   "features": [[0.0], [1.0]],
///   "pmf": [["x1", 1, 0.5], ["x2", -1, 0.5]] }
/// ```
///
/// `features` is optional. Atoms absent from `pmf` carry zero mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainFile {
    pub points: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    pub pmf: Vec<(String, Label, f64)>,
}

impl TryFrom<DomainFile> for FiniteDomain {
    type Error = Error;

    fn try_from(file: DomainFile) -> Result<Self> {
        let index: HashMap<&str, usize> = file
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let mut mass = vec![[0.0; 2]; file.points.len()];
        let mut seen = vec![[false; 2]; file.points.len()];
        for (point, label, m) in &file.pmf {
            let i = *index.get(point.as_str()).ok_or_else(|| {
                Error::InvalidPmf(format!("pmf entry for unknown point {point:?}"))
            })?;
            if seen[i][label.slot()] {
                return Err(Error::InvalidPmf(format!(
                    "duplicate pmf entry for ({point}, {label})"
                )));
            }
            seen[i][label.slot()] = true;
            mass[i][label.slot()] = *m;
        }
        let domain = FiniteDomain::new(file.points, mass)?;
        match file.features {
            Some(f) => domain.with_features(f),
            None => Ok(domain),
        }
    }
}

impl From<&FiniteDomain> for DomainFile {
    fn from(domain: &FiniteDomain) -> Self {
        let mut pmf = Vec::with_capacity(2 * domain.len());
        for (i, p) in domain.points.iter().enumerate() {
            for label in [Label::Pos, Label::Neg] {
                pmf.push((p.clone(), label, domain.mass(i, label)));
            }
        }
        DomainFile {
            points: domain.points.clone(),
            features: domain.features.clone(),
            pmf,
        }
    }
}

impl Serialize for FiniteDomain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DomainFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteDomain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = DomainFile::deserialize(d)?;
        FiniteDomain::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Mass function over points only.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    mass: Vec<f64>,
}

impl Marginal {
    /// Uniform mass over `len` points.
    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("marginal point set"));
        }
        Ok(Self {
            mass: vec![1.0 / len as f64; len],
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }
}

/// Table of `n` voters evaluated on an ordered point list; entries are ±1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VoterFile", into = "VoterFile")]
pub struct VoterMatrix {
    n: usize,
    points: usize,
    votes: Vec<i8>,
}

/// JSON shape of a [`VoterMatrix`]: `{ "rows": [[1, -1], [-1, -1]] }`, one
/// row per voter, one column per point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoterFile {
    pub rows: Vec<Vec<i64>>,
}

impl TryFrom<VoterFile> for VoterMatrix {
    type Error = Error;
    fn try_from(file: VoterFile) -> Result<Self> {
        VoterMatrix::from_rows(file.rows)
    }
}

impl From<VoterMatrix> for VoterFile {
    fn from(m: VoterMatrix) -> Self {
        VoterFile {
            rows: (0..m.n)
                .map(|h| m.row(h).iter().map(|&v| v as i64).collect())
                .collect(),
        }
    }
}

impl VoterMatrix {
    pub fn from_rows<T: Copy + Into<i64>>(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("voter set"));
        }
        let points = rows[0].len();
        if points == 0 {
            return Err(Error::Empty("voter point set"));
        }
        let mut votes = Vec::with_capacity(rows.len() * points);
        for (h, row) in rows.iter().enumerate() {
            if row.len() != points {
                return Err(Error::Alignment {
                    what: "voter row",
                    expected: points,
                    found: row.len(),
                });
            }
            for (x, &v) in row.iter().enumerate() {
                let v: i64 = v.into();
                if v != 1 && v != -1 {
                    return Err(Error::InvalidVote {
                        voter: h,
                        point: x,
                        value: v,
                    });
                }
                votes.push(v as i8);
            }
        }
        Ok(Self {
            n: rows.len(),
            points,
            votes,
        })
    }

    /// Number of voters.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points (columns).
    pub fn num_points(&self) -> usize {
        self.points
    }

    pub fn vote(&self, voter: usize, point: usize) -> i8 {
        self.votes[voter * self.points + point]
    }

    pub fn row(&self, voter: usize) -> &[i8] {
        &self.votes[voter * self.points..(voter + 1) * self.points]
    }

    /// Columns picked by `indices`, in order (repeats allowed).
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("column selection"));
        }
        let mut votes = Vec::with_capacity(self.n * indices.len());
        for h in 0..self.n {
            let row = self.row(h);
            for &i in indices {
                let v = *row.get(i).ok_or(Error::Alignment {
                    what: "column index",
                    expected: self.points,
                    found: i,
                })?;
                votes.push(v);
            }
        }
        Ok(Self {
            n: self.n,
            points: indices.len(),
            votes,
        })
    }

    /// Voters reordered by `order` (`order[k]` is the old index of new voter `k`).
    pub fn permute_voters(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::Alignment {
                what: "voter permutation",
                expected: self.n,
                found: order.len(),
            });
        }
        let mut votes = Vec::with_capacity(self.votes.len());
        for &h in order {
            votes.extend_from_slice(self.row(h));
        }
        Ok(Self {
            n: self.n,
            points: self.points,
            votes,
        })
    }

    pub(crate) fn ensure_points(&self, expected: usize) -> Result<()> {
        if self.points != expected {
            return Err(Error::Alignment {
                what: "voter columns",
                expected,
                found: self.points,
            });
        }
        Ok(())
    }
}

/// Probability vector over voters; plays the role of both posterior and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorFile", into = "PosteriorFile")]
pub struct Posterior {
    weights: Vec<f64>,
}

/// JSON shape of a [`Posterior`]: `{ "weights": [0.5, 0.5] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub weights: Vec<f64>,
}

impl TryFrom<PosteriorFile> for Posterior {
    type Error = Error;
    fn try_from(file: PosteriorFile) -> Result<Self> {
        Posterior::new(file.weights)
    }
}

impl From<Posterior> for PosteriorFile {
    fn from(p: Posterior) -> Self {
        PosteriorFile { weights: p.weights }
    }
}

impl Posterior {
    /// Validates non-negativity and normalization within [`NORMALIZATION_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("posterior"));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidPosterior(format!(
                    "weight {i} is {w}, expected a finite non-negative number"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPosterior(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Divides non-negative scores by their total.
    pub fn normalized(scores: Vec<f64>) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidPosterior(format!(
                "cannot normalize scores with total {total}"
            )));
        }
        Self::new(scores.into_iter().map(|s| s / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("posterior"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, voter: usize) -> Result<Self> {
        if voter >= n {
            return Err(Error::Alignment {
                what: "point-mass index",
                expected: n,
                found: voter,
            });
        }
        let mut weights = vec![0.0; n];
        weights[voter] = 1.0;
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, voter: usize) -> f64 {
        self.weights[voter]
    }

    /// Indices with non-zero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub fn total_variation(&self, other: &Posterior) -> Result<f64> {
        self.ensure_len(other.len())?;
        Ok(0.5
            * self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        self.ensure_len(order.len())?;
        Ok(Self {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
        })
    }

    pub(crate) fn ensure_len(&self, n: usize) -> Result<()> {
        if self.weights.len() != n {
            return Err(Error::Alignment {
                what: "posterior",
                expected: n,
                found: self.weights.len(),
            });
        }
        Ok(())
    }
}

/// Dense square matrix of pairwise voter statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PairMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub(crate) fn add_to(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] += value;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `aᵀ M b`.
    pub fn bilinear(&self, a: &Posterior, b: &Posterior) -> Result<f64> {
        a.ensure_len(self.n)?;
        b.ensure_len(self.n)?;
        Ok(self.bilinear_raw(a.weights(), b.weights()))
    }

    /// `ρᵀ M ρ`.
    pub fn quadratic_form(&self, rho: &Posterior) -> Result<f64> {
        self.bilinear(rho, rho)
    }

    pub(crate) fn bilinear_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let inner: f64 = row.iter().zip(b).map(|(m, bj)| m * bj).sum();
            total += ai * inner;
        }
        total
    }

    pub(crate) fn mul_vec_raw(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &PairMatrix) -> Result<PairMatrix> {
        if self.n != other.n {
            return Err(Error::Alignment {
                what: "pair matrix",
                expected: self.n,
                found: other.n,
            });
        }
        Ok(PairMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}
