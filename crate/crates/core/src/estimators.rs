//! Empirical counterparts of the exact quantities.
//!
//! Each estimator builds the uniform empirical domain of its sample (mass
//! `1/m` per row) and delegates to [`crate::exact`], so empirical values are
//! exact values on that domain. Source and target samples may differ in
//! size here; only the PAC-Bayesian evaluator insists on a common `m`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{FiniteDomain, Label, Marginal, PairMatrix, Posterior, VoterMatrix};
use crate::error::{Error, Result};
use crate::exact;

/// Anything that maps a feature vector to a vote.
///
/// Implementations should return -1 or +1; [`evaluate_voters`] rejects any
/// other value.
pub trait Voter {
    fn vote(&self, x: &[f64]) -> i64;
}

impl<V: Voter + ?Sized> Voter for Box<V> {
    fn vote(&self, x: &[f64]) -> i64 {
        (**self).vote(x)
    }
}

impl<V: Voter + ?Sized> Voter for &V {
    fn vote(&self, x: &[f64]) -> i64 {
        (**self).vote(x)
    }
}

/// Voter that ignores its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantVoter(pub Label);

impl Voter for ConstantVoter {
    fn vote(&self, _x: &[f64]) -> i64 {
        self.0.sign() as i64
    }
}

/// Axis-aligned decision stump `x ↦ polarity · sign(x[feature] − threshold)`
/// with `sign(0) = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: Label,
}

impl Voter for Stump {
    fn vote(&self, x: &[f64]) -> i64 {
        let side = if x[self.feature] - self.threshold >= 0.0 {
            1
        } else {
            -1
        };
        side * self.polarity.sign() as i64
    }
}

/// Sign matrix of `voters` on `rows`, aligned with the row order.
pub fn evaluate_voters<V: Voter>(rows: &[Vec<f64>], voters: &[V]) -> Result<VoterMatrix> {
    if voters.is_empty() {
        return Err(Error::Empty("voter pool"));
    }
    if rows.is_empty() {
        return Err(Error::Empty("sample rows"));
    }
    let table: Vec<Vec<i64>> = voters
        .iter()
        .map(|v| rows.iter().map(|x| v.vote(x)).collect())
        .collect();
    VoterMatrix::from_rows(table)
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let first = rows.first().ok_or(Error::Empty("sample"))?;
    let d = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Alignment {
            what: "feature vector",
            expected: d,
            found: bad.len(),
        });
    }
    Ok(d)
}

/// Labeled sample drawn from the source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl LabeledSample {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        check_rows(&features)?;
        if labels.len() != features.len() {
            return Err(Error::Alignment {
                what: "label column",
                expected: features.len(),
                found: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Drops the labels.
    pub fn unlabeled(&self) -> UnlabeledSample {
        UnlabeledSample {
            features: self.features.clone(),
        }
    }

    /// Rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Uniform empirical domain: one point per row, mass `1/m` on its label.
    pub fn empirical_domain(&self) -> Result<FiniteDomain> {
        let w = 1.0 / self.len() as f64;
        let mass = self
            .labels
            .iter()
            .map(|l| match l {
                Label::Neg => [w, 0.0],
                Label::Pos => [0.0, w],
            })
            .collect();
        let points = (0..self.len()).map(|i| format!("s{i}")).collect();
        FiniteDomain::new(points, mass)
    }
}

/// Unlabeled sample drawn from the target marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledSample {
    features: Vec<Vec<f64>>,
}

impl UnlabeledSample {
    pub fn new(features: Vec<Vec<f64>>) -> Result<Self> {
        check_rows(&features)?;
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.features[i].clone()).collect())
    }

    pub fn empirical_marginal(&self) -> Result<Marginal> {
        Marginal::uniform(self.len())
    }
}

/// Labeled source sample together with an unlabeled target sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub source: LabeledSample,
    pub target: UnlabeledSample,
}

impl SamplePair {
    pub fn new(source: LabeledSample, target: UnlabeledSample) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::Alignment {
                what: "target feature dimension",
                expected: source.dim(),
                found: target.dim(),
            });
        }
        Ok(Self { source, target })
    }

    /// Evaluates a voter pool on both samples.
    pub fn evaluate<V: Voter>(&self, voters: &[V]) -> Result<PairVotes> {
        PairVotes::new(
            evaluate_voters(self.source.features(), voters)?,
            evaluate_voters(self.target.features(), voters)?,
        )
    }
}

/// Votes of one voter set on the source and target samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PairVotes {
    pub source: VoterMatrix,
    pub target: VoterMatrix,
}

impl PairVotes {
    pub fn new(source: VoterMatrix, target: VoterMatrix) -> Result<Self> {
        if source.n() != target.n() {
            return Err(Error::Alignment {
                what: "target voter count",
                expected: source.n(),
                found: target.n(),
            });
        }
        Ok(Self { source, target })
    }

    pub fn n(&self) -> usize {
        self.source.n()
    }

    pub(crate) fn ensure_aligned(&self, pair: &SamplePair) -> Result<()> {
        self.source.ensure_points(pair.source.len())?;
        self.target.ensure_points(pair.target.len())
    }
}

pub fn empirical_gibbs_risk(
    sample: &LabeledSample,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    exact::gibbs_risk(&sample.empirical_domain()?, voters, rho)
}

/// Per-voter empirical risks.
pub fn empirical_voter_risks(sample: &LabeledSample, voters: &VoterMatrix) -> Result<Vec<f64>> {
    exact::voter_risks(&sample.empirical_domain()?, voters)
}

/// Empirical disagreement matrices `(M̂_S, M̂_T)`.
pub fn empirical_disagreement_matrices(
    pair: &SamplePair,
    votes: &PairVotes,
) -> Result<(PairMatrix, PairMatrix)> {
    votes.ensure_aligned(pair)?;
    let ms = exact::pair_disagreement(&pair.source.empirical_domain()?.marginal(), &votes.source)?;
    let mt = exact::pair_disagreement(&pair.target.empirical_marginal()?, &votes.target)?;
    Ok((ms, mt))
}

/// `|ρᵀ M̂_S ρ − ρᵀ M̂_T ρ|`.
pub fn empirical_domain_disagreement(
    pair: &SamplePair,
    votes: &PairVotes,
    rho: &Posterior,
) -> Result<f64> {
    let (ms, mt) = empirical_disagreement_matrices(pair, votes)?;
    exact::disagreement_gap(&ms, &mt, rho)
}

pub fn empirical_joint_error(
    sample: &LabeledSample,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    exact::expected_joint_error(&sample.empirical_domain()?, voters, rho)
}

/// Header name of the optional label column.
pub const LABEL_COLUMN: &str = "label";

struct CsvTable {
    features: Vec<Vec<f64>>,
    labels: Option<Vec<Label>>,
}

fn read_table<R: Read>(reader: R) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let labeled = headers
        .iter()
        .next_back()
        .is_some_and(|h| h.trim().eq_ignore_ascii_case(LABEL_COLUMN));
    let width = headers.len();
    let d = if labeled { width - 1 } else { width };
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }
    if let Some(h) = headers
        .iter()
        .take(d)
        .find(|h| h.trim().parse::<f64>().is_ok())
    {
        return Err(Error::Parse {
            line: 1,
            message: format!("header row required, found numeric field {h:?}"),
        });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(d);
        for field in record.iter().take(d) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number {field:?}"),
            })?;
            row.push(v);
        }
        features.push(row);
        if labeled {
            let raw = record[d].trim();
            let label = raw
                .trim_start_matches('+')
                .parse::<i64>()
                .ok()
                .and_then(|v| Label::from_sign(v).ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("invalid label {raw:?}, expected -1 or +1"),
                })?;
            labels.push(label);
        }
    }
    if features.is_empty() {
        return Err(Error::Empty("sample file"));
    }
    Ok(CsvTable {
        features,
        labels: labeled.then_some(labels),
    })
}

/// Reads a labeled sample; the last header must be `label`.
pub fn read_labeled_csv<R: Read>(reader: R) -> Result<LabeledSample> {
    let table = read_table(reader)?;
    let labels = table.labels.ok_or(Error::MissingLabels)?;
    LabeledSample::new(table.features, labels)
}

/// Reads an unlabeled sample. A label column, if present, is discarded.
pub fn read_unlabeled_csv<R: Read>(reader: R) -> Result<UnlabeledSample> {
    let table = read_table(reader)?;
    if table.labels.is_some() {
        log::warn!("discarding label column of a sample read as unlabeled");
    }
    UnlabeledSample::new(table.features)
}

fn feature_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

pub fn write_labeled_csv<W: Write>(sample: &LabeledSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = feature_header(sample.dim());
    header.push(LABEL_COLUMN.into());
    w.write_record(&header)?;
    for (x, y) in sample.features.iter().zip(&sample.labels) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.sign().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_unlabeled_csv<W: Write>(sample: &UnlabeledSample, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(feature_header(sample.dim()))?;
    for x in &sample.features {
        w.write_record(x.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sample() -> LabeledSample {
        LabeledSample::new(
            vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]],
            vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg],
        )
        .unwrap()
    }

    fn constants() -> Vec<ConstantVoter> {
        vec![ConstantVoter(Label::Pos), ConstantVoter(Label::Neg)]
    }

    #[test]
    fn evaluates_voters() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let m = evaluate_voters(&rows, &[ConstantVoter(Label::Pos)]).unwrap();
        assert_eq!(m.row(0), &[1, 1, 1]);
        let stump = Stump {
            feature: 0,
            threshold: 0.0,
            polarity: Label::Pos,
        };
        let m = evaluate_voters(&[vec![-2.0], vec![3.0]], &[stump]).unwrap();
        assert_eq!(m.row(0), &[-1, 1]);
        assert!(matches!(
            evaluate_voters::<ConstantVoter>(&rows, &[]),
            Err(Error::Empty(_))
        ));
    }

    struct Broken;
    impl Voter for Broken {
        fn vote(&self, _: &[f64]) -> i64 {
            0
        }
    }

    #[test]
    fn rejects_non_binary_votes() {
        let r = evaluate_voters(&[vec![0.0]], &[Broken]);
        assert!(matches!(r, Err(Error::InvalidVote { value: 0, .. })));
    }

    #[test]
    fn tiny_case_estimates() {
        let s = tiny_sample();
        let v = evaluate_voters(s.features(), &constants()).unwrap();
        let rho = Posterior::uniform(2).unwrap();
        assert_eq!(empirical_gibbs_risk(&s, &v, &rho).unwrap(), 0.5);
        assert_eq!(empirical_joint_error(&s, &v, &rho).unwrap(), 0.25);
        let perfect = Stump {
            feature: 0,
            threshold: 0.5,
            polarity: Label::Neg,
        };
        let pv = evaluate_voters(s.features(), &[perfect]).unwrap();
        let point = Posterior::uniform(1).unwrap();
        assert_eq!(empirical_gibbs_risk(&s, &pv, &point).unwrap(), 0.0);
        assert_eq!(empirical_joint_error(&s, &pv, &point).unwrap(), 0.0);
    }

    #[test]
    fn complementary_pair_has_half_risk() {
        let s = LabeledSample::new(
            vec![vec![0.3], vec![-1.0], vec![2.0]],
            vec![Label::Pos, Label::Pos, Label::Neg],
        )
        .unwrap();
        let h = Stump {
            feature: 0,
            threshold: 0.0,
            polarity: Label::Pos,
        };
        let minus_h = Stump {
            polarity: Label::Neg,
            ..h
        };
        let v = evaluate_voters(s.features(), &[h, minus_h]).unwrap();
        let rho = Posterior::uniform(2).unwrap();
        assert_eq!(empirical_gibbs_risk(&s, &v, &rho).unwrap(), 0.5);
    }

    #[test]
    fn disagreement_examples() {
        let s = tiny_sample();
        let pair = SamplePair::new(s.clone(), s.unlabeled()).unwrap();
        let pool = constants();
        let votes = pair.evaluate(&pool).unwrap();
        let rho = Posterior::uniform(2).unwrap();
        assert_eq!(
            empirical_domain_disagreement(&pair, &votes, &rho).unwrap(),
            0.0
        );

        let single = pair.evaluate(&[ConstantVoter(Label::Pos)]).unwrap();
        let one = Posterior::uniform(1).unwrap();
        assert_eq!(
            empirical_domain_disagreement(&pair, &single, &one).unwrap(),
            0.0
        );

        // source {x: 0}, target {x: 1}, voters {sign(x - 0.5), always +1}
        let src = LabeledSample::new(vec![vec![0.0]], vec![Label::Pos]).unwrap();
        let tgt = UnlabeledSample::new(vec![vec![1.0]]).unwrap();
        let pair = SamplePair::new(src, tgt).unwrap();
        let stump = Stump {
            feature: 0,
            threshold: 0.5,
            polarity: Label::Pos,
        };
        let votes = PairVotes::new(
            evaluate_voters(
                pair.source.features(),
                &[&stump as &dyn Voter, &ConstantVoter(Label::Pos)],
            )
            .unwrap(),
            evaluate_voters(
                pair.target.features(),
                &[&stump as &dyn Voter, &ConstantVoter(Label::Pos)],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(
            empirical_domain_disagreement(&pair, &votes, &rho).unwrap(),
            0.5
        );
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let s = tiny_sample();
        let mut buf = Vec::new();
        write_labeled_csv(&s, &mut buf).unwrap();
        assert_eq!(read_labeled_csv(buf.as_slice()).unwrap(), s);
        assert_eq!(read_unlabeled_csv(buf.as_slice()).unwrap(), s.unlabeled());

        let mut ubuf = Vec::new();
        write_unlabeled_csv(&s.unlabeled(), &mut ubuf).unwrap();
        assert!(matches!(
            read_labeled_csv(ubuf.as_slice()),
            Err(Error::MissingLabels)
        ));

        let bad = "x0,label\n1.0,1\nfoo,-1\n";
        match read_labeled_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = "x0,label\n1.0,0\n";
        assert!(matches!(
            read_labeled_csv(bad_label.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let headerless = "1.0,2.0\n3.0,4.0\n";
        assert!(matches!(
            read_unlabeled_csv(headerless.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_unlabeled_csv("x0\n".as_bytes()),
            Err(Error::Empty(_))
        ));
        let plus = "x0,label\n0.5,+1\n";
        assert_eq!(
            read_labeled_csv(plus.as_bytes()).unwrap().labels(),
            &[Label::Pos]
        );
    }
}
