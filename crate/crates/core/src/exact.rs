//! Exact risk, disagreement and joint-error quantities on finite domains.
//!
//! Voter-pair expectations under `ρ²` are evaluated as quadratic forms
//! `ρᵀ M ρ` against [`PairMatrix`] tables; everything else is a weighted sum
//! over the atoms of a [`FiniteDomain`].

use serde::{Deserialize, Serialize};

use crate::domain::{
    error_slot, FiniteDomain, Label, Marginal, PairMatrix, Posterior, VoterMatrix,
};
use crate::error::{Error, Result};

/// Ties within this distance of the minimum risk count as minimizers in
/// [`best_target_posterior`].
pub const ARGMIN_TIE_TOL: f64 = 1e-12;

fn ensure_aligned(
    domain_points: usize,
    voters: &VoterMatrix,
    rho: Option<&Posterior>,
) -> Result<()> {
    voters.ensure_points(domain_points)?;
    if let Some(rho) = rho {
        rho.ensure_len(voters.n())?;
    }
    Ok(())
}

/// Risk of each individual voter on `domain`.
pub fn voter_risks(domain: &FiniteDomain, voters: &VoterMatrix) -> Result<Vec<f64>> {
    ensure_aligned(domain.len(), voters, None)?;
    let masses = domain.masses();
    Ok((0..voters.n())
        .map(|h| {
            voters
                .row(h)
                .iter()
                .zip(masses)
                .map(|(&v, m)| m[error_slot(v)])
                .sum()
        })
        .collect())
}

/// Risk of the Gibbs classifier: `Σ_h ρ(h) R_P(h)`.
pub fn gibbs_risk(domain: &FiniteDomain, voters: &VoterMatrix, rho: &Posterior) -> Result<f64> {
    ensure_aligned(domain.len(), voters, Some(rho))?;
    let risks = voter_risks(domain, voters)?;
    Ok(rho.weights().iter().zip(&risks).map(|(w, r)| w * r).sum())
}

/// Label predicted by the `ρ`-weighted vote at every point, with `sign(0) = +1`.
pub fn majority_vote(voters: &VoterMatrix, rho: &Posterior) -> Result<Vec<Label>> {
    rho.ensure_len(voters.n())?;
    let mut score = vec![0.0; voters.num_points()];
    for h in 0..voters.n() {
        let w = rho.weight(h);
        if w == 0.0 {
            continue;
        }
        for (s, &v) in score.iter_mut().zip(voters.row(h)) {
            *s += w * v as f64;
        }
    }
    Ok(score
        .into_iter()
        .map(|s| if s >= 0.0 { Label::Pos } else { Label::Neg })
        .collect())
}

/// Risk of the deterministic majority vote.
pub fn majority_vote_risk(
    domain: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    ensure_aligned(domain.len(), voters, Some(rho))?;
    let votes = majority_vote(voters, rho)?;
    Ok(votes
        .iter()
        .zip(domain.masses())
        .map(|(label, m)| m[label.flipped().slot()])
        .sum())
}

/// `M(i, j) = Σ_x D(x) I[h_i(x) ≠ h_j(x)]`.
pub fn pair_disagreement(marginal: &Marginal, voters: &VoterMatrix) -> Result<PairMatrix> {
    ensure_aligned(marginal.len(), voters, None)?;
    let n = voters.n();
    let mut m = PairMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let value: f64 = voters
                .row(i)
                .iter()
                .zip(voters.row(j))
                .zip(marginal.masses())
                .filter(|((a, b), _)| a != b)
                .map(|(_, d)| d)
                .sum();
            m.add_to(i, j, value);
            m.add_to(j, i, value);
        }
    }
    Ok(m)
}

/// `E(i, j) = Σ_(x,y) P(x,y) I[h_i(x) ≠ y] I[h_j(x) ≠ y]`.
///
/// Two voters can only err jointly where they agree, so each point
/// contributes the mass of the label opposite to their common vote.
pub fn joint_error_matrix(domain: &FiniteDomain, voters: &VoterMatrix) -> Result<PairMatrix> {
    ensure_aligned(domain.len(), voters, None)?;
    let n = voters.n();
    let masses = domain.masses();
    let mut e = PairMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let value: f64 = voters
                .row(i)
                .iter()
                .zip(voters.row(j))
                .zip(masses)
                .filter(|((a, b), _)| a == b)
                .map(|((&a, _), m)| m[error_slot(a)])
                .sum();
            e.add_to(i, j, value);
            if i != j {
                e.add_to(j, i, value);
            }
        }
    }
    Ok(e)
}

/// `R_D(G_ρ, G_ρ) = ρᵀ M ρ`.
pub fn expected_disagreement(dis: &PairMatrix, rho: &Posterior) -> Result<f64> {
    dis.quadratic_form(rho)
}

/// `R_D(G_ρ, G_ρ') = Σ ρ(h) ρ'(h') R_D(h, h')`.
pub fn cross_disagreement(dis: &PairMatrix, rho: &Posterior, other: &Posterior) -> Result<f64> {
    dis.bilinear(rho, other)
}

/// `|ρᵀ M_S ρ − ρᵀ M_T ρ|` from precomputed disagreement matrices.
pub fn disagreement_gap(source: &PairMatrix, target: &PairMatrix, rho: &Posterior) -> Result<f64> {
    Ok((source.quadratic_form(rho)? - target.quadratic_form(rho)?).abs())
}

/// Domain disagreement between the marginals of two domains over a shared
/// point universe.
pub fn domain_disagreement(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    source.ensure_same_universe(target)?;
    ensure_aligned(source.len(), voters, Some(rho))?;
    let ms = pair_disagreement(&source.marginal(), voters)?;
    let mt = pair_disagreement(&target.marginal(), voters)?;
    disagreement_gap(&ms, &mt, rho)
}

/// `e_P(G_ρ, G_ρ) = ρᵀ E ρ`.
pub fn expected_joint_error(
    domain: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    ensure_aligned(domain.len(), voters, Some(rho))?;
    joint_error_matrix(domain, voters)?.quadratic_form(rho)
}

/// `λ_ρ = |e_T(G_ρ, G_ρ) − e_S(G_ρ, G_ρ)|`.
pub fn lambda_rho(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
    rho: &Posterior,
) -> Result<f64> {
    source.ensure_same_universe(target)?;
    let es = expected_joint_error(source, voters, rho)?;
    let et = expected_joint_error(target, voters, rho)?;
    Ok((et - es).abs())
}

/// `χ²(P_T ‖ P_S) = Σ P_S (P_T / P_S − 1)²`, defined only when the two
/// domains put mass on exactly the same atoms.
pub fn chi_squared(target: &FiniteDomain, source: &FiniteDomain) -> Result<f64> {
    source.ensure_same_universe(target)?;
    let mut total = 0.0;
    for (i, (s, t)) in source.masses().iter().zip(target.masses()).enumerate() {
        for label in Label::BOTH {
            let (ps, pt) = (s[label.slot()], t[label.slot()]);
            if (ps > 0.0) != (pt > 0.0) {
                return Err(Error::SharedSupport {
                    point: source.points()[i].clone(),
                    label: label.sign(),
                    source_mass: ps,
                    target_mass: pt,
                });
            }
            if ps > 0.0 {
                let r = pt / ps - 1.0;
                total += ps * r * r;
            }
        }
    }
    Ok(total)
}

/// Supremum over voter pairs of the gap between source and target
/// disagreements, together with its half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdhDistance {
    pub sup: f64,
    pub half: f64,
}

pub fn hdh_sup_distance(
    source: &FiniteDomain,
    target: &FiniteDomain,
    voters: &VoterMatrix,
) -> Result<HdhDistance> {
    source.ensure_same_universe(target)?;
    let ms = pair_disagreement(&source.marginal(), voters)?;
    let mt = pair_disagreement(&target.marginal(), voters)?;
    let n = voters.n();
    let mut sup: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            sup = sup.max((mt.get(i, j) - ms.get(i, j)).abs());
        }
    }
    Ok(HdhDistance {
        sup,
        half: 0.5 * sup,
    })
}

/// Gibbs-risk minimizer on `target`: uniform over the voters of minimum risk.
pub fn best_target_posterior(target: &FiniteDomain, voters: &VoterMatrix) -> Result<Posterior> {
    let risks = voter_risks(target, voters)?;
    let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let winners: Vec<f64> = risks
        .iter()
        .map(|&r| if r - best <= ARGMIN_TIE_TOL { 1.0 } else { 0.0 })
        .collect();
    Posterior::normalized(winners)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_source() -> FiniteDomain {
        FiniteDomain::from_masses(vec![[0.0, 0.5], [0.5, 0.0]]).unwrap()
    }

    fn all_positive() -> FiniteDomain {
        FiniteDomain::from_masses(vec![[0.0, 0.5], [0.0, 0.5]]).unwrap()
    }

    fn constant_voters() -> VoterMatrix {
        VoterMatrix::from_rows(vec![vec![1i64, 1], vec![-1, -1]]).unwrap()
    }

    #[test]
    fn tiny_case_values() {
        let (d, v, rho) = (
            tiny_source(),
            constant_voters(),
            Posterior::uniform(2).unwrap(),
        );
        assert_eq!(gibbs_risk(&d, &v, &rho).unwrap(), 0.5);
        assert_eq!(majority_vote_risk(&d, &v, &rho).unwrap(), 0.5);
        let m = pair_disagreement(&d.marginal(), &v).unwrap();
        assert_eq!(
            (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)),
            (0.0, 1.0, 1.0, 0.0)
        );
        assert_eq!(expected_disagreement(&m, &rho).unwrap(), 0.5);
        assert_eq!(expected_joint_error(&d, &v, &rho).unwrap(), 0.25);
        assert_eq!(lambda_rho(&d, &all_positive(), &v, &rho).unwrap(), 0.0);
        assert_eq!(
            best_target_posterior(&all_positive(), &v)
                .unwrap()
                .weights(),
            &[1.0, 0.0]
        );
    }

    #[test]
    fn degenerate_posteriors() {
        let d = tiny_source();
        let v = VoterMatrix::from_rows(vec![vec![1i64, -1], vec![1, 1]]).unwrap();
        let perfect = Posterior::point_mass(2, 0).unwrap();
        assert_eq!(gibbs_risk(&d, &v, &perfect).unwrap(), 0.0);
        assert_eq!(expected_joint_error(&d, &v, &perfect).unwrap(), 0.0);
        let other = Posterior::point_mass(2, 1).unwrap();
        assert_eq!(gibbs_risk(&d, &v, &other).unwrap(), 0.5);
        assert_eq!(majority_vote_risk(&d, &v, &other).unwrap(), 0.5);
        assert_eq!(expected_joint_error(&d, &v, &other).unwrap(), 0.5);
        let m = pair_disagreement(&d.marginal(), &v).unwrap();
        assert_eq!(expected_disagreement(&m, &other).unwrap(), 0.0);
    }

    #[test]
    fn complementary_voters_disagree_everywhere() {
        let d = FiniteDomain::from_masses(vec![[0.1, 0.2], [0.3, 0.1], [0.2, 0.1]]).unwrap();
        let v = VoterMatrix::from_rows(vec![vec![1i64, -1, 1], vec![-1, 1, -1]]).unwrap();
        let m = pair_disagreement(&d.marginal(), &v).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
        let rho = Posterior::uniform(2).unwrap();
        assert!((expected_disagreement(&m, &rho).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_voters_vote_like_either() {
        let d = FiniteDomain::from_masses(vec![[0.1, 0.2], [0.3, 0.1], [0.2, 0.1]]).unwrap();
        let v = VoterMatrix::from_rows(vec![vec![1i64, -1, 1], vec![1, -1, 1]]).unwrap();
        let rho = Posterior::new(vec![0.3, 0.7]).unwrap();
        let single = Posterior::point_mass(2, 0).unwrap();
        assert_eq!(
            majority_vote_risk(&d, &v, &rho).unwrap(),
            gibbs_risk(&d, &v, &single).unwrap()
        );
    }

    #[test]
    fn domain_disagreement_examples() {
        let v = constant_voters();
        let rho = Posterior::uniform(2).unwrap();
        let flipped = FiniteDomain::from_masses(vec![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert_eq!(
            domain_disagreement(&tiny_source(), &flipped, &v, &rho).unwrap(),
            0.0
        );
        let on_x1 = FiniteDomain::from_masses(vec![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let on_x2 = FiniteDomain::from_masses(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(domain_disagreement(&on_x1, &on_x2, &v, &rho).unwrap(), 0.0);
        let renamed =
            FiniteDomain::new(vec!["a".into(), "b".into()], vec![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert!(matches!(
            domain_disagreement(&tiny_source(), &renamed, &v, &rho),
            Err(Error::PointUniverse(_))
        ));
    }

    #[test]
    fn lambda_absolute_difference() {
        // Source where the constant +1 voter never errs, target where it always does.
        let v = VoterMatrix::from_rows(vec![vec![1i64, 1]]).unwrap();
        let rho = Posterior::uniform(1).unwrap();
        let target = FiniteDomain::from_masses(vec![[0.3, 0.2], [0.4, 0.1]]).unwrap();
        let q = expected_joint_error(&target, &v, &rho).unwrap();
        assert!((q - 0.7).abs() < 1e-15);
        assert_eq!(lambda_rho(&all_positive(), &target, &v, &rho).unwrap(), q);
    }

    #[test]
    fn chi_squared_examples() {
        let s = FiniteDomain::from_masses(vec![[0.0, 0.5], [0.0, 0.5]]).unwrap();
        let t = FiniteDomain::from_masses(vec![[0.0, 0.75], [0.0, 0.25]]).unwrap();
        assert_eq!(chi_squared(&s, &s).unwrap(), 0.0);
        assert!((chi_squared(&t, &s).unwrap() - 0.25).abs() < 1e-15);
        let hole = FiniteDomain::from_masses(vec![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            chi_squared(&hole, &s),
            Err(Error::SharedSupport { .. })
        ));
        assert!(matches!(
            chi_squared(&s, &hole),
            Err(Error::SharedSupport { .. })
        ));
    }

    #[test]
    fn hdh_examples() {
        let v = constant_voters();
        let on_x1 = FiniteDomain::from_masses(vec![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let h = hdh_sup_distance(&tiny_source(), &on_x1, &v).unwrap();
        assert_eq!((h.sup, h.half), (0.0, 0.0));
        let single = VoterMatrix::from_rows(vec![vec![1i64, -1]]).unwrap();
        let h = hdh_sup_distance(&tiny_source(), &on_x1, &single).unwrap();
        assert_eq!((h.sup, h.half), (0.0, 0.0));
    }

    #[test]
    fn best_target_ties_and_uniques() {
        let target = FiniteDomain::from_masses(vec![[0.05, 0.55], [0.35, 0.05]]).unwrap();
        let v = VoterMatrix::from_rows(vec![vec![1i64, -1], vec![1, 1]]).unwrap();
        let risks = voter_risks(&target, &v).unwrap();
        assert!((risks[0] - 0.1).abs() < 1e-15 && (risks[1] - 0.4).abs() < 1e-15);
        assert_eq!(
            best_target_posterior(&target, &v).unwrap().weights(),
            &[1.0, 0.0]
        );
        let even = FiniteDomain::from_masses(vec![[0.1, 0.4], [0.1, 0.4]]).unwrap();
        let pair = VoterMatrix::from_rows(vec![vec![1i64, 1], vec![1, 1]]).unwrap();
        assert_eq!(
            best_target_posterior(&even, &pair).unwrap().weights(),
            &[0.5, 0.5]
        );
        let tie = VoterMatrix::from_rows(vec![vec![1i64, -1], vec![-1, 1], vec![1, 1]]).unwrap();
        let t2 = FiniteDomain::from_masses(vec![[0.25, 0.25], [0.25, 0.25]]).unwrap();
        let best = best_target_posterior(&t2, &tie).unwrap();
        assert!(best
            .weights()
            .iter()
            .all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn alignment_errors() {
        let d = tiny_source();
        let v = VoterMatrix::from_rows(vec![vec![1i64, 1, 1]]).unwrap();
        let rho = Posterior::uniform(1).unwrap();
        assert!(matches!(
            gibbs_risk(&d, &v, &rho),
            Err(Error::Alignment { .. })
        ));
        let v2 = constant_voters();
        assert!(matches!(
            gibbs_risk(&d, &v2, &rho),
            Err(Error::Alignment { .. })
        ));
        assert!(matches!(
            majority_vote_risk(&d, &v2, &rho),
            Err(Error::Alignment { .. })
        ));
        let m = pair_disagreement(&d.marginal(), &v2).unwrap();
        assert!(expected_disagreement(&m, &rho).is_err());
    }
}
