mod common;

use common::*;
use dabound::bounds;
use dabound::datagen::{self, FiniteSpec};
use dabound::exact;
use dabound::{Label, Posterior};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}

#[test]
fn tiny_case_values_match_oracle_and_hand_values() {
    let (s, t, v, rho) = (
        tiny_source(),
        tiny_target_all_positive(),
        tiny_voters(),
        tiny_rho(),
    );
    assert!(close(gibbs_risk(&s, &v, &rho), 0.5));
    assert!(close(disagreement(&s, &v, &rho), 0.5));
    assert!(close(joint_error(&s, &v, &rho), 0.25));
    assert!(close(majority_vote_risk(&s, &v, &rho), 0.5));

    assert!(close(exact::gibbs_risk(&s, &v, &rho).unwrap(), 0.5));
    let ms = exact::pair_disagreement(&s.marginal(), &v).unwrap();
    assert_eq!(
        [ms.get(0, 0), ms.get(0, 1), ms.get(1, 0), ms.get(1, 1)],
        [0.0, 1.0, 1.0, 0.0]
    );
    assert!(close(exact::expected_disagreement(&ms, &rho).unwrap(), 0.5));
    assert!(close(
        exact::expected_joint_error(&s, &v, &rho).unwrap(),
        0.25
    ));
    assert!(close(exact::majority_vote_risk(&s, &v, &rho).unwrap(), 0.5));
    assert_eq!(
        exact::majority_vote(&v, &rho).unwrap(),
        vec![Label::Pos, Label::Pos]
    );

    assert!(close(
        exact::domain_disagreement(&s, &tiny_target_flipped(), &v, &rho).unwrap(),
        0.0
    ));
    assert!(close(exact::lambda_rho(&s, &t, &v, &rho).unwrap(), 0.0));
    assert_eq!(
        exact::best_target_posterior(&t, &v).unwrap(),
        Posterior::point_mass(2, 0).unwrap()
    );

    let joint = bounds::joint_error_bound(&s, &t, &v, &rho).unwrap();
    assert!(close(joint.rhs, 0.5));
    assert!(close(joint.target_risk.unwrap(), 0.5));
    let best = bounds::best_target_bound(&s, &t, &v, &rho).unwrap();
    assert!(close(best.rhs, 1.5));
    assert!(close(best.best_target_risk.unwrap(), 0.0));
    assert!(close(best.target_cross_disagreement.unwrap(), 0.5));
    assert!(close(best.source_cross_disagreement.unwrap(), 0.5));
}

#[test]
fn hdh_on_point_mass_target_is_zero() {
    let s = tiny_source();
    let t =
        dabound::FiniteDomain::new(vec!["x1".into(), "x2".into()], vec![[0.0, 1.0], [0.0, 0.0]])
            .unwrap();
    let h = exact::hdh_sup_distance(&s, &t, &tiny_voters()).unwrap();
    assert_eq!((h.sup, h.half), (0.0, 0.0));
}

#[test]
fn engine_matches_brute_force_on_random_instances() {
    for seed in 0..500u64 {
        let mut rng = datagen::rng_from_seed(seed);
        use rand::Rng;
        let spec = FiniteSpec::new(rng.random_range(1..=6), rng.random_range(1..=5));
        let inst = datagen::random_finite_instance(&spec, seed).unwrap();
        let (s, t, v, rho) = (&inst.source, &inst.target, &inst.voters, &inst.rho);

        assert!(close(
            exact::gibbs_risk(s, v, rho).unwrap(),
            gibbs_risk(s, v, rho)
        ));
        assert!(close(
            exact::majority_vote_risk(s, v, rho).unwrap(),
            majority_vote_risk(s, v, rho)
        ));
        let ms = exact::pair_disagreement(&s.marginal(), v).unwrap();
        let mt = exact::pair_disagreement(&t.marginal(), v).unwrap();
        assert!(close(
            exact::expected_disagreement(&ms, rho).unwrap(),
            disagreement(s, v, rho)
        ));
        assert!(close(
            exact::expected_disagreement(&mt, rho).unwrap(),
            disagreement(t, v, rho)
        ));
        assert!(close(
            exact::expected_joint_error(s, v, rho).unwrap(),
            joint_error(s, v, rho)
        ));
        let dis = (disagreement(s, v, rho) - disagreement(t, v, rho)).abs();
        assert!(close(
            exact::domain_disagreement(s, t, v, rho).unwrap(),
            dis
        ));
        let lambda = (joint_error(t, v, rho) - joint_error(s, v, rho)).abs();
        assert!(close(exact::lambda_rho(s, t, v, rho).unwrap(), lambda));
        assert!(close(exact::chi_squared(t, s).unwrap(), chi_squared(t, s)));

        let best = best_target(t, v);
        assert_eq!(exact::best_target_posterior(t, v).unwrap(), best);

        let joint = bounds::joint_error_bound(s, t, v, rho).unwrap();
        assert!(close(joint.rhs, gibbs_risk(s, v, rho) + 0.5 * dis + lambda));
        let best_bound = bounds::best_target_bound(s, t, v, rho).unwrap();
        let lambda1 = gibbs_risk(t, v, &best)
            + cross_disagreement(t, v, rho, &best)
            + cross_disagreement(s, v, rho, &best);
        assert!(close(best_bound.rhs, gibbs_risk(s, v, rho) + dis + lambda1));
        let chi2_bound = bounds::chi2_lambda_bound(s, t, v, rho).unwrap();
        assert!(close(
            chi2_bound,
            (chi_squared(t, s) * joint_error(s, v, rho)).sqrt()
        ));
    }
}

#[test]
fn hdh_sup_matches_enumeration_over_voter_pairs() {
    for seed in 0..200u64 {
        let inst = datagen::random_finite_instance(&FiniteSpec::new(5, 4), seed).unwrap();
        let (s, t, v) = (&inst.source, &inst.target, &inst.voters);
        let mut sup: f64 = 0.0;
        for h in 0..v.n() {
            for k in 0..v.n() {
                let (ph, pk) = (
                    Posterior::point_mass(v.n(), h).unwrap(),
                    Posterior::point_mass(v.n(), k).unwrap(),
                );
                let gap = cross_disagreement(t, v, &ph, &pk) - cross_disagreement(s, v, &ph, &pk);
                sup = sup.max(gap.abs());
            }
        }
        let hdh = exact::hdh_sup_distance(s, t, v).unwrap();
        assert!(close(hdh.sup, sup));
        assert!(close(hdh.half, 0.5 * sup));
    }
}
