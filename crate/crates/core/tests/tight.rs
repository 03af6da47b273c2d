use nsmpi::adversarial::{
    build_tight_mdp, closed_form_values, simulate_tight, tight_policy_closed_form, verify_tight_trajectory,
    TightInstanceSpec, LEFT, RIGHT,
};
use nsmpi::bounds::{theorem2_bound, BoundInputs};
use nsmpi::dp::solve_optimal;
use nsmpi::MParameter;

#[test]
fn optimal_value_is_zero() {
    let spec = TightInstanceSpec::new(2, 1, 0.1, 0.9, 4).unwrap();
    let mdp = build_tight_mdp(&spec).unwrap();
    let (policy, v_star) = solve_optimal(&mdp).unwrap();
    assert!(v_star.max_abs() <= 1e-12);
    assert!(policy.actions()[1..].iter().all(|&a| a == LEFT));
}

#[test]
fn loss_is_realised_at_state_k() {
    for &(ell, m) in &[(1, 0), (1, 3), (2, 3), (3, 2), (2, 1)] {
        let spec = TightInstanceSpec::new(ell, m, 0.1, 0.9, 8).unwrap();
        let (_, records) = simulate_tight(&spec, MParameter::Finite(m)).unwrap();
        for r in &records {
            let at_k = -r.periodic_value[r.k - 1];
            assert!((at_k - r.loss_sup.unwrap()).abs() <= 1e-12, "ℓ={ell} m={m} k={}", r.k);
        }
    }
}

#[test]
fn bound_is_attained_on_a_grid() {
    for ell in 1..=3 {
        for m in 0..=3 {
            for &(gamma, eps) in &[(0.9, 0.1), (0.7, 1.0), (0.95, 0.25)] {
                let spec = TightInstanceSpec::new(ell, m, eps, gamma, 8).unwrap();
                let report = verify_tight_trajectory(&spec).unwrap();
                assert!(report.success, "ℓ={ell} m={m} γ={gamma}");
                assert!(report.bound_attained, "ℓ={ell} m={m} γ={gamma}");
                for row in &report.rows {
                    let bound = theorem2_bound(&BoundInputs::new(gamma, ell, row.k, eps, 0.0).unwrap());
                    assert!((row.loss - bound).abs() <= 1e-9 * bound.max(1.0));
                }
            }
        }
    }
}

#[test]
fn exact_evaluation_attains_the_bound() {
    // m = ∞ needs as many states as the largest finite m it stands in for
    let spec = TightInstanceSpec::new(2, 20, 0.1, 0.9, 8).unwrap();
    let (_, records) = simulate_tight(&spec, MParameter::Infinite).unwrap();
    for r in &records {
        assert!((r.loss_sup.unwrap() - spec.attained_loss(r.k)).abs() <= 1e-9, "k={}", r.k);
    }
}

#[test]
fn first_iterate_carries_one_error() {
    let spec = TightInstanceSpec::new(2, 1, 0.1, 0.9, 3).unwrap();
    let v1 = closed_form_values(1, &spec).unwrap();
    let (_, records) = simulate_tight(&spec, MParameter::Finite(1)).unwrap();
    assert!(records[0].value.sub(&v1).unwrap().max_abs() <= 1e-12);
}

#[test]
fn closed_form_policy_shape() {
    for k in 1..6 {
        for i in 2..20 {
            let expected = if i == k { RIGHT } else { LEFT };
            assert_eq!(tight_policy_closed_form(k, i), expected, "k={k} i={i}");
        }
    }
}

#[test]
fn undersized_chain_is_rejected() {
    let spec = TightInstanceSpec::new(2, 2, 0.1, 0.9, 5).unwrap();
    assert!(spec.with_num_states(spec.num_states - 1).is_err());
    assert!(spec.with_num_states(spec.num_states + 10).is_ok());
}
