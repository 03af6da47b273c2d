mod common;

use common::*;
use nsmpi::dp::solve_optimal;
use nsmpi::eval::evaluate_stationary;
use nsmpi::mdp::{apply_bellman_op, apply_optimality_op, apply_periodic_bellman_op, greedy_policy, max_norm_distance};
use nsmpi::{StationaryPolicy, ValueFunction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_policies(num_states: usize, num_actions: usize) -> Vec<StationaryPolicy> {
    let total = num_actions.pow(num_states as u32);
    (0..total)
        .map(|mut code| {
            StationaryPolicy::new(
                (0..num_states)
                    .map(|_| {
                        let a = code % num_actions;
                        code /= num_actions;
                        a
                    })
                    .collect(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_matches_dense_product(seed in any::<u64>()) {
        let mdp = random_mdp(seed, 12, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&mdp, &mut rng);
        let v = random_value(mdp.num_states(), 10.0, &mut rng);
        let got = apply_bellman_op(&mdp, &policy, &v).unwrap();
        prop_assert!(max_diff(got.as_slice(), &dense_bellman(&mdp, &policy, v.as_slice())) <= 1e-12);
    }

    #[test]
    fn periodic_operator_is_composition(seed in any::<u64>(), ell in 1usize..5) {
        let mdp = random_mdp(seed, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_periodic(&mdp, ell, &mut rng);
        let v = random_value(mdp.num_states(), 5.0, &mut rng);
        let mut expected = v.as_slice().to_vec();
        for member in policy.cycle().iter().rev() {
            expected = dense_bellman(&mdp, member, &expected);
        }
        let got = apply_periodic_bellman_op(&mdp, &policy, &v).unwrap();
        prop_assert!(max_diff(got.as_slice(), &expected) <= 1e-11);
    }

    #[test]
    fn operators_are_monotone(seed in any::<u64>(), shift in 0.0f64..3.0) {
        let mdp = random_mdp(seed, 10, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_value(mdp.num_states(), 5.0, &mut rng);
        let bump = random_value(mdp.num_states(), 1.0, &mut rng);
        let v = ValueFunction::new(
            u.as_slice().iter().zip(bump.as_slice()).map(|(a, b)| a + b.abs() + shift).collect(),
        ).unwrap();
        let policy = random_policy(&mdp, &mut rng);
        let (tu, tv) = (apply_bellman_op(&mdp, &policy, &u).unwrap(), apply_bellman_op(&mdp, &policy, &v).unwrap());
        prop_assert!(tu.as_slice().iter().zip(tv.as_slice()).all(|(a, b)| a <= &(b + 1e-12)));
        let (tu, tv) = (apply_optimality_op(&mdp, &u).unwrap(), apply_optimality_op(&mdp, &v).unwrap());
        prop_assert!(tu.as_slice().iter().zip(tv.as_slice()).all(|(a, b)| a <= &(b + 1e-12)));
    }

    #[test]
    fn operators_contract(seed in any::<u64>()) {
        let mdp = random_mdp(seed, 10, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_value(mdp.num_states(), 5.0, &mut rng);
        let v = random_value(mdp.num_states(), 5.0, &mut rng);
        let gap = max_norm_distance(&u, &v).unwrap();
        let g = mdp.discount();
        let policy = random_policy(&mdp, &mut rng);
        let d = max_norm_distance(&apply_bellman_op(&mdp, &policy, &u).unwrap(), &apply_bellman_op(&mdp, &policy, &v).unwrap()).unwrap();
        prop_assert!(d <= g * gap + 1e-12);
        let d = max_norm_distance(&apply_optimality_op(&mdp, &u).unwrap(), &apply_optimality_op(&mdp, &v).unwrap()).unwrap();
        prop_assert!(d <= g * gap + 1e-12);
        let periodic = random_periodic(&mdp, 3, &mut rng);
        let d = max_norm_distance(&apply_periodic_bellman_op(&mdp, &periodic, &u).unwrap(), &apply_periodic_bellman_op(&mdp, &periodic, &v).unwrap()).unwrap();
        prop_assert!(d <= g.powi(3) * gap + 1e-12);
    }

    #[test]
    fn greedy_beats_every_policy(seed in any::<u64>()) {
        let mdp = random_mdp(seed, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_value(mdp.num_states(), 5.0, &mut rng);
        let greedy = greedy_policy(&mdp, &v).unwrap();
        let tg = dense_bellman(&mdp, &greedy, v.as_slice());
        let optimal = apply_optimality_op(&mdp, &v).unwrap();
        prop_assert!(max_diff(&tg, optimal.as_slice()) <= 1e-12);
        for policy in all_policies(mdp.num_states(), mdp.num_actions()) {
            let tp = dense_bellman(&mdp, &policy, v.as_slice());
            prop_assert!(tg.iter().zip(&tp).all(|(a, b)| *a >= b - 1e-12));
        }
    }
}

#[test]
fn greedy_prefers_lowest_index_on_ties() {
    let mdp = nsmpi::FiniteMdp::new(
        1,
        3,
        0.5,
        vec![vec![1.0, 2.0, 2.0]],
        vec![vec![vec![(0, 1.0)]; 3]],
    )
    .unwrap();
    let policy = greedy_policy(&mdp, &ValueFunction::zeros(1)).unwrap();
    assert_eq!(policy.actions(), &[1]);
}

#[test]
fn optimal_value_dominates_all_policies() {
    for seed in 0..20 {
        let mdp = random_mdp(seed, 4, 3);
        let (policy, v_star) = solve_optimal(&mdp).unwrap();
        let fixed = apply_optimality_op(&mdp, &v_star).unwrap();
        assert!(max_norm_distance(&fixed, &v_star).unwrap() <= 1e-9);
        assert_eq!(greedy_policy(&mdp, &v_star).unwrap(), policy);
        for other in all_policies(mdp.num_states(), mdp.num_actions()) {
            let v = evaluate_stationary(&mdp, &other, 1e-12, 1_000_000).unwrap();
            assert!(v.as_slice().iter().zip(v_star.as_slice()).all(|(a, b)| *a <= b + 1e-9));
        }
    }
}
