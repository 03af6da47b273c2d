#![allow(dead_code)]

use nsmpi::benchmarks::{garnet_mdp, GarnetSpec};
use nsmpi::{FiniteMdp, PeriodicPolicy, StationaryPolicy, ValueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small Garnet whose shape is derived from `seed`.
pub fn random_mdp(seed: u64, max_states: usize, max_actions: usize) -> FiniteMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let num_states = rng.gen_range(2..=max_states);
    let num_actions = rng.gen_range(1..=max_actions);
    garnet_mdp(&GarnetSpec {
        num_states,
        num_actions,
        branching: rng.gen_range(1..=num_states.min(4)),
        reward_sparsity: 0.2,
        discount: rng.gen_range(0.5..0.95),
        seed,
    })
    .unwrap()
}

pub fn random_policy(mdp: &FiniteMdp, rng: &mut ChaCha8Rng) -> StationaryPolicy {
    StationaryPolicy::new((0..mdp.num_states()).map(|_| rng.gen_range(0..mdp.num_actions())).collect())
}

pub fn random_periodic(mdp: &FiniteMdp, ell: usize, rng: &mut ChaCha8Rng) -> PeriodicPolicy {
    PeriodicPolicy::new((0..ell).map(|_| random_policy(mdp, rng)).collect()).unwrap()
}

pub fn random_value(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ValueFunction {
    ValueFunction::new((0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Dense transition matrix of a stationary policy.
pub fn dense_kernel(mdp: &FiniteMdp, policy: &StationaryPolicy) -> Vec<Vec<f64>> {
    let n = mdp.num_states();
    let mut p = vec![vec![0.0; n]; n];
    for (s, row) in p.iter_mut().enumerate() {
        for &(t, prob) in mdp.row(s, policy[s]) {
            row[t] += prob;
        }
    }
    p
}

/// `r_π + γ P_π v` computed from the dense matrix.
pub fn dense_bellman(mdp: &FiniteMdp, policy: &StationaryPolicy, v: &[f64]) -> Vec<f64> {
    let p = dense_kernel(mdp, policy);
    (0..mdp.num_states())
        .map(|s| {
            let future: f64 = p[s].iter().zip(v).map(|(a, b)| a * b).sum();
            mdp.reward(s, policy[s]) + mdp.discount() * future
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
