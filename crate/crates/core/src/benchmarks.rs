//! Benchmark problems: the repairman / trailer dynamic location MDP, seeded
//! Garnet random MDPs, and the uniform random error model.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::ErrorModel;
use crate::error::{invalid, Result};
use crate::mdp::{FiniteMdp, ValueFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicLocationSpec {
    /// Number of sites.
    pub n: usize,
    pub gamma: f64,
}

impl DynamicLocationSpec {
    /// State index of repairman site `repairman` and trailer site `trailer`
    /// (both 1-based).
    pub fn state_index(&self, repairman: usize, trailer: usize) -> usize {
        (repairman - 1) * self.n + (trailer - 1)
    }

    /// Inverse of [`state_index`](Self::state_index).
    pub fn sites(&self, state: usize) -> (usize, usize) {
        (state / self.n + 1, state % self.n + 1)
    }
}

/// `r((s_r, s_t), a) = −|s_r − s_t| − |s_t − a|/2`.
pub fn dynamic_location_reward(repairman: usize, trailer: usize, action_site: usize) -> f64 {
    -(repairman.abs_diff(trailer) as f64) - trailer.abs_diff(action_site) as f64 / 2.0
}

/// A repairman wanders between `n` sites while a supply trailer is moved to
/// the site named by the action. The repairman moves uniformly to any site
/// `s_r ≤ s' ≤ n` when `s_r < n`, and from `n` returns to site 1 with
/// probability 0.75 (else stays).
pub fn dynamic_location_mdp(spec: &DynamicLocationSpec) -> Result<FiniteMdp> {
    let n = spec.n;
    if n < 2 {
        return Err(invalid(format!("dynamic location needs n ≥ 2 sites, got {n}")));
    }
    let mut rewards = Vec::with_capacity(n * n);
    let mut transitions = Vec::with_capacity(n * n);
    for repairman in 1..=n {
        for trailer in 1..=n {
            let mut state_rewards = Vec::with_capacity(n);
            let mut state_rows = Vec::with_capacity(n);
            for site in 1..=n {
                state_rewards.push(dynamic_location_reward(repairman, trailer, site));
                let row = if repairman < n {
                    let p = 1.0 / (n - repairman + 1) as f64;
                    (repairman..=n)
                        .map(|next| (spec.state_index(next, site), p))
                        .collect()
                } else {
                    vec![(spec.state_index(1, site), 0.75), (spec.state_index(n, site), 0.25)]
                };
                state_rows.push(row);
            }
            rewards.push(state_rewards);
            transitions.push(state_rows);
        }
    }
    FiniteMdp::new(n * n, n, spec.gamma, rewards, transitions)
}

/// Seeded random MDP with a fixed number of successors per state-action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GarnetSpec {
    pub num_states: usize,
    pub num_actions: usize,
    /// Successors per `(s, a)`.
    pub branching: usize,
    /// Probability that a reward is exactly zero.
    pub reward_sparsity: f64,
    pub discount: f64,
    pub seed: u64,
}

pub fn garnet_mdp(spec: &GarnetSpec) -> Result<FiniteMdp> {
    let (n, na, b) = (spec.num_states, spec.num_actions, spec.branching);
    if n == 0 || na == 0 {
        return Err(invalid("Garnet needs at least one state and one action"));
    }
    if b == 0 || b > n {
        return Err(invalid(format!("branching {b} must lie in 1..={n}")));
    }
    if !(0.0..=1.0).contains(&spec.reward_sparsity) {
        return Err(invalid("reward sparsity must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rewards = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n);
    let mut cuts = Vec::with_capacity(b + 1);
    for _ in 0..n {
        let mut state_rewards = Vec::with_capacity(na);
        let mut state_rows = Vec::with_capacity(na);
        for _ in 0..na {
            let mut successors = sample(&mut rng, n, b).into_vec();
            successors.sort_unstable();

            cuts.clear();
            cuts.push(0.0);
            cuts.extend((1..b).map(|_| rng.gen::<f64>()));
            cuts.sort_by(f64::total_cmp);
            cuts.push(1.0);
            let row = successors
                .into_iter()
                .zip(cuts.windows(2).map(|w| w[1] - w[0]))
                .collect();
            state_rows.push(row);

            let reward = if rng.gen::<f64>() < spec.reward_sparsity {
                0.0
            } else {
                rng.gen_range(-1.0..=1.0)
            };
            state_rewards.push(reward);
        }
        rewards.push(state_rewards);
        transitions.push(state_rows);
    }
    FiniteMdp::new(n, na, spec.discount, rewards, transitions)
}

/// Errors with i.i.d. components uniform on `[0, ε]`. The draw for iteration
/// `k` comes from its own ChaCha stream, so it does not depend on call order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformErrorModel {
    pub epsilon: f64,
    pub seed: u64,
}

impl UniformErrorModel {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("ε = {epsilon} must be finite and non-negative")));
        }
        Ok(UniformErrorModel { epsilon, seed })
    }
}

pub fn draw_error(model: &UniformErrorModel, k: usize, num_states: usize) -> ValueFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(k as u64);
    ValueFunction::from_raw(
        (0..num_states)
            .map(|_| model.epsilon * rng.gen::<f64>())
            .collect(),
    )
}

impl ErrorModel for UniformErrorModel {
    fn error(&self, k: usize, num_states: usize) -> Result<ValueFunction> {
        Ok(draw_error(self, k, num_states))
    }

    fn sup_bound(&self) -> f64 {
        self.epsilon
    }
}
