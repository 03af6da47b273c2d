//! Finite MDPs, value functions, deterministic policies and the Bellman
//! operators acting on them.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};

/// Maximum deviation of a transition row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Relative slack under which two action-values count as tied in
/// [`greedy_policy`]. Exact ties in real arithmetic rarely survive rounding,
/// so near-ties are resolved by the lowest-index rule as well.
pub const GREEDY_TIE_TOLERANCE: f64 = 1e-12;

/// A finite discounted MDP with expected rewards `r(s, a)` and sparse
/// transition rows.
///
/// Rows and rewards are stored flat, indexed by `s * num_actions + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    rewards: Vec<f64>,
    transitions: Vec<Vec<(usize, f64)>>,
}

/// On-disk layout: `rewards[s][a]` and `transitions[s][a] = [[next, prob], ...]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    rewards: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<(usize, f64)>>>,
}

impl TryFrom<MdpDocument> for FiniteMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        FiniteMdp::new(
            doc.num_states,
            doc.num_actions,
            doc.discount,
            doc.rewards,
            doc.transitions,
        )
    }
}

impl From<FiniteMdp> for MdpDocument {
    fn from(mdp: FiniteMdp) -> Self {
        let na = mdp.num_actions;
        MdpDocument {
            num_states: mdp.num_states,
            num_actions: na,
            discount: mdp.discount,
            rewards: mdp.rewards.chunks(na).map(<[f64]>::to_vec).collect(),
            transitions: mdp.transitions.chunks(na).map(<[_]>::to_vec).collect(),
        }
    }
}

impl FiniteMdp {
    /// Builds and validates an MDP from nested `[state][action]` tables.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        rewards: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<(usize, f64)>>>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(invalid("an MDP needs at least one state and one action"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(invalid(format!("discount {discount} is not inside (0, 1)")));
        }
        check_len(num_states, rewards.len())?;
        check_len(num_states, transitions.len())?;

        let mut flat_rewards = Vec::with_capacity(num_states * num_actions);
        for (s, row) in rewards.into_iter().enumerate() {
            if row.len() != num_actions {
                return Err(invalid(format!(
                    "state {s} has {} rewards, expected {num_actions}",
                    row.len()
                )));
            }
            if let Some(r) = row.iter().find(|r| !r.is_finite()) {
                return Err(invalid(format!("state {s} has a non-finite reward {r}")));
            }
            flat_rewards.extend(row);
        }

        let mut flat_rows = Vec::with_capacity(num_states * num_actions);
        for (s, per_action) in transitions.into_iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(invalid(format!(
                    "state {s} has {} transition rows, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.into_iter().enumerate() {
                validate_row(num_states, s, a, &row)?;
                flat_rows.push(row);
            }
        }

        Ok(FiniteMdp {
            num_states,
            num_actions,
            discount,
            rewards: flat_rewards,
            transitions: flat_rows,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }

    /// Sparse successor distribution of `(state, action)`.
    pub fn row(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.transitions[state * self.num_actions + action]
    }

    /// Largest out-degree over all rows.
    pub fn max_branching(&self) -> usize {
        self.transitions.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// One-step action value `r(s,a) + γ Σ P(s'|s,a) v(s')`.
    #[inline]
    pub fn q_value(&self, state: usize, action: usize, v: &[f64]) -> f64 {
        let expected: f64 = self
            .row(state, action)
            .iter()
            .map(|&(next, p)| p * v[next])
            .sum();
        self.reward(state, action) + self.discount * expected
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub(crate) fn check_value(&self, v: &ValueFunction) -> Result<()> {
        check_len(self.num_states, v.len())
    }

    pub(crate) fn check_policy(&self, policy: &StationaryPolicy) -> Result<()> {
        check_len(self.num_states, policy.len())?;
        match policy.actions().iter().position(|&a| a >= self.num_actions) {
            Some(s) => Err(invalid(format!(
                "policy picks action {} in state {s}, but there are only {} actions",
                policy.actions()[s],
                self.num_actions
            ))),
            None => Ok(()),
        }
    }

    pub(crate) fn check_periodic(&self, policy: &PeriodicPolicy) -> Result<()> {
        policy.cycle().iter().try_for_each(|p| self.check_policy(p))
    }

    /// `out = r_π + γ P_π v`, without dimension checks.
    pub(crate) fn bellman_into(&self, policy: &StationaryPolicy, v: &[f64], out: &mut [f64]) {
        for (s, slot) in out.iter_mut().enumerate() {
            *slot = self.q_value(s, policy.actions()[s], v);
        }
    }

    /// Applies `T_{π_1} T_{π_2} ⋯ T_{π_ℓ}` to `v` in place.
    pub(crate) fn periodic_bellman_in_place(
        &self,
        policy: &PeriodicPolicy,
        v: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
    ) {
        scratch.resize(v.len(), 0.0);
        for member in policy.cycle().iter().rev() {
            self.bellman_into(member, v, scratch);
            std::mem::swap(v, scratch);
        }
    }
}

fn validate_row(num_states: usize, s: usize, a: usize, row: &[(usize, f64)]) -> Result<()> {
    if row.is_empty() {
        return Err(invalid(format!("transition row ({s}, {a}) is empty")));
    }
    let mut seen = vec![false; num_states];
    let mut total = 0.0;
    for &(next, p) in row {
        if next >= num_states {
            return Err(invalid(format!(
                "transition ({s}, {a}) targets state {next} outside 0..{num_states}"
            )));
        }
        if std::mem::replace(&mut seen[next], true) {
            return Err(invalid(format!(
                "transition row ({s}, {a}) lists state {next} twice"
            )));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(invalid(format!(
                "transition ({s}, {a}) -> {next} has invalid probability {p}"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(invalid(format!(
            "transition row ({s}, {a}) sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// A real value per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(invalid(format!("value at state {i} is not finite"))),
            None => Ok(ValueFunction(values)),
        }
    }

    pub fn zeros(num_states: usize) -> Self {
        ValueFunction(vec![0.0; num_states])
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ValueFunction(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &ValueFunction) -> Result<ValueFunction> {
        check_len(self.len(), other.len())?;
        Ok(ValueFunction(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Componentwise `self + other`.
    pub fn add(&self, other: &ValueFunction) -> Result<ValueFunction> {
        check_len(self.len(), other.len())?;
        Ok(ValueFunction(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, state: usize) -> &f64 {
        &self.0[state]
    }
}

/// Deterministic stationary policy, one action index per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryPolicy(Vec<usize>);

impl StationaryPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        StationaryPolicy(actions)
    }

    /// The policy taking `action` everywhere.
    pub fn constant(num_states: usize, action: usize) -> Self {
        StationaryPolicy(vec![action; num_states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Index<usize> for StationaryPolicy {
    type Output = usize;

    fn index(&self, state: usize) -> &usize {
        &self.0[state]
    }
}

/// A cycle of stationary policies, newest first: `cycle[0]` acts at the
/// first step, `cycle[1]` at the second, and so on, wrapping after `ℓ` steps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicPolicy {
    cycle: Vec<StationaryPolicy>,
}

impl PeriodicPolicy {
    pub fn new(cycle: Vec<StationaryPolicy>) -> Result<Self> {
        let first = cycle
            .first()
            .ok_or_else(|| invalid("a periodic policy needs at least one member"))?;
        let n = first.len();
        for p in &cycle[1..] {
            check_len(n, p.len())?;
        }
        Ok(PeriodicPolicy { cycle })
    }

    pub fn stationary(policy: StationaryPolicy) -> Self {
        PeriodicPolicy {
            cycle: vec![policy],
        }
    }

    pub fn period(&self) -> usize {
        self.cycle.len()
    }

    pub fn cycle(&self) -> &[StationaryPolicy] {
        &self.cycle
    }

    /// The member acting at step `t` (0-based) of a trajectory.
    pub fn member_at(&self, t: usize) -> &StationaryPolicy {
        &self.cycle[t % self.cycle.len()]
    }
}

/// `T_π v = r_π + γ P_π v`.
pub fn apply_bellman_op(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    v: &ValueFunction,
) -> Result<ValueFunction> {
    mdp.check_policy(policy)?;
    mdp.check_value(v)?;
    let mut out = vec![0.0; mdp.num_states()];
    mdp.bellman_into(policy, v.as_slice(), &mut out);
    Ok(ValueFunction(out))
}

/// `T_{π_1} ⋯ T_{π_ℓ} v` for a periodic policy.
pub fn apply_periodic_bellman_op(
    mdp: &FiniteMdp,
    policy: &PeriodicPolicy,
    v: &ValueFunction,
) -> Result<ValueFunction> {
    mdp.check_periodic(policy)?;
    mdp.check_value(v)?;
    let mut out = v.0.clone();
    mdp.periodic_bellman_in_place(policy, &mut out, &mut Vec::new());
    Ok(ValueFunction(out))
}

/// Optimality operator `T v = max_π T_π v`.
pub fn apply_optimality_op(mdp: &FiniteMdp, v: &ValueFunction) -> Result<ValueFunction> {
    mdp.check_value(v)?;
    let out = (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions())
                .map(|a| mdp.q_value(s, a, v.as_slice()))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(ValueFunction(out))
}

/// A policy greedy with respect to `v`. Among actions whose value is within
/// [`GREEDY_TIE_TOLERANCE`] (relative) of the best, the lowest index wins.
pub fn greedy_policy(mdp: &FiniteMdp, v: &ValueFunction) -> Result<StationaryPolicy> {
    mdp.check_value(v)?;
    let mut q = vec![0.0; mdp.num_actions()];
    let actions = (0..mdp.num_states())
        .map(|s| {
            for (a, slot) in q.iter_mut().enumerate() {
                *slot = mdp.q_value(s, a, v.as_slice());
            }
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let floor = best - GREEDY_TIE_TOLERANCE * best.abs().max(1.0);
            q.iter().position(|&x| x >= floor).unwrap_or(0)
        })
        .collect();
    Ok(StationaryPolicy(actions))
}

/// `‖a − b‖∞`.
pub fn max_norm_distance(a: &ValueFunction, b: &ValueFunction) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.0
        .iter()
        .zip(&b.0)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs())))
}
