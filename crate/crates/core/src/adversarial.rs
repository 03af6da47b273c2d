//! The chain MDP on which the non-stationary bound is attained with
//! equality, its adversarial error schedule, and closed forms for the whole
//! value/policy trajectory.
//!
//! States are numbered `1..=N` in the closed forms and stored at index
//! `i − 1`. Action [`RIGHT`] (index 0) jumps from `i` to `i + ℓ − 1` at reward
//! `r_i = −2ε(γ − γ^i)/(1 − γ)`; action [`LEFT`] (index 1) moves to `i − 1` for
//! free. State 1 is absorbing with zero reward. Taking `→` at index 0 makes
//! the lowest-index tie-break pick `→` at the tied state `k + 1`.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::bounds::{loss_ratio, theorem2_bound, BoundInputs};
use crate::csvfmt::{float_field, write_rows};
use crate::dp::{nsmpi_run, ErrorModel, IterationRecord, MParameter, NsmpiConfig};
use crate::error::{invalid, Error, Result};
use crate::mdp::{max_norm_distance, FiniteMdp, StationaryPolicy, ValueFunction};

pub const RIGHT: usize = 0;
pub const LEFT: usize = 1;

/// Value deviation allowed between simulation and closed form.
pub const TRAJECTORY_TOLERANCE: f64 = 1e-9;

/// Allowed `|loss − bound|` for the bound to count as attained.
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TightInstanceSpec {
    pub ell: usize,
    pub m: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub max_iterations: usize,
    pub num_states: usize,
}

impl TightInstanceSpec {
    /// A spec with the smallest admissible number of states.
    pub fn new(ell: usize, m: usize, epsilon: f64, gamma: f64, max_iterations: usize) -> Result<Self> {
        let spec = TightInstanceSpec {
            ell,
            m,
            epsilon,
            gamma,
            max_iterations,
            num_states: Self::min_states(ell, m, max_iterations),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `K + (K·m + 1)·ℓ + 2`: every state whose closed-form value can be
    /// nonzero up to iteration `K`, plus room for one more jump.
    pub fn min_states(ell: usize, m: usize, max_iterations: usize) -> usize {
        max_iterations + (max_iterations * m + 1) * ell + 2
    }

    pub fn with_num_states(mut self, num_states: usize) -> Result<Self> {
        self.num_states = num_states;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(invalid("ℓ must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("at least one iteration is required"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("ε = {} must be finite and non-negative", self.epsilon)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("γ = {} is not inside (0, 1)", self.gamma)));
        }
        let needed = Self::min_states(self.ell, self.m, self.max_iterations);
        if self.num_states < needed {
            return Err(invalid(format!(
                "{} states cannot hold {} iterations with ℓ = {}, m = {}; need at least {needed}",
                self.num_states, self.max_iterations, self.ell, self.m
            )));
        }
        Ok(())
    }

    /// `r_i = −2ε(γ − γ^i)/(1 − γ)`; zero at state 1.
    pub fn reward(&self, state: usize) -> f64 {
        tight_reward(state, self.epsilon, self.gamma)
    }

    /// The loss attained at iteration `k`: `2ε(γ − γ^k)/((1 − γ)(1 − γ^ℓ))`.
    pub fn attained_loss(&self, k: usize) -> f64 {
        theorem2_bound(&BoundInputs {
            gamma: self.gamma,
            ell: self.ell,
            k,
            epsilon: self.epsilon,
            initial_gap: 0.0,
        })
    }
}

/// `−2ε(γ − γ^i)/(1 − γ)` for state `i ≥ 1`.
pub fn tight_reward(state: usize, epsilon: f64, gamma: f64) -> f64 {
    -2.0 * epsilon * (gamma - powu(gamma, state)) / (1.0 - gamma)
}

fn powu(x: f64, n: usize) -> f64 {
    x.powi(i32::try_from(n).expect("exponent fits in i32"))
}

pub fn build_tight_mdp(spec: &TightInstanceSpec) -> Result<FiniteMdp> {
    spec.validate()?;
    let n = spec.num_states;
    let mut rewards = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n);
    rewards.push(vec![0.0, 0.0]);
    transitions.push(vec![vec![(0, 1.0)], vec![(0, 1.0)]]);
    for state in 2..=n {
        let target = state + spec.ell - 1;
        let target = if target > n { state } else { target };
        rewards.push(vec![spec.reward(state), 0.0]);
        transitions.push(vec![vec![(target - 1, 1.0)], vec![(state - 2, 1.0)]]);
    }
    FiniteMdp::new(n, 2, spec.gamma, rewards, transitions)
}

/// `ε_k`: `−ε` at state `k`, `+ε` at state `k + ℓ`, zero elsewhere.
pub fn tight_error_schedule(k: usize, spec: &TightInstanceSpec) -> Result<ValueFunction> {
    if k == 0 || k > spec.max_iterations {
        return Err(invalid(format!(
            "iteration {k} is outside the schedule 1..={}",
            spec.max_iterations
        )));
    }
    let mut e = vec![0.0; spec.num_states];
    e[k - 1] = -spec.epsilon;
    e[k + spec.ell - 1] = spec.epsilon;
    ValueFunction::new(e)
}

/// [`tight_error_schedule`] as an error model.
#[derive(Clone, Copy, Debug)]
pub struct TightSchedule(pub TightInstanceSpec);

impl ErrorModel for TightSchedule {
    fn error(&self, k: usize, num_states: usize) -> Result<ValueFunction> {
        if num_states != self.0.num_states {
            return Err(Error::DimensionMismatch {
                expected: self.0.num_states,
                got: num_states,
            });
        }
        tight_error_schedule(k, &self.0)
    }

    fn sup_bound(&self) -> f64 {
        self.0.epsilon
    }
}

/// `Σ_{j=a}^{m} γ^{ℓj} = (γ^{ℓa} − γ^{ℓ(m+1)})/(1 − γ^ℓ)`.
fn periodic_tail(gamma: f64, ell: usize, m: usize, from: usize) -> f64 {
    let gl = powu(gamma, ell);
    (powu(gl, from) - powu(gl, m + 1)) / (1.0 - gl)
}

/// Closed-form `v_k(i)` for iteration `k ≥ 1` and state `1 ≤ i ≤ N`.
pub fn tight_value_closed_form(k: usize, state: usize, spec: &TightInstanceSpec) -> Result<f64> {
    if k == 0 || state == 0 || state > spec.num_states {
        return Err(invalid(format!(
            "closed form needs k ≥ 1 and 1 ≤ i ≤ {} (got k = {k}, i = {state})",
            spec.num_states
        )));
    }
    let (ell, m, eps, gamma) = (spec.ell, spec.m, spec.epsilon, spec.gamma);
    let cycle = powu(gamma, ell * m + 1);
    let floor_value = -powu(cycle, k - 1) * eps;
    let frontier = k + ((k - 1) * m + 1) * ell;

    if state < k {
        return Ok(floor_value);
    }
    if state > frontier {
        return Ok(0.0);
    }
    if state == k {
        return Ok(tight_value_closed_form(k, k + ell, spec)? + spec.reward(k) - 2.0 * eps);
    }

    let offset = state - k;
    let (blocks, phase) = (offset / ell, offset % ell);
    if phase != 0 {
        // intra-period states
        return if blocks < (k - 1) * m {
            Ok(floor_value)
        } else if blocks == (k - 1) * m {
            Ok(0.0)
        } else {
            Err(Error::Internal(format!(
                "state {state} at iteration {k} falls in no branch"
            )))
        };
    }

    // state = k + (q·m + p + 1)·ℓ; with m = 0 the only such state is k + ℓ,
    // which carries the whole error history (q = 0)
    let (q, p) = match (blocks - 1).checked_div(m) {
        Some(q) => (q, (blocks - 1) % m),
        None => (0, 0),
    };
    if q >= k {
        return Err(Error::Internal(format!(
            "block index {q} out of range at iteration {k}"
        )));
    }
    let full_tail = periodic_tail(gamma, ell, m, 1);
    let mut inner = periodic_tail(gamma, ell, m, p + 1) * spec.reward(k - q);
    if p == 0 {
        inner += eps;
    }
    for j in 1..(k - q) {
        inner += powu(cycle, j) * (full_tail * spec.reward(k - q - j) + eps);
    }
    Ok(powu(cycle, q) * inner)
}

/// Closed-form `π_k(i)`: `→` exactly at `i = k`.
pub fn tight_policy_closed_form(k: usize, state: usize) -> usize {
    if state == k {
        RIGHT
    } else {
        LEFT
    }
}

/// Runs the algorithm on the tight instance from `v_0 = 0` with all initial
/// policies equal to the all-`←` policy and the adversarial error schedule.
/// `v* = 0`, so records carry the loss.
pub fn simulate_tight(spec: &TightInstanceSpec, m: MParameter) -> Result<(FiniteMdp, Vec<IterationRecord>)> {
    let mdp = build_tight_mdp(spec)?;
    let n = spec.num_states;
    let config = NsmpiConfig::new(m, spec.ell, spec.max_iterations)
        .with_v0(ValueFunction::zeros(n))
        .with_initial_policies(vec![StationaryPolicy::constant(n, LEFT); spec.ell - 1])
        .with_error_model(Arc::new(TightSchedule(*spec)));
    let records = nsmpi_run(&mdp, &config, Some(&ValueFunction::zeros(n)))?;
    Ok((mdp, records))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerificationRow {
    pub k: usize,
    pub max_value_dev: f64,
    pub policy_match: bool,
    pub loss: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub spec: TightInstanceSpec,
    pub rows: Vec<VerificationRow>,
    /// Values within [`TRAJECTORY_TOLERANCE`] and policies identical at every `k`.
    pub success: bool,
    /// `|loss − bound| ≤` [`EQUALITY_TOLERANCE`] at every `k`.
    pub bound_attained: bool,
}

impl VerificationReport {
    /// Writes `k, max_value_dev, policy_match, loss, bound, ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &["k", "max_value_dev", "policy_match", "loss", "bound", "ratio"],
            self.rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    float_field(r.max_value_dev),
                    u8::from(r.policy_match).to_string(),
                    float_field(r.loss),
                    float_field(r.bound),
                    float_field(r.ratio),
                ]
            }),
        )
    }
}

/// Closed-form value function `v_k` over all states.
pub fn closed_form_values(k: usize, spec: &TightInstanceSpec) -> Result<ValueFunction> {
    let values = (1..=spec.num_states)
        .map(|i| tight_value_closed_form(k, i, spec))
        .collect::<Result<Vec<_>>>()?;
    ValueFunction::new(values)
}

pub fn verify_tight_trajectory(spec: &TightInstanceSpec) -> Result<VerificationReport> {
    let (_, records) = simulate_tight(spec, MParameter::Finite(spec.m))?;
    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let k = record.k;
        let expected = closed_form_values(k, spec)?;
        let max_value_dev = max_norm_distance(&record.value, &expected)?;
        let policy_match =
            (2..=spec.num_states).all(|i| record.policy[i - 1] == tight_policy_closed_form(k, i));
        let loss = record.loss_sup.expect("v* is supplied");
        let bound = spec.attained_loss(k);
        rows.push(VerificationRow {
            k,
            max_value_dev,
            policy_match,
            loss,
            bound,
            ratio: loss_ratio(loss, bound),
        });
    }
    let success = rows
        .iter()
        .all(|r| r.max_value_dev <= TRAJECTORY_TOLERANCE && r.policy_match);
    let bound_attained = rows
        .iter()
        .all(|r| (r.loss - r.bound).abs() <= EQUALITY_TOLERANCE);
    Ok(VerificationReport {
        spec: *spec,
        rows,
        success,
        bound_attained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewards() {
        assert_eq!(tight_reward(1, 0.1, 0.9), 0.0);
        assert!((tight_reward(3, 0.1, 0.9) + 0.342).abs() < 1e-12);
        for i in 1..30 {
            let (a, b) = (tight_reward(i, 0.3, 0.8), tight_reward(i + 1, 0.3, 0.8));
            assert!((b - (0.8 * a - 2.0 * 0.8 * 0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_structure() {
        let spec = TightInstanceSpec::new(3, 1, 0.1, 0.9, 2).unwrap();
        let mdp = build_tight_mdp(&spec).unwrap();
        // state 5 is index 4; → lands in state 7 (index 6)
        assert_eq!(mdp.row(4, RIGHT), &[(6, 1.0)]);
        assert_eq!(mdp.row(4, LEFT), &[(3, 1.0)]);
        assert_eq!(mdp.row(0, RIGHT), &[(0, 1.0)]);
        assert_eq!(mdp.reward(0, RIGHT), 0.0);
        let last = spec.num_states - 1;
        assert_eq!(mdp.row(last, RIGHT), &[(last, 1.0)]);
    }

    #[test]
    fn too_few_states_rejected() {
        let spec = TightInstanceSpec::new(2, 3, 0.1, 0.9, 6).unwrap();
        assert!(spec.with_num_states(spec.num_states - 1).is_err());
        assert!(TightInstanceSpec::new(0, 3, 0.1, 0.9, 6).is_err());
    }

    #[test]
    fn schedule_examples() {
        let spec = TightInstanceSpec::new(2, 0, 0.1, 0.9, 3)
            .unwrap()
            .with_num_states(10)
            .unwrap();
        let e = tight_error_schedule(1, &spec).unwrap();
        let mut expected = vec![0.0; 10];
        expected[0] = -0.1;
        expected[2] = 0.1;
        assert_eq!(e.as_slice(), expected.as_slice());
        assert!(tight_error_schedule(0, &spec).is_err());
        assert!(tight_error_schedule(4, &spec).is_err());

        let spec = TightInstanceSpec::new(1, 0, 0.5, 0.9, 6).unwrap();
        let e = tight_error_schedule(4, &spec).unwrap();
        let nonzero: Vec<usize> = (0..spec.num_states).filter(|&i| e[i] != 0.0).map(|i| i + 1).collect();
        assert_eq!(nonzero, vec![4, 5]);
        assert_eq!(e.max_abs(), 0.5);
    }

    #[test]
    fn closed_form_base_case() {
        for ell in 1..4 {
            let spec = TightInstanceSpec::new(ell, 2, 0.1, 0.9, 4).unwrap();
            assert!((tight_value_closed_form(1, 1, &spec).unwrap() + 0.1).abs() < 1e-15);
            assert!((tight_value_closed_form(1, 1 + ell, &spec).unwrap() - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_vanishes_past_frontier() {
        let spec = TightInstanceSpec::new(2, 3, 0.1, 0.9, 6).unwrap();
        for k in 1..=6 {
            let frontier = k + ((k - 1) * 3 + 1) * 2;
            for i in frontier + 1..=spec.num_states {
                assert_eq!(tight_value_closed_form(k, i, &spec).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn policy_closed_form() {
        assert_eq!(tight_policy_closed_form(5, 5), RIGHT);
        assert_eq!(tight_policy_closed_form(5, 4), LEFT);
    }
}
