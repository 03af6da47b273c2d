//! Exact and iterative evaluation of stationary and periodic policies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, PeriodicPolicy, StationaryPolicy, ValueFunction};

/// Above this many states, evaluation switches from a dense solve to
/// fixed-point iteration.
pub const DIRECT_SOLVE_THRESHOLD: usize = 2000;

pub const DEFAULT_EVAL_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_EVAL_MAX_ITERS: usize = 1_000_000;

/// How a policy value is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMethod {
    /// Direct solve up to [`DIRECT_SOLVE_THRESHOLD`] states, iteration above.
    Auto,
    /// Dense LU solve of the composed ℓ-step system.
    Direct,
    /// Repeated application of the composed ℓ-step operator.
    Iterative,
}

/// Value of a stationary policy: the fixed point of `T_π`.
pub fn evaluate_stationary(
    mdp: &FiniteMdp,
    policy: &StationaryPolicy,
    tolerance: f64,
    max_iters: usize,
) -> Result<ValueFunction> {
    evaluate_periodic(
        mdp,
        &PeriodicPolicy::stationary(policy.clone()),
        tolerance,
        max_iters,
    )
}

/// Phase-0 value of a periodic policy: the fixed point of
/// `T_{π_1} T_{π_2} ⋯ T_{π_ℓ}`.
pub fn evaluate_periodic(
    mdp: &FiniteMdp,
    policy: &PeriodicPolicy,
    tolerance: f64,
    max_iters: usize,
) -> Result<ValueFunction> {
    evaluate_periodic_with(mdp, policy, tolerance, max_iters, EvalMethod::Auto)
}

/// [`evaluate_periodic`] with an explicit choice of method.
///
/// Convergence is declared once `‖T_{π,ℓ} v − v‖∞ ≤ tolerance · max(1, ‖v‖∞)`.
pub fn evaluate_periodic_with(
    mdp: &FiniteMdp,
    policy: &PeriodicPolicy,
    tolerance: f64,
    max_iters: usize,
    method: EvalMethod,
) -> Result<ValueFunction> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "evaluation tolerance must be positive, got {tolerance}"
        )));
    }
    mdp.check_periodic(policy)?;
    let direct = match method {
        EvalMethod::Auto => mdp.num_states() <= DIRECT_SOLVE_THRESHOLD,
        EvalMethod::Direct => true,
        EvalMethod::Iterative => false,
    };
    if direct {
        solve_direct(mdp, policy, tolerance)
    } else {
        solve_iterative(mdp, policy, tolerance, max_iters)
    }
}

/// Composite reward `R = r_1 + γP_1 r_2 + … + γ^{ℓ−1}P_1⋯P_{ℓ−1} r_ℓ` and
/// kernel `γ^ℓ P_1⋯P_ℓ` of a periodic policy, built back to front.
pub fn composite_system(mdp: &FiniteMdp, policy: &PeriodicPolicy) -> (DVector<f64>, DMatrix<f64>) {
    let n = mdp.num_states();
    let gamma = mdp.discount();
    let mut reward = DVector::zeros(n);
    let mut kernel = DMatrix::identity(n, n);
    for member in policy.cycle().iter().rev() {
        let mut next_reward = DVector::zeros(n);
        let mut next_kernel = DMatrix::zeros(n, n);
        for s in 0..n {
            let a = member[s];
            let mut acc = 0.0;
            for &(t, p) in mdp.row(s, a) {
                acc += p * reward[t];
                let w = gamma * p;
                for c in 0..n {
                    next_kernel[(s, c)] += w * kernel[(t, c)];
                }
            }
            next_reward[s] = mdp.reward(s, a) + gamma * acc;
        }
        reward = next_reward;
        kernel = next_kernel;
    }
    (reward, kernel)
}

fn composed_residual(mdp: &FiniteMdp, policy: &PeriodicPolicy, v: &[f64]) -> f64 {
    let mut image = v.to_vec();
    mdp.periodic_bellman_in_place(policy, &mut image, &mut Vec::new());
    image
        .iter()
        .zip(v)
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

fn scale(v: &[f64]) -> f64 {
    v.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()))
}

fn solve_direct(mdp: &FiniteMdp, policy: &PeriodicPolicy, tolerance: f64) -> Result<ValueFunction> {
    let n = mdp.num_states();
    let (reward, kernel) = composite_system(mdp, policy);
    let system = DMatrix::identity(n, n) - kernel;
    let lu = system.lu();
    let mut v = lu
        .solve(&reward)
        .ok_or_else(|| Error::Internal("singular policy-evaluation system".into()))?;

    // A couple of refinement sweeps recover the last bits lost in the
    // factorisation when the composed kernel is close to 1 in norm.
    let mut residual = composed_residual(mdp, policy, v.as_slice());
    for _ in 0..3 {
        if residual <= tolerance * scale(v.as_slice()) {
            break;
        }
        let mut image = v.as_slice().to_vec();
        mdp.periodic_bellman_in_place(policy, &mut image, &mut Vec::new());
        let correction = DVector::from_iterator(
            n,
            image.iter().zip(v.iter()).map(|(a, b)| a - b),
        );
        if let Some(delta) = lu.solve(&correction) {
            v += delta;
        }
        residual = composed_residual(mdp, policy, v.as_slice());
    }
    if residual > tolerance * scale(v.as_slice()) {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            residual,
        });
    }
    ValueFunction::new(v.as_slice().to_vec())
}

fn solve_iterative(
    mdp: &FiniteMdp,
    policy: &PeriodicPolicy,
    tolerance: f64,
    max_iters: usize,
) -> Result<ValueFunction> {
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        next.copy_from_slice(&v);
        mdp.periodic_bellman_in_place(policy, &mut next, &mut scratch);
        residual = next
            .iter()
            .zip(&v)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()));
        std::mem::swap(&mut v, &mut next);
        if residual <= tolerance * scale(&v) {
            return ValueFunction::new(v);
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iters,
        residual,
    })
}
