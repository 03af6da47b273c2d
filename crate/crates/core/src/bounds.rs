//! Performance bounds for (non-stationary) MPI and the residual / shift /
//! distance / loss decomposition used to analyse individual runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csvfmt::{float_field, write_rows};
use crate::dp::IterationRecord;
use crate::error::{invalid, Error, Result};
use crate::eval::evaluate_periodic;
use crate::mdp::{FiniteMdp, PeriodicPolicy, StationaryPolicy, ValueFunction};

/// Slack tolerated before a bound counts as violated.
pub const BOUND_SLACK_TOLERANCE: f64 = 1e-9;

/// Tolerance for the componentwise identity `loss = shift + distance`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Upper bound on the horizon error constant: `2 / (1 − e^{-1})` rounded up.
pub const HORIZON_CONSTANT_CAP: f64 = 3.164;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    pub ell: usize,
    pub k: usize,
    /// Uniform bound on `‖ε_k‖∞`.
    pub epsilon: f64,
    /// `‖v* − v_0‖∞`.
    pub initial_gap: f64,
}

impl BoundInputs {
    pub fn new(gamma: f64, ell: usize, k: usize, epsilon: f64, initial_gap: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("γ = {gamma} is not inside (0, 1)")));
        }
        if ell == 0 || k == 0 {
            return Err(invalid("ℓ and k must be at least 1"));
        }
        if !(epsilon >= 0.0) || !(initial_gap >= 0.0) {
            return Err(invalid("ε and the initial gap must be non-negative"));
        }
        Ok(BoundInputs {
            gamma,
            ell,
            k,
            epsilon,
            initial_gap,
        })
    }

    pub fn at_iteration(self, k: usize) -> Self {
        BoundInputs { k, ..self }
    }
}

fn gamma_pow(gamma: f64, n: usize) -> f64 {
    gamma.powi(i32::try_from(n).unwrap_or(i32::MAX))
}

/// `2(γ−γ^k)ε / ((1−γ)(1−γ^ℓ)) + 2γ^k ‖v*−v_0‖∞ / (1−γ)`.
pub fn theorem2_bound(inputs: &BoundInputs) -> f64 {
    let g = inputs.gamma;
    let gk = gamma_pow(g, inputs.k);
    let error_term = 2.0 * (g - gk) * inputs.epsilon / ((1.0 - g) * (1.0 - gamma_pow(g, inputs.ell)));
    let start_term = 2.0 * gk * inputs.initial_gap / (1.0 - g);
    error_term + start_term
}

/// The stationary (`ℓ = 1`) bound `2(γ−γ^k)ε/(1−γ)² + 2γ^k ‖v*−v_0‖∞/(1−γ)`.
/// `inputs.ell` is ignored.
pub fn theorem1_bound(inputs: &BoundInputs) -> f64 {
    let g = inputs.gamma;
    let gk = gamma_pow(g, inputs.k);
    let error_term = 2.0 * (g - gk) * inputs.epsilon / ((1.0 - g) * (1.0 - g));
    let start_term = 2.0 * gk * inputs.initial_gap / (1.0 - g);
    error_term + start_term
}

/// `ℓ* = ⌈1/(1−γ)⌉` and the resulting error constant `2/(1−γ^{ℓ*})`.
pub fn horizon_constant(gamma: f64) -> (usize, f64) {
    let x = 1.0 / (1.0 - gamma);
    // 1/(1 − 0.9) evaluates to 10.000000000000002
    let nearest = x.round();
    let ell = if (x - nearest).abs() <= 1e-9 * x { nearest } else { x.ceil() } as usize;
    (ell, 2.0 / (1.0 - gamma_pow(gamma, ell)))
}

/// Residual, shift, distance and loss vectors of one iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `b_k = T_{π_{k+1}} v_k − T_{π_{k+1,ℓ}} T_{π_{k+1}} v_k`
    pub residual: ValueFunction,
    /// `s_k = v_k − v_{π_{k,ℓ}} − ε_k`
    pub shift: ValueFunction,
    /// `d_k = v* − v_k + ε_k`
    pub distance: ValueFunction,
    /// `l_k = v* − v_{π_{k,ℓ}}`
    pub loss_vec: ValueFunction,
}

impl Diagnostics {
    /// Largest componentwise gap in `l_k = s_k + d_k`.
    pub fn identity_gap(&self) -> f64 {
        self.loss_vec
            .as_slice()
            .iter()
            .zip(self.shift.as_slice().iter().zip(self.distance.as_slice()))
            .fold(0.0, |acc, (l, (s, d))| acc.max((l - (s + d)).abs()))
    }
}

/// Diagnostics of iteration `k`, evaluating `π_{k,ℓ}` exactly.
#[allow(clippy::too_many_arguments)]
pub fn compute_diagnostics(
    mdp: &FiniteMdp,
    v_k: &ValueFunction,
    next_policy: &StationaryPolicy,
    next_periodic: &PeriodicPolicy,
    current_periodic: &PeriodicPolicy,
    error_k: &ValueFunction,
    v_star: &ValueFunction,
    eval_tolerance: f64,
    eval_max_iters: usize,
) -> Result<Diagnostics> {
    let periodic_value = evaluate_periodic(mdp, current_periodic, eval_tolerance, eval_max_iters)?;
    diagnostics_from_parts(
        mdp,
        v_k,
        next_policy,
        next_periodic,
        &periodic_value,
        error_k,
        v_star,
    )
}

/// [`compute_diagnostics`] with `v_{π_{k,ℓ}}` already known.
pub(crate) fn diagnostics_from_parts(
    mdp: &FiniteMdp,
    v_k: &ValueFunction,
    next_policy: &StationaryPolicy,
    next_periodic: &PeriodicPolicy,
    periodic_value: &ValueFunction,
    error_k: &ValueFunction,
    v_star: &ValueFunction,
) -> Result<Diagnostics> {
    for v in [v_k, periodic_value, error_k, v_star] {
        mdp.check_value(v)?;
    }
    mdp.check_policy(next_policy)?;
    mdp.check_periodic(next_periodic)?;

    let n = mdp.num_states();
    let mut greedy_image = vec![0.0; n];
    mdp.bellman_into(next_policy, v_k.as_slice(), &mut greedy_image);
    let mut periodic_image = greedy_image.clone();
    mdp.periodic_bellman_in_place(next_periodic, &mut periodic_image, &mut Vec::new());

    let zip3 = |f: &dyn Fn(usize) -> f64| ValueFunction::from_raw((0..n).map(f).collect());
    let residual = zip3(&|s| greedy_image[s] - periodic_image[s]);
    let shift = zip3(&|s| v_k[s] - periodic_value[s] - error_k[s]);
    let distance = zip3(&|s| v_star[s] - v_k[s] + error_k[s]);
    let loss_vec = zip3(&|s| v_star[s] - periodic_value[s]);

    let diagnostics = Diagnostics {
        residual,
        shift,
        distance,
        loss_vec,
    };
    let gap = diagnostics.identity_gap();
    if gap > IDENTITY_TOLERANCE {
        return Err(Error::Internal(format!(
            "loss differs from shift + distance by {gap:e}"
        )));
    }
    Ok(diagnostics)
}

/// One row of a bound check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub k: usize,
    pub loss: f64,
    pub bound: f64,
    pub slack: f64,
    pub ratio: f64,
    pub violated: bool,
}

/// `loss / bound`, reading `0/0` as exact equality.
pub fn loss_ratio(loss: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        loss / bound
    } else if loss.abs() <= f64::EPSILON {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Compares each record's sup-norm loss with [`theorem2_bound`] at its
/// iteration. `inputs.k` is replaced per record.
pub fn check_bound_satisfaction(records: &[IterationRecord], inputs: &BoundInputs) -> Result<Vec<BoundCheck>> {
    records
        .iter()
        .map(|r| {
            let loss = r
                .loss_sup
                .ok_or_else(|| invalid(format!("record {} carries no loss (v* unknown)", r.k)))?;
            let bound = theorem2_bound(&inputs.at_iteration(r.k));
            let slack = bound - loss;
            Ok(BoundCheck {
                k: r.k,
                loss,
                bound,
                slack,
                ratio: loss_ratio(loss, bound),
                violated: slack < -BOUND_SLACK_TOLERANCE,
            })
        })
        .collect()
}

/// Writes `k, loss, bound, slack, ratio`.
pub fn write_bound_checks<W: Write>(out: W, checks: &[BoundCheck]) -> Result<()> {
    write_rows(
        out,
        &["k", "loss", "bound", "slack", "ratio"],
        checks.iter().map(|c| {
            vec![
                c.k.to_string(),
                float_field(c.loss),
                float_field(c.bound),
                float_field(c.slack),
                float_field(c.ratio),
            ]
        }),
    )
}
