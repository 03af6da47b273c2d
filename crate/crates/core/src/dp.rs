//! The non-stationary MPI loop with error injection, plus reference value
//! and policy iteration.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{diagnostics_from_parts, Diagnostics};
use crate::error::{invalid, Error, Result};
use crate::eval::{evaluate_periodic, evaluate_stationary, DEFAULT_EVAL_MAX_ITERS, DEFAULT_EVAL_TOLERANCE};
use crate::mdp::{
    apply_optimality_op, greedy_policy, max_norm_distance, FiniteMdp, PeriodicPolicy,
    StationaryPolicy, ValueFunction,
};

/// Number of applications of the periodic operator per evaluation step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MParameter {
    Finite(usize),
    /// Exact evaluation of the periodic policy.
    Infinite,
}

impl fmt::Display for MParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MParameter::Finite(m) => write!(f, "{m}"),
            MParameter::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for MParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "INF" | "infinity" | "∞" => Ok(MParameter::Infinite),
            other => other
                .parse::<usize>()
                .map(MParameter::Finite)
                .map_err(|_| invalid(format!("`{other}` is neither a non-negative integer nor `inf`"))),
        }
    }
}

/// Source of the per-iteration evaluation error `ε_k`.
pub trait ErrorModel: Send + Sync {
    /// The error added at iteration `k ≥ 1`.
    fn error(&self, k: usize, num_states: usize) -> Result<ValueFunction>;

    /// A bound on `‖ε_k‖∞` valid for every `k`.
    fn sup_bound(&self) -> f64;
}

/// Exact evaluation: `ε_k = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroErrors;

impl ErrorModel for ZeroErrors {
    fn error(&self, _k: usize, num_states: usize) -> Result<ValueFunction> {
        Ok(ValueFunction::zeros(num_states))
    }

    fn sup_bound(&self) -> f64 {
        0.0
    }
}

#[derive(Clone)]
pub struct NsmpiConfig {
    pub m: MParameter,
    pub ell: usize,
    pub iterations: usize,
    /// Defaults to the zero function.
    pub v0: Option<ValueFunction>,
    /// `π_0, π_{-1}, …, π_{-ℓ+2}`, newest first. When absent, `greedy(v0)`
    /// is repeated and the affected records are flagged.
    pub initial_policies: Option<Vec<StationaryPolicy>>,
    pub error_model: Arc<dyn ErrorModel>,
    pub eval_tolerance: f64,
    pub eval_max_iters: usize,
    /// Compute residual/shift/distance/loss vectors per record (needs `v*`).
    pub diagnostics: bool,
}

impl fmt::Debug for NsmpiConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NsmpiConfig")
            .field("m", &self.m)
            .field("ell", &self.ell)
            .field("iterations", &self.iterations)
            .field("error_bound", &self.error_model.sup_bound())
            .field("eval_tolerance", &self.eval_tolerance)
            .field("diagnostics", &self.diagnostics)
            .finish_non_exhaustive()
    }
}

impl NsmpiConfig {
    pub fn new(m: MParameter, ell: usize, iterations: usize) -> Self {
        NsmpiConfig {
            m,
            ell,
            iterations,
            v0: None,
            initial_policies: None,
            error_model: Arc::new(ZeroErrors),
            eval_tolerance: DEFAULT_EVAL_TOLERANCE,
            eval_max_iters: DEFAULT_EVAL_MAX_ITERS,
            diagnostics: false,
        }
    }

    pub fn with_v0(mut self, v0: ValueFunction) -> Self {
        self.v0 = Some(v0);
        self
    }

    pub fn with_initial_policies(mut self, policies: Vec<StationaryPolicy>) -> Self {
        self.initial_policies = Some(policies);
        self
    }

    pub fn with_error_model(mut self, model: Arc<dyn ErrorModel>) -> Self {
        self.error_model = model;
        self
    }

    pub fn with_diagnostics(mut self, enabled: bool) -> Self {
        self.diagnostics = enabled;
        self
    }

    fn validate(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.ell == 0 {
            return Err(invalid("ℓ must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("at least one iteration is required"));
        }
        if !(self.eval_tolerance > 0.0) || self.eval_max_iters == 0 {
            return Err(invalid("evaluation tolerance and budget must be positive"));
        }
        if let Some(v0) = &self.v0 {
            mdp.check_value(v0)?;
        }
        if let Some(policies) = &self.initial_policies {
            if policies.len() != self.ell - 1 {
                return Err(invalid(format!(
                    "ℓ = {} needs {} initial policies, got {}",
                    self.ell,
                    self.ell - 1,
                    policies.len()
                )));
            }
            policies.iter().try_for_each(|p| mdp.check_policy(p))?;
        }
        Ok(())
    }
}

/// Snapshot after iteration `k` (1-based).
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `v_k`, error included.
    pub value: ValueFunction,
    /// `π_k`.
    pub policy: StationaryPolicy,
    /// `π_{k,ℓ}`.
    pub periodic: PeriodicPolicy,
    /// Exact value of `π_{k,ℓ}`.
    pub periodic_value: ValueFunction,
    /// `ε_k`.
    pub error: ValueFunction,
    /// `‖v* − v_{π_{k,ℓ}}‖∞`, when `v*` is known.
    pub loss_sup: Option<f64>,
    /// State average of `v* − v_{π_{k,ℓ}}`, when `v*` is known.
    pub loss_mean: Option<f64>,
    /// The cycle still contains default (not user supplied) padding policies.
    pub default_padding: bool,
    pub diagnostics: Option<Diagnostics>,
}

/// Runs `K` iterations of
///
/// ```text
/// π_{k+1} = greedy(v_k)
/// v_{k+1} = (T_{π_{k+1,ℓ}})^m T_{π_{k+1}} v_k + ε_{k+1}
/// ```
///
/// and returns one record per iteration.
pub fn nsmpi_run(
    mdp: &FiniteMdp,
    config: &NsmpiConfig,
    v_star: Option<&ValueFunction>,
) -> Result<Vec<IterationRecord>> {
    config.validate(mdp)?;
    if let Some(v) = v_star {
        mdp.check_value(v)?;
    }
    let n = mdp.num_states();
    let ell = config.ell;
    let mut v = config.v0.clone().unwrap_or_else(|| ValueFunction::zeros(n));

    let (mut history, mut padding_left): (VecDeque<StationaryPolicy>, usize) =
        match &config.initial_policies {
            Some(p) => (p.iter().cloned().collect(), 0),
            None => {
                let g = greedy_policy(mdp, &v)?;
                (std::iter::repeat_n(g, ell - 1).collect(), ell - 1)
            }
        };

    let evaluate = |policy: &PeriodicPolicy| {
        evaluate_periodic(mdp, policy, config.eval_tolerance, config.eval_max_iters)
    };

    let mut records: Vec<IterationRecord> = Vec::with_capacity(config.iterations);
    let mut scratch = Vec::new();
    for k in 0..config.iterations {
        let policy = greedy_policy(mdp, &v)?;
        history.push_front(policy.clone());
        history.truncate(ell);
        let periodic = PeriodicPolicy::new(history.iter().cloned().collect())?;

        if let (true, Some(prev), Some(v_star)) = (config.diagnostics, records.last_mut(), v_star) {
            prev.diagnostics = Some(diagnostics_from_parts(
                mdp,
                &v,
                &policy,
                &periodic,
                &prev.periodic_value,
                &prev.error,
                v_star,
            )?);
        }

        let periodic_value = evaluate(&periodic)?;
        let mut next = match config.m {
            MParameter::Infinite => periodic_value.clone().into_vec(),
            MParameter::Finite(m) => {
                let mut u = vec![0.0; n];
                mdp.bellman_into(&policy, v.as_slice(), &mut u);
                for _ in 0..m {
                    mdp.periodic_bellman_in_place(&periodic, &mut u, &mut scratch);
                }
                u
            }
        };
        let error = config.error_model.error(k + 1, n)?;
        mdp.check_value(&error)?;
        for (x, e) in next.iter_mut().zip(error.as_slice()) {
            *x += e;
        }
        v = ValueFunction::new(next)?;

        let (loss_sup, loss_mean) = match v_star {
            Some(v_star) => {
                let loss = v_star.sub(&periodic_value)?;
                (Some(loss.max_abs()), Some(loss.mean()))
            }
            None => (None, None),
        };
        records.push(IterationRecord {
            k: k + 1,
            value: v.clone(),
            policy,
            periodic,
            periodic_value,
            error,
            loss_sup,
            loss_mean,
            default_padding: padding_left > 0,
            diagnostics: None,
        });
        padding_left = padding_left.saturating_sub(1);
    }

    if let (true, Some(v_star)) = (config.diagnostics, v_star) {
        let last = records.last_mut().expect("at least one iteration");
        let policy = greedy_policy(mdp, &v)?;
        let mut cycle = vec![policy.clone()];
        cycle.extend(last.periodic.cycle().iter().take(ell - 1).cloned());
        let periodic = PeriodicPolicy::new(cycle)?;
        last.diagnostics = Some(diagnostics_from_parts(
            mdp,
            &v,
            &policy,
            &periodic,
            &last.periodic_value,
            &last.error,
            v_star,
        )?);
    }
    Ok(records)
}

/// Serializable summary of an [`NsmpiConfig`] for run traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceConfig {
    pub m: MParameter,
    pub ell: usize,
    pub iterations: usize,
    /// `sup_k ‖ε_k‖∞` promised by the error model.
    pub error_bound: f64,
    pub eval_tolerance: f64,
    pub eval_max_iters: usize,
}

impl From<&NsmpiConfig> for TraceConfig {
    fn from(c: &NsmpiConfig) -> Self {
        TraceConfig {
            m: c.m,
            ell: c.ell,
            iterations: c.iterations,
            error_bound: c.error_model.sup_bound(),
            eval_tolerance: c.eval_tolerance,
            eval_max_iters: c.eval_max_iters,
        }
    }
}

/// `{config, records}` as pretty JSON, for regression snapshots.
pub fn run_trace_json(config: &NsmpiConfig, records: &[IterationRecord]) -> Result<String> {
    #[derive(Serialize)]
    struct Trace<'a> {
        config: TraceConfig,
        records: &'a [IterationRecord],
    }
    Ok(serde_json::to_string_pretty(&Trace {
        config: config.into(),
        records,
    })?)
}

/// Exact value iteration `v_{k+1} = T v_k`; returns `v_1, …, v_K`.
pub fn reference_vi(mdp: &FiniteMdp, v0: &ValueFunction, iterations: usize) -> Result<Vec<ValueFunction>> {
    mdp.check_value(v0)?;
    let mut out = Vec::with_capacity(iterations);
    let mut v = v0.clone();
    for _ in 0..iterations {
        v = apply_optimality_op(mdp, &v)?;
        out.push(v.clone());
    }
    Ok(out)
}

/// Result of exact policy iteration.
#[derive(Clone, Debug)]
pub struct PiOutcome {
    /// `π_0, π_1, …`, ending with the stable policy.
    pub policies: Vec<StationaryPolicy>,
    pub policy: StationaryPolicy,
    pub value: ValueFunction,
    /// Number of greedy improvement steps, the last one confirming stability.
    pub improvements: usize,
}

/// Exact policy iteration from `π_0` until the greedy policy repeats.
pub fn reference_pi(mdp: &FiniteMdp, pi0: &StationaryPolicy, max_iters: usize) -> Result<PiOutcome> {
    mdp.check_policy(pi0)?;
    let mut policies = vec![pi0.clone()];
    let mut current = pi0.clone();
    let mut last_residual = f64::INFINITY;
    for step in 1..=max_iters {
        let value = evaluate_stationary(mdp, &current, DEFAULT_EVAL_TOLERANCE, DEFAULT_EVAL_MAX_ITERS)?;
        let next = greedy_policy(mdp, &value)?;
        if next == current {
            return Ok(PiOutcome {
                policies,
                policy: current,
                value,
                improvements: step,
            });
        }
        last_residual = max_norm_distance(&apply_optimality_op(mdp, &value)?, &value)?;
        policies.push(next.clone());
        current = next;
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iters,
        residual: last_residual,
    })
}

/// Optimal value and policy via exact policy iteration from `greedy(0)`.
pub fn solve_optimal(mdp: &FiniteMdp) -> Result<(StationaryPolicy, ValueFunction)> {
    let start = greedy_policy(mdp, &ValueFunction::zeros(mdp.num_states()))?;
    let out = reference_pi(mdp, &start, 10_000)?;
    Ok((out.policy, out.value))
}
