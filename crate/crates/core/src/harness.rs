//! Experiment drivers behind the command-line tool: exact solves with
//! per-iteration traces, and seeded parameter sweeps with CSV output.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversarial::{TightInstanceSpec, TightSchedule, LEFT};
use crate::benchmarks::{
    dynamic_location_mdp, garnet_mdp, DynamicLocationSpec, GarnetSpec, UniformErrorModel,
};
use crate::bounds::{theorem2_bound, BoundInputs};
use crate::csvfmt::{float_field, write_rows};
use crate::dp::{
    nsmpi_run, reference_pi, reference_vi, solve_optimal, ErrorModel, MParameter, NsmpiConfig,
};
use crate::error::{invalid, Result};
use crate::eval::{evaluate_stationary, DEFAULT_EVAL_MAX_ITERS, DEFAULT_EVAL_TOLERANCE};
use crate::mdp::{
    apply_optimality_op, greedy_policy, max_norm_distance, FiniteMdp, StationaryPolicy,
    ValueFunction,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Vi,
    Pi,
    Nsmpi { m: MParameter, ell: usize },
}

/// One line of an exact-solve trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveRow {
    pub k: usize,
    /// `‖v_k − v*‖∞`
    pub value_error: f64,
    /// `‖T v_k − v_k‖∞`
    pub bellman_residual: f64,
    /// `‖v* − v_π‖∞` for the policy produced at step `k`.
    pub loss: f64,
}

pub const SOLVE_COLUMNS: [&str; 4] = ["k", "value_error", "bellman_residual", "loss"];

/// Runs an exact (error-free) solver and traces its progress against the
/// optimal value obtained by policy iteration.
pub fn solve_trace(mdp: &FiniteMdp, method: SolveMethod, iterations: usize) -> Result<Vec<SolveRow>> {
    if iterations == 0 {
        return Err(invalid("at least one iteration is required"));
    }
    let (_, v_star) = solve_optimal(mdp)?;
    let n = mdp.num_states();
    let row = |k: usize, v: &ValueFunction, loss: f64| -> Result<SolveRow> {
        Ok(SolveRow {
            k,
            value_error: max_norm_distance(v, &v_star)?,
            bellman_residual: max_norm_distance(&apply_optimality_op(mdp, v)?, v)?,
            loss,
        })
    };
    let policy_loss = |p: &StationaryPolicy| -> Result<f64> {
        let v = evaluate_stationary(mdp, p, DEFAULT_EVAL_TOLERANCE, DEFAULT_EVAL_MAX_ITERS)?;
        max_norm_distance(&v_star, &v)
    };

    match method {
        SolveMethod::Vi => {
            let mut prev = ValueFunction::zeros(n);
            let mut rows = Vec::with_capacity(iterations);
            for (i, v) in reference_vi(mdp, &prev, iterations)?.into_iter().enumerate() {
                let loss = policy_loss(&greedy_policy(mdp, &prev)?)?;
                rows.push(row(i + 1, &v, loss)?);
                prev = v;
            }
            Ok(rows)
        }
        SolveMethod::Pi => {
            let start = greedy_policy(mdp, &ValueFunction::zeros(n))?;
            let outcome = reference_pi(mdp, &start, iterations)?;
            outcome
                .policies
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let v = evaluate_stationary(mdp, p, DEFAULT_EVAL_TOLERANCE, DEFAULT_EVAL_MAX_ITERS)?;
                    let loss = max_norm_distance(&v_star, &v)?;
                    row(i + 1, &v, loss)
                })
                .collect()
        }
        SolveMethod::Nsmpi { m, ell } => {
            let config = NsmpiConfig::new(m, ell, iterations);
            nsmpi_run(mdp, &config, Some(&v_star))?
                .iter()
                .map(|r| row(r.k, &r.value, r.loss_sup.unwrap_or(f64::NAN)))
                .collect()
        }
    }
}

pub fn write_solve_csv<W: Write>(out: W, rows: &[SolveRow]) -> Result<()> {
    write_rows(
        out,
        &SOLVE_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                float_field(r.value_error),
                float_field(r.bellman_residual),
                float_field(r.loss),
            ]
        }),
    )
}

/// Where the sweep's MDP comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MdpSource {
    /// The adversarial chain, rebuilt per cell for its `ℓ`, driven by its own
    /// error schedule instead of random errors.
    Tight,
    Dynloc { n: usize },
    Garnet {
        num_states: usize,
        num_actions: usize,
        branching: usize,
        reward_sparsity: f64,
        seed: u64,
    },
    /// An MDP already loaded from a file; its own discount is used.
    Loaded(FiniteMdp),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub source: MdpSource,
    pub ells: Vec<usize>,
    pub ms: Vec<MParameter>,
    pub epsilon: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// When set, cells are the pairs `(ℓ, budget/ℓ)` for each `ℓ` in `ells`
    /// dividing the budget, and `ms` is ignored.
    pub fixed_budget: Option<usize>,
    /// Fill the `seconds` column with wall-clock time; off by default to
    /// keep output byte-reproducible.
    pub timing: bool,
}

impl SweepConfig {
    /// Dynamic location, `n = 8`, `γ = 0.98`, `ε = 4`, `ℓ ∈ {1,2,5,10}`,
    /// `m ∈ {1,2,5,10,25,∞}`, 150 iterations.
    pub fn dynloc_default() -> Self {
        SweepConfig {
            source: MdpSource::Dynloc { n: 8 },
            ells: vec![1, 2, 5, 10],
            ms: [1, 2, 5, 10, 25]
                .into_iter()
                .map(MParameter::Finite)
                .chain([MParameter::Infinite])
                .collect(),
            epsilon: 4.0,
            gamma: 0.98,
            iterations: 150,
            runs: 20,
            base_seed: 0,
            fixed_budget: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ells.is_empty() || self.ells.contains(&0) {
            return Err(invalid("the ℓ grid must be non-empty with entries ≥ 1"));
        }
        if self.fixed_budget.is_none() && self.ms.is_empty() {
            return Err(invalid("the m grid must be non-empty"));
        }
        if self.runs == 0 || self.iterations == 0 {
            return Err(invalid("runs and iterations must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("ε must be finite and non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("γ must lie inside (0, 1)"));
        }
        if let Some(budget) = self.fixed_budget {
            if self.cells().is_empty() {
                return Err(invalid(format!("no ℓ in the grid divides the budget {budget}")));
            }
        }
        Ok(())
    }

    /// `(ℓ, m)` pairs in output order.
    pub fn cells(&self) -> Vec<(usize, MParameter)> {
        match self.fixed_budget {
            Some(budget) => self
                .ells
                .iter()
                .filter(|&&ell| budget % ell == 0)
                .map(|&ell| (ell, MParameter::Finite(budget / ell)))
                .collect(),
            None => self
                .ells
                .iter()
                .flat_map(|&ell| self.ms.iter().map(move |&m| (ell, m)))
                .collect(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `base_seed ⊕ hash(ℓ, m, run)`.
pub fn cell_seed(base_seed: u64, ell: usize, m: MParameter, run: usize) -> u64 {
    let m_code = match m {
        MParameter::Finite(m) => m as u64,
        MParameter::Infinite => u64::MAX,
    };
    let h = splitmix64(splitmix64(splitmix64(ell as u64) ^ m_code) ^ run as u64);
    base_seed ^ h
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub ell: usize,
    pub m: MParameter,
    pub run: usize,
    pub k: usize,
    pub loss_sup: f64,
    pub loss_mean: f64,
    pub bound: f64,
    pub seconds: Option<f64>,
}

pub const SWEEP_COLUMNS: [&str; 8] = ["ell", "m", "run", "k", "loss_sup", "loss_mean", "bound", "seconds"];

struct Prepared {
    mdp: FiniteMdp,
    v_star: ValueFunction,
}

fn prepare_shared(config: &SweepConfig) -> Result<Option<Prepared>> {
    let mdp = match &config.source {
        MdpSource::Tight => return Ok(None),
        MdpSource::Dynloc { n } => dynamic_location_mdp(&DynamicLocationSpec {
            n: *n,
            gamma: config.gamma,
        })?,
        MdpSource::Garnet {
            num_states,
            num_actions,
            branching,
            reward_sparsity,
            seed,
        } => garnet_mdp(&GarnetSpec {
            num_states: *num_states,
            num_actions: *num_actions,
            branching: *branching,
            reward_sparsity: *reward_sparsity,
            discount: config.gamma,
            seed: *seed,
        })?,
        MdpSource::Loaded(mdp) => mdp.clone(),
    };
    let (_, v_star) = solve_optimal(&mdp)?;
    Ok(Some(Prepared { mdp, v_star }))
}

fn run_cell(
    config: &SweepConfig,
    shared: Option<&Prepared>,
    ell: usize,
    m: MParameter,
    run: usize,
) -> Result<Vec<SweepRow>> {
    let started = Instant::now();
    let tight;
    let (mdp, v_star, error_model, nsmpi): (&FiniteMdp, ValueFunction, Arc<dyn ErrorModel>, NsmpiConfig) =
        match shared {
            Some(p) => {
                let model = UniformErrorModel::new(config.epsilon, cell_seed(config.base_seed, ell, m, run))?;
                (
                    &p.mdp,
                    p.v_star.clone(),
                    Arc::new(model),
                    NsmpiConfig::new(m, ell, config.iterations),
                )
            }
            None => {
                let m_states = match m {
                    MParameter::Finite(m) => m,
                    MParameter::Infinite => config.iterations,
                };
                let spec = TightInstanceSpec::new(ell, m_states, config.epsilon, config.gamma, config.iterations)?;
                tight = crate::adversarial::build_tight_mdp(&spec)?;
                let n = spec.num_states;
                (
                    &tight,
                    ValueFunction::zeros(n),
                    Arc::new(TightSchedule(spec)),
                    NsmpiConfig::new(m, ell, config.iterations)
                        .with_initial_policies(vec![StationaryPolicy::constant(n, LEFT); ell - 1]),
                )
            }
        };
    let gap = v_star.max_abs();
    let records = nsmpi_run(mdp, &nsmpi.with_error_model(error_model), Some(&v_star))?;
    let seconds = config.timing.then(|| started.elapsed().as_secs_f64());
    Ok(records
        .iter()
        .map(|r| SweepRow {
            ell,
            m,
            run,
            k: r.k,
            loss_sup: r.loss_sup.expect("v* supplied"),
            loss_mean: r.loss_mean.expect("v* supplied"),
            bound: theorem2_bound(&BoundInputs {
                gamma: mdp.discount(),
                ell,
                k: r.k,
                epsilon: config.epsilon,
                initial_gap: gap,
            }),
            seconds,
        })
        .collect())
}

/// Runs every `(ℓ, m, run)` cell, in parallel, and returns the rows in
/// `(ℓ, m, run, k)` grid order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let shared = prepare_shared(config)?;
    let jobs: Vec<(usize, MParameter, usize)> = config
        .cells()
        .into_iter()
        .flat_map(|(ell, m)| (0..config.runs).map(move |r| (ell, m, r)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(ell, m, run)| run_cell(config, shared.as_ref(), ell, m, run))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    write_rows(
        out,
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.ell.to_string(),
                r.m.to_string(),
                r.run.to_string(),
                r.k.to_string(),
                float_field(r.loss_sup),
                float_field(r.loss_mean),
                float_field(r.bound),
                r.seconds.map(float_field).unwrap_or_default(),
            ]
        }),
    )
}

/// Run-averaged curves of one `(ℓ, m)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub ell: usize,
    pub m: MParameter,
    /// Mean over runs of the state-averaged loss, indexed by `k − 1`.
    pub mean_loss: Vec<f64>,
    /// Mean over runs of the sup-norm loss, indexed by `k − 1`.
    pub sup_loss: Vec<f64>,
}

impl CellSummary {
    /// Average of `mean_loss` over the last `window` iterations.
    pub fn plateau(&self, window: usize) -> f64 {
        let tail = &self.mean_loss[self.mean_loss.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    /// First iteration from which `mean_loss` never again exceeds
    /// `plateau · (1 + rel_band)`.
    pub fn settling_iteration(&self, window: usize, rel_band: f64) -> usize {
        let ceiling = self.plateau(window) * (1.0 + rel_band);
        let last_above = self.mean_loss.iter().rposition(|&x| x > ceiling);
        last_above.map_or(1, |i| i + 2)
    }
}

/// Groups sweep rows by cell, preserving grid order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut out: Vec<(CellSummary, Vec<usize>)> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|(c, _)| c.ell == r.ell && c.m == r.m) {
            Some(i) => i,
            None => {
                out.push((
                    CellSummary {
                        ell: r.ell,
                        m: r.m,
                        mean_loss: Vec::new(),
                        sup_loss: Vec::new(),
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        let (cell, counts) = &mut out[idx];
        if cell.mean_loss.len() < r.k {
            cell.mean_loss.resize(r.k, 0.0);
            cell.sup_loss.resize(r.k, 0.0);
            counts.resize(r.k, 0);
        }
        cell.mean_loss[r.k - 1] += r.loss_mean;
        cell.sup_loss[r.k - 1] += r.loss_sup;
        counts[r.k - 1] += 1;
    }
    out.into_iter()
        .map(|(mut cell, counts)| {
            for (i, c) in counts.iter().enumerate() {
                let c = (*c).max(1) as f64;
                cell.mean_loss[i] /= c;
                cell.sup_loss[i] /= c;
            }
            cell
        })
        .collect()
}
