//! WebAssembly bindings for the demo page in `www/`. Every export returns a
//! JSON string; the `*_json` functions behind them are plain Rust so they can
//! be tested natively.

use std::sync::Arc;

use nsmpi::adversarial::{simulate_tight, TightInstanceSpec};
use nsmpi::benchmarks::{dynamic_location_mdp, DynamicLocationSpec, UniformErrorModel};
use nsmpi::bounds::{horizon_constant, theorem2_bound, BoundInputs};
use nsmpi::dp::solve_optimal;
use nsmpi::harness::cell_seed;
use nsmpi::{nsmpi_run, MParameter, NsmpiConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// States of the tight chain shown in the value plot.
const SHOWN_STATES: usize = 40;

/// Largest dynamic location instance the page may request.
const MAX_SITES: usize = 12;

#[derive(Serialize)]
struct TightView {
    num_states: usize,
    k: Vec<usize>,
    loss: Vec<f64>,
    bound: Vec<f64>,
    /// `v_k` over the first states, one row per iteration.
    values: Vec<Vec<f64>>,
    /// State (1-based) at which `π_k` plays `→`.
    right_at: Vec<Option<usize>>,
}

#[derive(Serialize)]
struct BoundView {
    ell: Vec<usize>,
    bound: Vec<f64>,
    stationary: f64,
    horizon_ell: usize,
    horizon_constant: f64,
}

#[derive(Serialize)]
struct DynlocView {
    k: Vec<usize>,
    mean_loss: Vec<f64>,
    sup_loss: Vec<f64>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn tight_json(ell: usize, m: usize, epsilon: f64, gamma: f64, iterations: usize) -> Result<String, String> {
    let spec = TightInstanceSpec::new(ell, m, epsilon, gamma, iterations).map_err(|e| e.to_string())?;
    let (_, records) = simulate_tight(&spec, MParameter::Finite(m)).map_err(|e| e.to_string())?;
    let shown = spec.num_states.min(SHOWN_STATES);
    to_json(&TightView {
        num_states: spec.num_states,
        k: records.iter().map(|r| r.k).collect(),
        loss: records.iter().map(|r| r.loss_sup.unwrap_or(f64::NAN)).collect(),
        bound: records.iter().map(|r| spec.attained_loss(r.k)).collect(),
        values: records.iter().map(|r| r.value.as_slice()[..shown].to_vec()).collect(),
        right_at: records
            .iter()
            .map(|r| (1..spec.num_states).find(|&s| r.policy[s] == nsmpi::adversarial::RIGHT).map(|s| s + 1))
            .collect(),
    })
}

pub fn bound_curve_json(gamma: f64, k: usize, epsilon: f64, max_ell: usize) -> Result<String, String> {
    if max_ell == 0 {
        return Err("max_ell must be at least 1".into());
    }
    let at = |ell| BoundInputs::new(gamma, ell, k, epsilon, 0.0).map(|i| theorem2_bound(&i));
    let ells: Vec<usize> = (1..=max_ell).collect();
    let bound = ells.iter().map(|&l| at(l)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let (horizon_ell, horizon_constant) = horizon_constant(gamma);
    to_json(&BoundView {
        stationary: bound[0],
        ell: ells,
        bound,
        horizon_ell,
        horizon_constant,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn dynloc_json(
    n: usize,
    gamma: f64,
    ell: usize,
    m: &str,
    epsilon: f64,
    iterations: usize,
    runs: usize,
    seed: u64,
) -> Result<String, String> {
    if n > MAX_SITES {
        return Err(format!("at most {MAX_SITES} sites"));
    }
    if runs == 0 {
        return Err("at least one run".into());
    }
    let m: MParameter = m.parse().map_err(|e: nsmpi::Error| e.to_string())?;
    let mdp = dynamic_location_mdp(&DynamicLocationSpec { n, gamma }).map_err(|e| e.to_string())?;
    let (_, v_star) = solve_optimal(&mdp).map_err(|e| e.to_string())?;
    let mut mean_loss = vec![0.0; iterations];
    let mut sup_loss = vec![0.0; iterations];
    for run in 0..runs {
        let model = UniformErrorModel::new(epsilon, cell_seed(seed, ell, m, run)).map_err(|e| e.to_string())?;
        let config = NsmpiConfig::new(m, ell, iterations).with_error_model(Arc::new(model));
        let records = nsmpi_run(&mdp, &config, Some(&v_star)).map_err(|e| e.to_string())?;
        for (i, r) in records.iter().enumerate() {
            mean_loss[i] += r.loss_mean.unwrap_or(f64::NAN) / runs as f64;
            sup_loss[i] += r.loss_sup.unwrap_or(f64::NAN) / runs as f64;
        }
    }
    to_json(&DynlocView {
        k: (1..=iterations).collect(),
        mean_loss,
        sup_loss,
    })
}

#[wasm_bindgen]
pub fn tight_trajectory(ell: usize, m: usize, epsilon: f64, gamma: f64, iterations: usize) -> Result<String, JsValue> {
    tight_json(ell, m, epsilon, gamma, iterations).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bound_curve(gamma: f64, k: usize, epsilon: f64, max_ell: usize) -> Result<String, JsValue> {
    bound_curve_json(gamma, k, epsilon, max_ell).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn dynloc_run(
    n: usize,
    gamma: f64,
    ell: usize,
    m: &str,
    epsilon: f64,
    iterations: usize,
    runs: usize,
    seed: u64,
) -> Result<String, JsValue> {
    dynloc_json(n, gamma, ell, m, epsilon, iterations, runs, seed).map_err(|e| JsValue::from_str(&e))
}
