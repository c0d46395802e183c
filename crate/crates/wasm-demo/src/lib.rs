//! Browser bindings for the demo page in `www/`. Every export returns a
//! flat `Float64Array`; the layouts are documented per function.

use std::sync::Arc;

use fbm_sfde::fbm::{VolterraSynth, WienerPath};
use fbm_sfde::fractional::{frac_derivative, frac_integral, FracOrder, SampledFunction, UniformGrid};
use fbm_sfde::grid::TimeGrid;
use fbm_sfde::model::builtin_model;
use fbm_sfde::solver::{solve_em_truncated, solve_reference};
use fbm_sfde::special::gamma_fn;
use wasm_bindgen::prelude::*;

const MAX_NODES: usize = 1 << 14;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `n_paths` fBm paths on `[0, 1]` with `intervals` cells:
/// `[t_0..t_n, path_0, path_1, ...]`, each block `intervals + 1` long.
pub fn fbm_paths(hurst: f64, intervals: usize, n_paths: u32, seed: u64) -> Result<Vec<f64>, String> {
    if intervals == 0 || intervals > MAX_NODES {
        return Err(format!("intervals must be in 1..={MAX_NODES}"));
    }
    let grid = TimeGrid::new(1.0, 1.0, intervals, 1).map_err(err)?;
    let synth = VolterraSynth::new(grid, hurst).map_err(err)?;
    let mut out: Vec<f64> = (0..=intervals).map(|i| grid.time(i as isize)).collect();
    for p in 0..u64::from(n_paths) {
        let w = WienerPath::sample(grid, seed, p, 1).map_err(err)?;
        out.extend_from_slice(synth.synthesize(w).map_err(err)?.values());
    }
    Ok(out)
}

/// `f(x) = x^μ` on `[0, 1]` against its fractional integral and derivative
/// of order `α`, numerical and closed form:
/// `[x, f, I, I_exact, D, D_exact]`, each block `intervals + 1` long.
/// The derivative is singular at 0 when `μ < α`; node 0 of `D` is NaN.
pub fn operator_curves(alpha: f64, mu: f64, intervals: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_NODES).contains(&intervals) {
        return Err(format!("intervals must be in 2..={MAX_NODES}"));
    }
    if mu < 0.0 {
        return Err("mu must be non-negative".into());
    }
    let order = FracOrder::new(alpha).map_err(err)?;
    let grid = UniformGrid::covering(1.0, intervals).map_err(err)?;
    let f = SampledFunction::from_fn(grid, |x| x.powf(mu)).map_err(err)?;
    let i = frac_integral(&f, order).map_err(err)?;
    let d = frac_derivative(&f, order).map_err(err)?;
    let g = gamma_fn(mu + 1.0).map_err(err)?;
    let gi = g / gamma_fn(mu + 1.0 + alpha).map_err(err)?;
    let gd = g / gamma_fn(mu + 1.0 - alpha).map_err(err)?;
    let xs: Vec<f64> = grid.nodes().collect();
    let mut out = xs.clone();
    out.extend_from_slice(f.values());
    out.extend_from_slice(i.values());
    out.extend(xs.iter().map(|x| gi * x.powf(mu + alpha)));
    out.extend(
        d.values()
            .iter()
            .enumerate()
            .map(|(k, &v)| if k < d.first_defined() { f64::NAN } else { v }),
    );
    out.extend(
        xs.iter()
            .enumerate()
            .map(|(k, x)| if k == 0 && mu < alpha { f64::NAN } else { gd * x.powf(mu - alpha) }),
    );
    Ok(out)
}

/// One path of a builtin model on `[-τ, T]` with `τ = 0.5`, reference scheme on
/// the fine grid and truncated scheme with `δ = τ/m`: `[t, reference, em]`,
/// first component only, each block one entry per fine node.
pub fn em_vs_reference(
    model: &str,
    hurst: f64,
    horizon: f64,
    m: usize,
    substeps: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let tau = 0.5;
    let spec = builtin_model(model, tau).map_err(err)?;
    let grid = TimeGrid::new(tau, horizon, m, substeps).map_err(err)?;
    if grid.history_steps() + grid.n_steps() > MAX_NODES {
        return Err(format!("grid too large: more than {MAX_NODES} nodes"));
    }
    let synth = VolterraSynth::new(grid, hurst).map_err(err)?;
    let fbm = Arc::new(
        synth
            .synthesize(WienerPath::sample(grid, seed, 0, spec.m()).map_err(err)?)
            .map_err(err)?,
    );
    let y = solve_reference(&spec, &fbm).map_err(err)?;
    let x = solve_em_truncated(&spec, &fbm, grid.delta()).map_err(err)?;
    let d = spec.d();
    let first = -(grid.history_steps() as isize);
    let mut out: Vec<f64> = (first..=grid.n_steps() as isize).map(|i| grid.time(i)).collect();
    out.extend(y.values().iter().step_by(d));
    out.extend(x.values().iter().step_by(d));
    Ok(out)
}

#[wasm_bindgen(js_name = fbmPaths)]
pub fn fbm_paths_js(hurst: f64, intervals: usize, n_paths: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    fbm_paths(hurst, intervals, n_paths, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = operatorCurves)]
pub fn operator_curves_js(alpha: f64, mu: f64, intervals: usize) -> Result<Vec<f64>, JsError> {
    operator_curves(alpha, mu, intervals).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = emVsReference)]
pub fn em_vs_reference_js(
    model: &str,
    hurst: f64,
    horizon: f64,
    m: usize,
    substeps: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    em_vs_reference(model, hurst, horizon, m, substeps, u64::from(seed)).map_err(|e| JsError::new(&e))
}
