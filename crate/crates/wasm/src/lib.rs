//! Browser bindings: equilibrium obliquity, obliquity maps and stability
//! curves for Mercury-like parameters.
//!
//! The plain functions are the tested surface; the `#[wasm_bindgen]`
//! wrappers only convert errors for JavaScript.

use wasm_bindgen::prelude::*;

use spinorbit::cassini::find_equilibrium;
use spinorbit::eccentricity::MAX_ECC_ORDER;
use spinorbit::hamiltonian::{obliquity_implicit, AveragedHamiltonian};
use spinorbit::params::{PhysicalParams, SweepParam, ARCMIN_PER_RAD};
use spinorbit::pipeline::{run, PipelineOptions};
use spinorbit::stability::stability_curve as curve;
use spinorbit::sweep::default_range;

/// Largest normalization order offered in the browser.
pub const MAX_DEMO_ORDER: usize = 16;

fn params_with(c: f64, e: f64, i: f64, omega_dot: f64, node_dot: f64) -> Result<PhysicalParams, String> {
    let mut p = PhysicalParams::mercury();
    p.c = c;
    p.e = e;
    p.i = i;
    p.omega_dot = omega_dot;
    p.node_dot = node_dot;
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

/// `[closed-form eps, Cassini-state eps]` in arcmin.
pub fn obliquity_pair(c: f64, e: f64, i: f64, omega_dot: f64, node_dot: f64) -> Result<Vec<f64>, String> {
    let p = params_with(c, e, i, omega_dot, node_dot)?;
    let implicit = obliquity_implicit(&p).map_err(|e| e.to_string())?;
    let h = AveragedHamiltonian::new(p, MAX_ECC_ORDER).map_err(|e| e.to_string())?;
    let state = find_equilibrium(&h).map_err(|e| e.to_string())?;
    Ok(vec![implicit * ARCMIN_PER_RAD, state.eps_star * ARCMIN_PER_RAD])
}

/// Closed-form obliquity (arcmin) on an `n x n` grid over two parameters at
/// their standard ranges, row-major with `x` fastest. Unsolvable cells are NaN.
pub fn obliquity_map(x: &str, y: &str, n: usize) -> Result<Vec<f64>, String> {
    let px = SweepParam::from_name(x).ok_or_else(|| format!("unknown parameter {x:?}"))?;
    let py = SweepParam::from_name(y).ok_or_else(|| format!("unknown parameter {y:?}"))?;
    if px == py || !(2..=200).contains(&n) {
        return Err("need two distinct parameters and 2 <= n <= 200".into());
    }
    let (rx, ry) = (default_range(px), default_range(py));
    let at = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            let mut p = PhysicalParams::mercury();
            px.set(&mut p, at(rx, ix));
            py.set(&mut p, at(ry, iy));
            out.push(obliquity_implicit(&p).map_or(f64::NAN, |e| e * ARCMIN_PER_RAD));
        }
    }
    Ok(out)
}

/// Flattened `(rho0, log10 T)` pairs for Mercury at order `r`.
pub fn stability_points(r: usize, rho0_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(1..=MAX_DEMO_ORDER).contains(&r) {
        return Err(format!("order must lie in 1..={MAX_DEMO_ORDER}"));
    }
    if !(rho0_max > 0.0) || steps == 0 || steps > 1000 {
        return Err("need rho0_max > 0 and 1 <= steps <= 1000".into());
    }
    let grid: Vec<f64> = (0..=steps).map(|k| rho0_max * k as f64 / steps as f64).collect();
    let run = run(PhysicalParams::mercury(), &[r], &PipelineOptions::default()).map_err(|e| e.to_string())?;
    Ok(curve(&run.profiles[0], &grid).into_iter().flat_map(|(a, b)| [a, b]).collect())
}

#[wasm_bindgen]
pub fn obliquity(c: f64, e: f64, i: f64, omega_dot: f64, node_dot: f64) -> Result<Vec<f64>, JsValue> {
    obliquity_pair(c, e, i, omega_dot, node_dot).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn obliquity_grid(x: &str, y: &str, n: usize) -> Result<Vec<f64>, JsValue> {
    obliquity_map(x, y, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn stability_curve(r: usize, rho0_max: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    stability_points(r, rho0_max, steps).map_err(|e| JsValue::from_str(&e))
}
