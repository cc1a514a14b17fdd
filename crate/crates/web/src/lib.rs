//! Browser bindings for a planar demo: one radial bump of radius 1 at the
//! origin, probed by the scattering map, the far field of a packet and the
//! scattering matrix on a sphere Gaussian state.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented on
//! the plain Rust functions, which are also what the tests exercise.

use std::f64::consts::PI;

use gsmatrix::dynamics::scattering_map;
use gsmatrix::linalg::ComplexSymMatrix;
use gsmatrix::packet::{farfield_future, farfield_past, WavePacket};
use gsmatrix::potential::{make_potential, BumpPotential};
use gsmatrix::smatrix::{apply_scattering_matrix, state_from_coords};
use gsmatrix::MultiPoly;
use wasm_bindgen::prelude::*;

const TOL: f64 = 1e-10;

fn bump(amplitude: f64) -> Result<BumpPotential, String> {
    make_potential(2, &[(vec![0.0, 0.0], 1.0, amplitude)]).map_err(|e| e.to_string())
}

fn unit(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

fn circle(n: usize) -> impl Iterator<Item = (f64, [f64; 2])> {
    (0..n).map(move |k| {
        let a = -PI + 2.0 * PI * k as f64 / n as f64;
        (a, unit(a))
    })
}

/// Rays sent in along `+x₁` at impact parameters in `[-eta_max, eta_max]`.
/// Returns `rows` triples `(η, outgoing angle, time delay)`.
pub fn deflection(amplitude: f64, eta_max: f64, rows: usize) -> Result<Vec<f64>, String> {
    let v = bump(amplitude)?;
    let mut out = Vec::with_capacity(3 * rows);
    for j in 0..rows {
        let s = if rows < 2 { 0.0 } else { -eta_max + 2.0 * eta_max * j as f64 / (rows - 1) as f64 };
        let im = scattering_map(&v, &[1.0, 0.0], &[0.0, s], TOL).map_err(|e| e.to_string())?;
        out.extend([s, im.omega[1].atan2(im.omega[0]), im.time_delay]);
    }
    Ok(out)
}

/// Future and past radiation profiles of a unit-momentum packet with
/// `Γ = Id`, centered at `(x, y)` and moving at `angle`. Returns `samples`
/// rows `(θ, |future|, |past|)` over the circle, scaled by `h^{-1/4}`.
pub fn farfield(x: f64, y: f64, angle: f64, h: f64, samples: usize) -> Result<Vec<f64>, String> {
    let p = WavePacket::new(vec![x, y], unit(angle).to_vec(), ComplexSymMatrix::identity(2), MultiPoly::one(2), 0.0, h)
        .map_err(|e| e.to_string())?;
    let fut = farfield_future(&p, 0.0).map_err(|e| e.to_string())?;
    let past = farfield_past(&p, 0.0).map_err(|e| e.to_string())?;
    let scale = h.powf(-0.25);
    Ok(circle(samples).flat_map(|(a, w)| [a, scale * fut.eval(&w).norm(), scale * past.eval(&w).norm()]).collect())
}

/// Applies the scattering matrix to the standard state on the line with
/// direction `angle` and impact parameter `eta`. The first four entries are
/// `δ₁`, the outgoing angle, the outgoing impact parameter and the time
/// delay `t₊ + t₋`; then `samples` rows `(θ, |input|, |output|)`.
pub fn scatter_state(amplitude: f64, angle: f64, eta: f64, h: f64, samples: usize) -> Result<Vec<f64>, String> {
    let v = bump(amplitude)?;
    let w = unit(angle);
    let e = [-eta * w[1], eta * w[0]];
    let state = state_from_coords(&w, &e, h).map_err(|e| e.to_string())?;
    let r = apply_scattering_matrix(&state, &v).map_err(|e| e.to_string())?;
    let k = &r.diagnostics.kappa;
    let mut out = vec![
        r.delta1,
        k.omega[1].atan2(k.omega[0]),
        -k.eta[0] * k.omega[1] + k.eta[1] * k.omega[0],
        r.diagnostics.t_plus + r.diagnostics.t_minus,
    ];
    for (a, x) in circle(samples) {
        out.extend([a, state.eval(&x, true).norm(), r.eval(&x, true).norm()]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = deflection)]
pub fn deflection_js(amplitude: f64, eta_max: f64, rows: usize) -> Result<Vec<f64>, JsError> {
    deflection(amplitude, eta_max, rows).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = farfield)]
pub fn farfield_js(x: f64, y: f64, angle: f64, h: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    farfield(x, y, angle, h, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scatterState)]
pub fn scatter_state_js(amplitude: f64, angle: f64, eta: f64, h: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    scatter_state(amplitude, angle, eta, h, samples).map_err(|e| JsError::new(&e))
}
