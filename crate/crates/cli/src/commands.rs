use std::f64::consts::PI;

use gsmatrix::dynamics::scattering_map;
use gsmatrix::linalg::ComplexSymMatrix;
use gsmatrix::oracle::{
    assemble_generalized_eigenfunction, solve, write_snapshot, EigenfunctionSpec, GridWavefunction,
};
use gsmatrix::packet::{farfield_future, farfield_past, propagate, PropagateOptions, SphereProfile, WavePacket};
use gsmatrix::potential::BumpPotential;
use gsmatrix::smatrix::{apply_scattering_matrix_with, state_from_coords, verify_correspondence};
use gsmatrix::sphere::{
    reconstruct, resolution_constant, resolution_constant_asymptote, SphereFunction, SphereGaussianState,
};
use gsmatrix::{Error, MultiPoly};
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{to_json_string, Sink, Table};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for bad input, 3 when the computation itself breaks down, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 1,
            RunError::Model(e) => match e {
                Error::DegenerateMatrix(_)
                | Error::DegreeCapExceeded { .. }
                | Error::DimensionMismatch { .. }
                | Error::NonPositiveRadius(_)
                | Error::NotOrthogonal(_)
                | Error::NotUnit(_)
                | Error::OffShell(_)
                | Error::UnsupportedOrder(_)
                | Error::InvalidArgument(_) => 2,
                Error::SingularOnPath { .. }
                | Error::AmbiguousBranch { .. }
                | Error::StepFailure { .. }
                | Error::TrappedTrajectory(_)
                | Error::ActionMismatch(_)
                | Error::CausticError(_)
                | Error::BoxTooSmall(_)
                | Error::Multimodal(_) => 3,
            },
        }
    }

    pub fn kind(&self) -> String {
        match self {
            RunError::Config(_) => "InvalidConfig".into(),
            RunError::Io(_) => "Io".into(),
            RunError::Model(e) => {
                let dbg = format!("{e:?}");
                dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_owned()
            }
        }
    }
}

type Run = Result<Value, RunError>;

fn matrix_json(m: &ComplexSymMatrix) -> Value {
    let d = m.dim();
    let part = |f: fn(C64) -> f64| -> Vec<Vec<f64>> { (0..d).map(|i| (0..d).map(|j| f(m.get(i, j))).collect()).collect() };
    json!({ "re": part(|z| z.re), "im": part(|z| z.im) })
}

fn poly_json(p: &MultiPoly) -> Value {
    Value::Array(p.terms().map(|(a, c)| json!({ "exponent": a.0, "re": c.re, "im": c.im })).collect())
}

fn packet_json(p: &WavePacket) -> Value {
    json!({
        "center": p.center,
        "momentum": p.momentum,
        "gamma": matrix_json(&p.gamma),
        "poly": poly_json(&p.poly),
        "phase": p.phase,
        "h": p.h,
    })
}

fn header(cfg: &ExperimentConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config_hash".into(), json!(cfg.hash()));
    m
}

fn finish(cfg: &ExperimentConfig, sink: &mut Sink, command: &str, body: Value) -> Run {
    let mut doc = header(cfg, command);
    if let Value::Object(b) = body {
        doc.extend(b);
    }
    let mut files = sink.written.clone();
    files.push(format!("{command}.json"));
    doc.insert("files".into(), json!(files));
    let doc = Value::Object(doc);
    sink.write(&format!("{command}.json"), to_json_string(&doc).expect("json").as_bytes())?;
    Ok(doc)
}

fn unit_perp(omega: &[f64]) -> Vec<f64> {
    match omega.len() {
        2 => vec![-omega[1], omega[0]],
        _ => {
            // Any unit vector orthogonal to ω.
            let pick = if omega[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
            let dot: f64 = pick.iter().zip(omega).map(|(a, b)| a * b).sum();
            let v: Vec<f64> = pick.iter().zip(omega).map(|(a, b)| a - dot * b).collect();
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            v.iter().map(|c| c / n).collect()
        }
    }
}

fn direction(cfg: &ExperimentConfig, angle: f64) -> Result<Vec<f64>, RunError> {
    match cfg.dim {
        2 => Ok(vec![angle.cos(), angle.sin()]),
        3 => Ok(vec![angle.cos(), angle.sin(), 0.0]),
        d => Err(ConfigError::Invalid(format!("this command needs dim 2 or 3, got {d}")).into()),
    }
}

pub fn scatmap(cfg: &ExperimentConfig, sink: &mut Sink) -> Run {
    let v = cfg.potential()?;
    let omega = direction(cfg, cfg.scatmap.omega_angle)?;
    let perp = unit_perp(&omega);
    let rows = cfg.scatmap.rows;
    let eta_max = cfg.scatmap.eta_max;
    let etas: Vec<f64> = (0..rows)
        .map(|j| if rows == 1 { 0.0 } else { -eta_max + 2.0 * eta_max * j as f64 / (rows - 1) as f64 })
        .collect();
    let images = etas
        .par_iter()
        .map(|&s| {
            let eta: Vec<f64> = perp.iter().map(|p| s * p).collect();
            scattering_map(&v, &omega, &eta, cfg.integrator.tol)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hash = cfg.hash();
    let mut table = Table::new(&hash, &["eta", "omega_angle", "eta_prime", "time_delay"]);
    let mut max_deflection: f64 = 0.0;
    for (s, im) in etas.iter().zip(&images) {
        let w = &im.omega;
        let cos_defl: f64 = w.iter().zip(&omega).map(|(a, b)| a * b).sum();
        let defl = cos_defl.clamp(-1.0, 1.0).acos();
        max_deflection = max_deflection.max(defl);
        let (angle, eta_prime) = if cfg.dim == 2 {
            (w[1].atan2(w[0]), -im.eta[0] * w[1] + im.eta[1] * w[0])
        } else {
            (defl, im.eta.iter().map(|c| c * c).sum::<f64>().sqrt())
        };
        table.row(&[*s, angle, eta_prime, im.time_delay]);
    }
    sink.table("scatmap.csv", table)?;
    finish(cfg, sink, "scatmap", json!({ "rows": rows, "omega": omega, "max_deflection": max_deflection }))
}

pub fn propagate_cmd(cfg: &ExperimentConfig, sink: &mut Sink) -> Run {
    let v = cfg.potential()?;
    let t = cfg.propagate.t;
    let runs = cfg
        .h
        .par_iter()
        .map(|&h| {
            let p = cfg.packet(h)?;
            let q = propagate(&p, t, &v, PropagateOptions::new(cfg.integrator.tol))?;
            Ok(json!({ "h": h, "t": t, "packet": packet_json(&q) }))
        })
        .collect::<Result<Vec<Value>, Error>>()?;
    finish(cfg, sink, "propagate", json!({ "runs": runs }))
}

/// Points on the great circle through `ξ0` and a fixed orthogonal direction.
fn circle_points(xi: &[f64], n: usize) -> Vec<(f64, Vec<f64>)> {
    let perp = unit_perp(xi);
    (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            (a, xi.iter().zip(&perp).map(|(x, p)| a.cos() * x + a.sin() * p).collect())
        })
        .collect()
}

pub fn farfield(cfg: &ExperimentConfig, sink: &mut Sink) -> Run {
    direction(cfg, 0.0)?;
    let hash = cfg.hash();
    let mut table = Table::new(&hash, &["h", "angle", "future_re", "future_im", "past_re", "past_im"]);
    let mut runs = Vec::new();
    for &h in &cfg.h {
        let p = cfg.packet(h)?;
        let fut = farfield_future(&p, 0.0)?;
        let past = farfield_past(&p, 0.0)?;
        for (a, x) in circle_points(&p.momentum, cfg.farfield.samples) {
            let (f, b) = (fut.eval(&x), past.eval(&x));
            table.row(&[h, a, f.re, f.im, b.re, b.im]);
        }
        let describe = |s: &SphereProfile| {
            json!({
                "peak": s.peak,
                "matrix": matrix_json(&s.matrix),
                "prefactor": [s.prefactor.re, s.prefactor.im],
                "poly": poly_json(&s.poly),
            })
        };
        runs.push(json!({ "h": h, "future": describe(&fut), "past": describe(&past) }));
    }
    sink.table("farfield.csv", table)?;
    finish(cfg, sink, "farfield", json!({ "runs": runs, "samples": cfg.farfield.samples }))
}

/// Quasi-uniform points on the sphere: the circle grid for `d = 2`, a
/// Fibonacci lattice for `d = 3`.
fn sphere_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        2 => (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).map(|a| vec![a.cos(), a.sin()]).collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
    }
}

fn max_deviation(state: &SphereGaussianState, out: &gsmatrix::smatrix::ScatteringResult, n: usize) -> f64 {
    sphere_grid(state.dim(), n)
        .iter()
        .map(|x| (out.eval(x, true) - state.eval(x, true)).norm())
        .fold(0.0, f64::max)
}

pub fn smatrix(cfg: &ExperimentConfig, sink: &mut Sink) -> Run {
    direction(cfg, 0.0)?;
    let v = cfg.potential()?;
    let free = v.bumps().is_empty();
    let runs = cfg
        .h
        .par_iter()
        .map(|&h| {
            let s = cfg.sphere_state(h)?;
            let r = apply_scattering_matrix_with(&s, &v, cfg.integrator.tol)?;
            let dg = &r.diagnostics;
            let mut run = json!({
                "h": h,
                "delta1": r.delta1,
                "x1": r.state.x0,
                "xi1": r.state.xi0,
                "gamma1": matrix_json(&r.state.gamma0),
                "q1": poly_json(&r.state.q0),
                "kappa": { "omega": dg.kappa.omega, "eta": dg.kappa.eta },
                "diagnostics": {
                    "t_minus": dg.t_minus,
                    "t_plus": dg.t_plus,
                    "delta_raw": dg.delta_raw,
                    "slide": dg.slide,
                    "action_mismatch": dg.action_mismatch,
                    "steps": dg.steps,
                },
                "max_deviation_from_input": max_deviation(&s, &r, cfg.smatrix.grid),
            });
            if free {
                run["identity"] = json!({
                    "gamma_diff": r.state.gamma0.max_abs_diff(&s.gamma0),
                    "q_diff": r.state.q0.max_coeff_diff(&s.q0),
                    "delta1": r.delta1,
                });
            }
            Ok(run)
        })
        .collect::<Result<Vec<Value>, Error>>()?;

    // Classical correspondence on seeded random inputs.
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.smatrix.random_inputs)
        .map(|_| {
            let omega = direction(cfg, rng.gen_range(0.0..2.0 * PI)).expect("dimension checked");
            let perp = unit_perp(&omega);
            let s: f64 = rng.gen_range(-0.9..0.9);
            (omega, perp.iter().take(d).map(|p| s * p).collect())
        })
        .collect();
    let h0 = cfg.h[0];
    let reports = inputs
        .par_iter()
        .map(|(w, e)| verify_correspondence(&state_from_coords(w, e, h0)?, &v))
        .collect::<Result<Vec<_>, Error>>()?;
    let worst = reports.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let correspondence = json!({
        "inputs": reports.len(),
        "seed": cfg.seed,
        "max_discrepancy": worst,
        "passed": reports.iter().all(|r| r.passed),
    });
    finish(cfg, sink, "smatrix", json!({ "runs": runs, "correspondence": correspondence }))
}

pub fn resolve(cfg: &ExperimentConfig, sink: &mut Sink) -> Run {
    let n = cfg.resolve.samples;
    let x = cfg.resolve.truncation;
    let hash = cfg.hash();
    let mut table = Table::new(&hash, &["h", "c_h", "asymptote_ratio", "err_one", "err_mode3", "err_state"]);
    let one = SphereFunction::from_fn(n, |_| C64::new(1.0, 0.0))?;
    let three = SphereFunction::from_fn(n, |t| C64::from_polar(1.0, 3.0 * t))?;
    let mut runs = Vec::new();
    for &h in &cfg.h {
        let c = resolution_constant(h, cfg.dim)?;
        let ratio = c / resolution_constant_asymptote(h, cfg.dim);
        let state = cfg.sphere_state(h)?.sample(n, false)?;
        let mut errs = Vec::new();
        let mut warning = false;
        for f in [&one, &three, &state] {
            let r = reconstruct(f, h, x)?;
            warning |= r.truncation_warning;
            errs.push(r.function.relative_error(f));
        }
        table.row(&[h, c, ratio, errs[0], errs[1], errs[2]]);
        runs.push(json!({
            "h": h,
            "c_h": c,
            "asymptote_ratio": ratio,
            "reconstruction_errors": { "one": errs[0], "mode3": errs[1], "state": errs[2] },
            "truncation_warning": warning,
        }));
    }
    sink.table("resolve.csv", table)?;
    finish(cfg, sink, "resolve", json!({ "runs": runs, "samples": n, "truncation": x }))
}

fn ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[0] / w[1]).collect()
}

pub fn oracle_compare(cfg: &ExperimentConfig, grid_n: Option<usize>, sink: &mut Sink) -> Run {
    let o = &cfg.oracle;
    let v = cfg.oracle_potential()?;
    let grid = cfg.oracle_grid(grid_n.unwrap_or(o.n), o.half_width)?;
    let results = cfg
        .h
        .par_iter()
        .map(|&h| {
            let p = cfg.oracle_packet(o.center, h)?;
            let u0 = GridWavefunction::from_packet(grid, &p)?;
            let exact = solve(&u0, &v, o.t, o.dt_over_h * h)?;
            let q = propagate(&p, o.t, &v, PropagateOptions::new(cfg.integrator.tol))?;
            let approx = GridWavefunction::from_packet(grid, &q)?;
            Ok((h, exact.distance(&approx) / u0.norm(), exact))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let hash = cfg.hash();
    let mut table = Table::new(&hash, &["h", "l2_error", "boundary_mass"]);
    for (k, (h, err, u)) in results.iter().enumerate() {
        table.row(&[*h, *err, u.boundary_mass_fraction()]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, u, o.t)?;
        sink.write(&format!("oracle_snapshot_{k}.bin"), &buf)?;
    }
    sink.table("oracle-compare.csv", table)?;
    let errors: Vec<f64> = results.iter().map(|r| r.1).collect();
    finish(
        cfg,
        sink,
        "oracle-compare",
        json!({
            "h": cfg.h,
            "l2_errors": errors,
            "ratios": ratios(&errors),
            "grid": { "n": grid.n, "half_width": grid.half_width },
        }),
    )
}

pub fn eigenfun(cfg: &ExperimentConfig, grid_n: Option<usize>, sink: &mut Sink) -> Run {
    let e = &cfg.eigenfun;
    let v: BumpPotential = cfg.oracle_potential()?;
    let grid = cfg.oracle_grid(grid_n.unwrap_or(e.n), e.half_width)?;
    let results = cfg
        .h
        .par_iter()
        .map(|&h| {
            let spec = EigenfunctionSpec {
                window: e.window,
                dt: e.dt_over_h * h,
                t_back: e.t_back,
                t_forward: e.t_forward,
                taper: e.taper,
                margin: e.margin,
                probes: e.probes.iter().map(|&p| vec![p]).collect(),
                tol: cfg.integrator.tol,
                ..EigenfunctionSpec::new(grid, h)
            };
            assemble_generalized_eigenfunction(&cfg.oracle_packet(e.center, h)?, &v, &spec).map(|r| (h, r))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let hash = cfg.hash();
    let mut table = Table::new(&hash, &["h", "residual", "scaled_residual", "propagation_error", "t_plus"]);
    let mut runs = Vec::new();
    for (k, (h, r)) in results.iter().enumerate() {
        table.row(&[*h, r.residual, r.scaled_residual, r.propagation_error, r.t_plus]);
        let mut field = Table::new(&hash, &["x", "re", "im"]);
        for (i, z) in r.field.values.iter().enumerate() {
            field.row(&[r.field.point(i)[0], z.re, z.im]);
        }
        sink.table(&format!("eigenfun_field_{k}.csv"), field)?;
        let probes: Vec<Value> = r.probes.iter().map(|(x, z)| json!({ "x": x, "re": z.re, "im": z.im })).collect();
        runs.push(json!({
            "h": h,
            "residual": r.residual,
            "scaled_residual": r.scaled_residual,
            "propagation_error": r.propagation_error,
            "t_plus": r.t_plus,
            "probes": probes,
        }));
    }
    sink.table("eigenfun.csv", table)?;
    let scaled: Vec<f64> = results.iter().map(|r| r.1.scaled_residual).collect();
    let raw: Vec<f64> = results.iter().map(|r| r.1.residual).collect();
    finish(
        cfg,
        sink,
        "eigenfun",
        json!({ "runs": runs, "scaled_ratios": ratios(&scaled), "raw_ratios": ratios(&raw) }),
    )
}
