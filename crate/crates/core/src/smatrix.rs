//! Action of the scattering matrix on Gaussian states of the sphere.
//!
//! The pipeline turns the sphere state into a packet on `R^d` whose Fourier
//! transform restricts to it, moves the packet back to where its line is
//! clear of the potential, transports it through the interaction and reads
//! off the sphere state carried by the outgoing packet.

use num_complex::Complex64 as C64;

use crate::dynamics::{
    dot, escape_trajectory, norm, scattering_map, sphere_coords, FlowOptions, PhasePoint,
    ScatteringImage, SphereCotangent,
};
use crate::error::{Error, Result};
use crate::fourier::{fourier_gaussian_poly, inverse_fourier_gaussian_poly};
use crate::linalg::ComplexSymMatrix;
use crate::packet::{transport_along, PropagateOptions, WavePacket};
use crate::potential::Potential;
use crate::sphere::SphereGaussianState;

/// Default integration tolerance of the pipeline.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Intermediate quantities of one application.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Backward free time taking the input line clear of the potential.
    pub t_minus: f64,
    /// Interacting time until the outgoing ray is clear.
    pub t_plus: f64,
    /// Outgoing packet `(x₊, ξ₊)` before sliding along its ray.
    pub plus: PhasePoint,
    /// Phase before sliding, `t₊/2 + δ₊ + x₊·ξ₊ − x₀·ξ₀`.
    pub delta_raw: f64,
    /// Slide `s` along the outgoing ray that brings `x₁·ξ₁` back to `x₀·ξ₀`.
    pub slide: f64,
    /// `(ω₁, η₁)` of the output.
    pub kappa: SphereCotangent,
    /// Disagreement between the two routes to the packet phase.
    pub action_mismatch: f64,
    /// Number of accepted integration steps.
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringResult {
    pub delta1: f64,
    pub state: SphereGaussianState,
    pub diagnostics: Diagnostics,
}

impl ScatteringResult {
    /// `e^{iδ₁/h}` times the output state at `x̂`.
    pub fn eval(&self, xhat: &[f64], cutoff: bool) -> C64 {
        C64::from_polar(1.0, self.delta1 / self.state.h) * self.state.eval(xhat, cutoff)
    }
}

/// Packet `u` on `R^d` with `F_h u = h^{d/2} e^{ix₀·ξ₀/h} φ̃` on the sphere:
/// center `x₀`, momentum `ξ₀`, matrix `Γ₀⁻¹` and polynomial the preimage of
/// `Q₀` under `P ↦ P_{Γ₀⁻¹}`.
pub fn input_packet(state: &SphereGaussianState) -> Result<WavePacket> {
    let gamma = state.gamma0.inverse()?;
    let poly = inverse_fourier_gaussian_poly(&state.q0, &gamma)?;
    WavePacket::new(state.x0.clone(), state.xi0.clone(), gamma, poly, 0.0, state.h)
}

pub fn apply_scattering_matrix(state: &SphereGaussianState, v: &dyn Potential) -> Result<ScatteringResult> {
    apply_scattering_matrix_with(state, v, DEFAULT_TOL)
}

pub fn apply_scattering_matrix_with(
    state: &SphereGaussianState,
    v: &dyn Potential,
    tol: f64,
) -> Result<ScatteringResult> {
    let d = state.dim();
    if v.dim() != d {
        return Err(Error::DimensionMismatch { expected: v.dim(), got: d });
    }
    let h = state.h;
    let u0 = input_packet(state)?;
    let traj = escape_trajectory(v, &state.x0, &state.xi0, FlowOptions::new(tol))?;
    let t_minus = v.backward_clear_time(&state.x0, &state.xi0, crate::dynamics::ESCAPE_MARGIN);
    let u_minus = u0.free_evolve(-t_minus)?;
    let u_plus = transport_along(&u_minus, &traj, v, PropagateOptions::new(tol))?;
    let t_plus = traj.end().t;
    let action = traj.action(traj.start().point.energy(v));

    // S_h(F_h u⁻) = e^{it₊/2h} F_h ũ⁺ on the sphere, F_h u⁻ = e^{it₋/2h} F_h u⁰,
    // and the phase of u⁻ already carries +t₋/2.
    let x0xi0 = dot(&state.x0, &state.xi0);
    let xpxip = dot(&u_plus.center, &u_plus.momentum);
    let delta_raw = 0.5 * t_plus - 0.5 * t_minus + u_plus.phase + xpxip - x0xi0;
    let q1 = fourier_gaussian_poly(&u_plus.poly, &u_plus.gamma)?;
    let gamma_plus = u_plus.gamma.inverse()?;

    // Slide along the outgoing ray: φ_{x+sξ, Γ+is} = e^{−is/h} φ_{x, Γ}.
    let speed = norm(&u_plus.momentum);
    let xi1: Vec<f64> = u_plus.momentum.iter().map(|k| k / speed).collect();
    let slide = x0xi0 - dot(&u_plus.center, &xi1);
    let x1: Vec<f64> = u_plus.center.iter().zip(&xi1).map(|(x, k)| x + slide * k).collect();
    let gamma1 = if slide == 0.0 { gamma_plus } else { gamma_plus.shifted(C64::new(0.0, slide))? };
    let kappa = sphere_coords(&x1, &xi1)?;
    let output = SphereGaussianState::new(x1, xi1, gamma1, q1, h)?;
    Ok(ScatteringResult {
        delta1: delta_raw + slide,
        state: output,
        diagnostics: Diagnostics {
            t_minus,
            t_plus,
            plus: u_plus.phase_point(),
            delta_raw,
            slide,
            kappa,
            action_mismatch: action.mismatch(),
            steps: traj.samples.len(),
        },
    })
}

/// Comparison of the output's `(ω₁, η₁)` with the classical scattering map.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceReport {
    pub from_state: SphereCotangent,
    pub from_flow: ScatteringImage,
    pub discrepancy: f64,
    pub passed: bool,
}

pub const CORRESPONDENCE_TOL: f64 = 1e-6;

pub fn verify_correspondence(state: &SphereGaussianState, v: &dyn Potential) -> Result<CorrespondenceReport> {
    let result = apply_scattering_matrix(state, v)?;
    let input = sphere_coords(&state.x0, &state.xi0)?;
    let image = scattering_map(v, &input.omega, &input.eta, DEFAULT_TOL)?;
    let k = result.diagnostics.kappa;
    let dw = k.omega.iter().zip(&image.omega).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let de = k.eta.iter().zip(&image.eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let discrepancy = dw + de;
    Ok(CorrespondenceReport { from_state: k, from_flow: image, discrepancy, passed: discrepancy < CORRESPONDENCE_TOL })
}

/// Sphere state with `Γ₀ = Id`, `Q₀ ≡ 1` whose line has coordinates `(ω, η)`.
pub fn state_from_coords(omega: &[f64], eta: &[f64], h: f64) -> Result<SphereGaussianState> {
    let d = omega.len();
    SphereGaussianState::new(
        eta.to_vec(),
        omega.to_vec(),
        ComplexSymMatrix::identity(d),
        crate::poly::MultiPoly::one(d),
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::poly::MultiPoly;
    use crate::potential::BumpPotential;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn state() -> SphereGaussianState {
        let g = ComplexSymMatrix::new(CMatrix::from_row_slice(2, 2, &[c(1.2, 0.3), c(0.1, 0.0), c(0.1, 0.0), c(0.7, -0.2)])).unwrap();
        let q = MultiPoly::from_terms(2, [(vec![0, 0], c(1.0, 0.0)), (vec![1, 0], c(0.0, 0.5)), (vec![0, 2], c(0.2, 0.0))]).unwrap();
        SphereGaussianState::new(vec![-0.5, 0.3], vec![0.8, 0.6], g, q, 0.05).unwrap()
    }

    #[test]
    fn input_packet_restricts_to_state() {
        let s = state();
        let u = input_packet(&s).unwrap();
        let pre = C64::from_polar(s.h, dot(&s.x0, &s.xi0) / s.h);
        for a in [0.5, 0.64, 0.7, 0.9] {
            let xh = [f64::cos(a), f64::sin(a)];
            let lhs = u.fourier_h(&xh).unwrap();
            let rhs = pre * s.eval(&xh, false);
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn free_potential_is_identity() {
        let s = state();
        let r = apply_scattering_matrix(&s, &BumpPotential::zero(2)).unwrap();
        assert_eq!(r.delta1, 0.0);
        assert_eq!((r.state.x0.clone(), r.state.xi0.clone()), (s.x0.clone(), s.xi0.clone()));
        assert!(r.state.gamma0.max_abs_diff(&s.gamma0) < 1e-14);
        assert!(r.state.q0.max_coeff_diff(&s.q0) < 1e-13);
    }
}
