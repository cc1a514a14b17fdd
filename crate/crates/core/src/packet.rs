//! Gaussian wave packets: free evolution, leading-order propagation through
//! a potential and far-field profiles.
//!
//! A packet with center `c`, momentum `ξ`, matrix `Γ`, polynomial `P` and
//! phase `φ` is
//!
//! ```text
//! u(x) = e^{iφ/h} P((x−c)/√h) e^{ix·ξ/h} e^{−(x−c)·Γ(x−c)/2h}.
//! ```

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C64;

use crate::dynamics::{
    self, check_action, dot, integrate_trajectory, FlowOptions, PhasePoint, Trajectory,
    TrajectorySample, VariationalFrame,
};
use crate::error::{Error, Result};
use crate::fourier::fourier_gaussian_poly;
use crate::linalg::{to_complex, CMatrix, ComplexSymMatrix, SINGULAR_DET};
use crate::poly::{MultiIndex, MultiPoly};
use crate::potential::Potential;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
    pub gamma: ComplexSymMatrix,
    pub poly: MultiPoly,
    pub phase: f64,
    pub h: f64,
}

impl WavePacket {
    pub fn new(
        center: Vec<f64>,
        momentum: Vec<f64>,
        gamma: ComplexSymMatrix,
        poly: MultiPoly,
        phase: f64,
        h: f64,
    ) -> Result<Self> {
        let d = center.len();
        for got in [momentum.len(), gamma.dim(), poly.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        if !gamma.is_validated() {
            return Err(Error::DegenerateMatrix("packet matrix needs a positive definite real part".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
        }
        Ok(Self { center, momentum, gamma, poly, phase, h })
    }

    /// Plain Gaussian with `P ≡ 1` and zero phase.
    pub fn gaussian(center: Vec<f64>, momentum: Vec<f64>, gamma: ComplexSymMatrix, h: f64) -> Result<Self> {
        let d = center.len();
        Self::new(center, momentum, gamma, MultiPoly::one(d), 0.0, h)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let sh = self.h.sqrt();
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| (a - c) / sh).collect();
        let expo = I * (self.phase + dot(x, &self.momentum)) / self.h - 0.5 * self.gamma.quad_form(&y);
        self.poly.eval_real(&y) * expo.exp()
    }

    /// Squared `L²` norm, `h^{d/2} (|P|²)_{2 Re Γ}(0)`.
    pub fn norm_sqr(&self) -> Result<f64> {
        let d = self.dim();
        let abs2 = &self.poly * &self.poly.conj();
        let re2 = ComplexSymMatrix::from_real(&(self.gamma.real_part() * 2.0))?;
        let v = fourier_gaussian_poly(&abs2, &re2)?.eval_real(&vec![0.0; d]);
        Ok(self.h.powf(d as f64 / 2.0) * v.re)
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.norm_sqr()?.sqrt())
    }

    /// Semiclassical Fourier transform `∫ e^{−ix·ζ/h} u(x) dx`.
    pub fn fourier_h(&self, zeta: &[f64]) -> Result<C64> {
        let d = self.dim();
        let sh = self.h.sqrt();
        let pg = fourier_gaussian_poly(&self.poly, &self.gamma)?;
        let ginv = self.gamma.inverse()?;
        let w: Vec<f64> = zeta.iter().zip(&self.momentum).map(|(z, k)| z - k).collect();
        let y: Vec<f64> = w.iter().map(|v| v / sh).collect();
        let expo = I * (self.phase - dot(&self.center, &w)) / self.h - 0.5 * ginv.quad_form(&y);
        Ok(pg.eval_real(&y) * expo.exp() * self.h.powf(d as f64 / 2.0))
    }

    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint { x: self.center.clone(), xi: self.momentum.clone() }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Exact free evolution `e^{ithΔ/2} u`.
    pub fn free_evolve(&self, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Ok(self.clone());
        }
        let d = self.dim();
        let ginv_t = self.gamma.inverse()?.shifted(C64::new(0.0, t))?;
        let pg = fourier_gaussian_poly(&self.poly, &self.gamma)?;
        let poly = fourier_gaussian_poly(&pg, &ginv_t)?
            .reflect()
            .scale(C64::new((2.0 * PI).powi(-(d as i32)), 0.0));
        let speed2 = dot(&self.momentum, &self.momentum);
        Ok(Self {
            center: self.center.iter().zip(&self.momentum).map(|(c, k)| c + t * k).collect(),
            momentum: self.momentum.clone(),
            gamma: ginv_t.inverse()?,
            poly,
            phase: self.phase - 0.5 * t * speed2,
            h: self.h,
        })
    }

    /// Largest field-wise difference to another packet (phases compared mod 2πh).
    pub fn max_field_diff(&self, other: &Self) -> f64 {
        let dc = self
            .center
            .iter()
            .zip(&other.center)
            .chain(self.momentum.iter().zip(&other.momentum))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let dphase = C64::from_polar(1.0, (self.phase - other.phase) / self.h).arg().abs() * self.h;
        dc.max(self.gamma.max_abs_diff(&other.gamma))
            .max(self.poly.max_coeff_diff(&other.poly))
            .max(dphase)
    }
}

/// `Z = Dxx + i Dxξ Γ`.
fn amplitude_matrix(gamma: &ComplexSymMatrix, frame: &VariationalFrame) -> CMatrix {
    to_complex(&frame.dxx) + to_complex(&frame.dxxi) * gamma.as_matrix() * I
}

/// `Γ_t = −i (Dξx + i Dξξ Γ)(Dxx + i Dxξ Γ)⁻¹`.
pub fn gamma_transport(gamma: &ComplexSymMatrix, frame: &VariationalFrame) -> Result<ComplexSymMatrix> {
    let z = amplitude_matrix(gamma, frame);
    let det = z.determinant();
    if det.norm() < 1e-12 {
        return Err(Error::CausticError(det.norm()));
    }
    let zinv = z.try_inverse().ok_or(Error::CausticError(det.norm()))?;
    let w = to_complex(&frame.dxix) + to_complex(&frame.dxixi) * gamma.as_matrix() * I;
    ComplexSymMatrix::new((w * zinv) * (-I))
}

/// Polynomial part of the metaplectic image: `P(Y)[1]` where `Y` is the
/// transported position operator acting on `q ↦ q·e^{−y·Γ_t y/2}`,
/// `Y_j q = ((Dξξᵀ − i Dxξᵀ Γ_t) y)_j q + i (Dxξᵀ ∇q)_j`. No amplitude factor.
pub fn transport_poly_shape(p: &MultiPoly, gamma_t: &ComplexSymMatrix, frame: &VariationalFrame) -> MultiPoly {
    let d = p.dim();
    let lin = to_complex(&frame.dxixi.transpose()) - to_complex(&frame.dxxi.transpose()) * gamma_t.as_matrix() * I;
    let bt = frame.dxxi.transpose();
    let forms: Vec<MultiPoly> = (0..d)
        .map(|j| {
            let mut f = MultiPoly::zero(d);
            for k in 0..d {
                f.add_term(MultiIndex::unit(d, k), lin[(j, k)]);
            }
            f
        })
        .collect();
    let apply = |q: &MultiPoly, j: usize| -> MultiPoly {
        let mut out = &forms[j] * q;
        for k in 0..d {
            if bt[(j, k)] != 0.0 {
                out = &out + &q.derivative(k).scale(I * bt[(j, k)]);
            }
        }
        out
    };
    let mut cache: HashMap<MultiIndex, MultiPoly> = HashMap::new();
    cache.insert(MultiIndex::zero(d), MultiPoly::one(d));
    fn image(
        alpha: &MultiIndex,
        cache: &mut HashMap<MultiIndex, MultiPoly>,
        apply: &dyn Fn(&MultiPoly, usize) -> MultiPoly,
    ) -> MultiPoly {
        if let Some(p) = cache.get(alpha) {
            return p.clone();
        }
        let j = alpha.0.iter().position(|&a| a > 0).expect("nonzero index");
        let mut lower = alpha.clone();
        lower.0[j] -= 1;
        let prev = image(&lower, cache, apply);
        let out = apply(&prev, j);
        cache.insert(alpha.clone(), out.clone());
        out
    }
    let mut out = MultiPoly::zero(d);
    for (alpha, c) in p.terms() {
        out = &out + &image(alpha, &mut cache, &apply).scale(*c);
    }
    out
}

/// Leading transported polynomial `π₀ = det(Z)^{−1/2} P(Y)[1]` where the
/// square root is taken with the principal branch of `det Z`. Along a
/// trajectory use [`propagate`], which follows the branch continuously.
pub fn leading_poly_transport(
    p: &MultiPoly,
    gamma: &ComplexSymMatrix,
    frame: &VariationalFrame,
) -> Result<MultiPoly> {
    let gt = gamma_transport(gamma, frame)?;
    let det = amplitude_matrix(gamma, frame).determinant();
    Ok(transport_poly_shape(p, &gt, frame).scale(det.sqrt().inv()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagateOptions {
    pub tol: f64,
    /// Semiclassical order; only `0` is available.
    pub order: usize,
}

impl PropagateOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, order: 0 }
    }
}

/// Continuous `arg det Z(t)` along a trajectory, refining any interval
/// across which the argument moves by π/4 or more.
pub fn amplitude_argument(
    v: &dyn Potential,
    gamma: &ComplexSymMatrix,
    traj: &Trajectory,
    tol: f64,
) -> Result<f64> {
    fn det_at(gamma: &ComplexSymMatrix, frame: &VariationalFrame, t: f64) -> Result<C64> {
        let det = amplitude_matrix(gamma, frame).determinant();
        if det.norm() < SINGULAR_DET {
            return Err(Error::SingularOnPath { at: t, modulus: det.norm() });
        }
        Ok(det)
    }

    fn frame_after(v: &dyn Potential, s: &TrajectorySample, dt: f64, tol: f64) -> Result<VariationalFrame> {
        let local = integrate_trajectory(v, &s.point, dt, FlowOptions::new(tol), |_| false)?;
        Ok(local.end().frame.compose(&s.frame))
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        v: &dyn Potential,
        gamma: &ComplexSymMatrix,
        base: &TrajectorySample,
        (t0, d0): (f64, C64),
        (t1, d1): (f64, C64),
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let jump = (d1 / d0).arg();
        if jump.abs() < FRAC_PI_4 {
            return Ok(jump);
        }
        if depth >= 30 {
            if jump.abs() >= FRAC_PI_2 {
                return Err(Error::AmbiguousBranch { at: t1, jump: jump.abs() });
            }
            return Ok(jump);
        }
        let tm = 0.5 * (t0 + t1);
        let dm = det_at(gamma, &frame_after(v, base, tm - base.t, tol)?, tm)?;
        Ok(refine(v, gamma, base, (t0, d0), (tm, dm), tol, depth + 1)?
            + refine(v, gamma, base, (tm, dm), (t1, d1), tol, depth + 1)?)
    }

    let first = traj.start();
    let mut prev = det_at(gamma, &first.frame, first.t)?;
    let mut arg = prev.arg();
    for w in traj.samples.windows(2) {
        let next = det_at(gamma, &w[1].frame, w[1].t)?;
        arg += refine(v, gamma, &w[0], (w[0].t, prev), (w[1].t, next), tol, 0)?;
        prev = next;
    }
    Ok(arg)
}

/// Transports `packet` along a trajectory that starts at its phase point.
pub fn transport_along(
    packet: &WavePacket,
    traj: &Trajectory,
    v: &dyn Potential,
    opts: PropagateOptions,
) -> Result<WavePacket> {
    if opts.order != 0 {
        return Err(Error::UnsupportedOrder(opts.order));
    }
    let start = traj.start();
    let end = traj.end();
    if start.point.distance(&packet.phase_point()) > 0.0 {
        return Err(Error::InvalidArgument("trajectory does not start at the packet".into()));
    }
    let frame = &end.frame;
    let gamma_t = gamma_transport(&packet.gamma, frame)?;
    let det = amplitude_matrix(&packet.gamma, frame).determinant();
    let arg = amplitude_argument(v, &packet.gamma, traj, opts.tol)?;
    let amp = C64::from_polar(det.norm().powf(-0.5), -0.5 * arg);
    let poly = transport_poly_shape(&packet.poly, &gamma_t, frame).scale(amp);
    let action = traj.action(start.point.energy(v));
    check_action(&action, opts.tol, end.t - start.t)?;
    Ok(WavePacket {
        center: end.point.x.clone(),
        momentum: end.point.xi.clone(),
        gamma: gamma_t,
        poly,
        phase: packet.phase + action.packet,
        h: packet.h,
    })
}

/// Leading-order propagation of `packet` through `v` over time `t`.
pub fn propagate(packet: &WavePacket, t: f64, v: &dyn Potential, opts: PropagateOptions) -> Result<WavePacket> {
    if opts.order != 0 {
        return Err(Error::UnsupportedOrder(opts.order));
    }
    let traj = integrate_trajectory(v, &packet.phase_point(), t, FlowOptions::new(opts.tol), |_| false)?;
    transport_along(packet, &traj, v, opts)
}

/// Function on the sphere
/// `x̂ ↦ prefactor · P((x̂−ξ*)/√h) e^{−(i/h) x*·(x̂−ξ*)} e^{−(x̂−ξ*)·M(x̂−ξ*)/2h}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereProfile {
    pub peak: Vec<f64>,
    pub poly: MultiPoly,
    pub linear_phase: Vec<f64>,
    pub matrix: ComplexSymMatrix,
    pub prefactor: C64,
    pub h: f64,
}

impl SphereProfile {
    pub fn eval(&self, xhat: &[f64]) -> C64 {
        let sh = self.h.sqrt();
        let w: Vec<f64> = xhat.iter().zip(&self.peak).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = w.iter().map(|v| v / sh).collect();
        let expo = -I * dot(&self.linear_phase, &w) / self.h - 0.5 * self.matrix.quad_form(&y);
        self.prefactor * self.poly.eval_real(&y) * expo.exp()
    }
}

fn check_shell(packet: &WavePacket) -> Result<()> {
    let n = dynamics::norm(&packet.momentum);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::OffShell(n));
    }
    Ok(())
}

fn radiation_constant(d: usize, h: f64, sign: f64) -> C64 {
    let df = d as f64;
    C64::from_polar((2.0 * PI * h).sqrt() * (2.0 * PI).powf(-df / 2.0), sign * PI * (df - 1.0) / 4.0)
}

/// Outgoing profile `lim |x|^{(d−1)/2} e^{−i|x|/h} ∫_T^∞ e^{ithΔ/2}u e^{it/2h} dt`.
/// The limit does not depend on `T`.
pub fn farfield_future(packet: &WavePacket, _t: f64) -> Result<SphereProfile> {
    check_shell(packet)?;
    let pg = fourier_gaussian_poly(&packet.poly, &packet.gamma)?;
    let pre = radiation_constant(packet.dim(), packet.h, -1.0) * C64::from_polar(1.0, packet.phase / packet.h);
    Ok(SphereProfile {
        peak: packet.momentum.clone(),
        poly: pg,
        linear_phase: packet.center.clone(),
        matrix: packet.gamma.inverse()?,
        prefactor: pre,
        h: packet.h,
    })
}

/// Incoming profile `lim |x|^{(d−1)/2} e^{+i|x|/h} ∫_{−∞}^T e^{ithΔ/2}u e^{it/2h} dt`,
/// peaked at `−ξ`.
pub fn farfield_past(packet: &WavePacket, _t: f64) -> Result<SphereProfile> {
    check_shell(packet)?;
    let pg = fourier_gaussian_poly(&packet.poly, &packet.gamma)?;
    let pre = radiation_constant(packet.dim(), packet.h, 1.0) * C64::from_polar(1.0, packet.phase / packet.h);
    Ok(SphereProfile {
        peak: packet.momentum.iter().map(|k| -k).collect(),
        poly: pg.reflect(),
        linear_phase: packet.center.iter().map(|c| -c).collect(),
        matrix: packet.gamma.inverse()?,
        prefactor: pre,
        h: packet.h,
    })
}
