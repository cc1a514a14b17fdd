//! Gaussian states on the sphere, the resolution of identity on the circle
//! and the associated trace formula.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::dynamics::{dot, norm};
use crate::error::{Error, Result};
use crate::linalg::ComplexSymMatrix;
use crate::poly::MultiPoly;
use crate::quad::{adaptive, composite_gauss_legendre};

/// Cutoff equal to 1 on `[0, 1/2]`, 0 on `[3/4, ∞)`, with a smooth monotone
/// transition built from `e^{−1/u}`.
pub fn chi(r: f64) -> f64 {
    if r <= 0.5 {
        return 1.0;
    }
    if r >= 0.75 {
        return 0.0;
    }
    let u = (r - 0.5) * 4.0;
    let g = |v: f64| if v <= 0.0 { 0.0 } else { (-1.0 / v).exp() };
    let (a, b) = (g(u), g(1.0 - u));
    b / (a + b)
}

/// `χ̃_h(t) = e^{−t²/2h} χ(t/h^{1/3})`.
pub fn chi_tilde(t: f64, h: f64) -> f64 {
    (-t * t / (2.0 * h)).exp() * chi(t / h.cbrt())
}

/// `Q₀((x̂−ξ₀)/√h) e^{−ix₀·x̂/h} e^{−(x̂−ξ₀)·Γ₀(x̂−ξ₀)/2h}` on `S^{d−1}`,
/// optionally multiplied by the cutoff `χ(|x̂−ξ₀|/h^{1/3})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGaussianState {
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
    pub gamma0: ComplexSymMatrix,
    pub q0: MultiPoly,
    pub h: f64,
}

impl SphereGaussianState {
    pub fn new(x0: Vec<f64>, xi0: Vec<f64>, gamma0: ComplexSymMatrix, q0: MultiPoly, h: f64) -> Result<Self> {
        let d = x0.len();
        for got in [xi0.len(), gamma0.dim(), q0.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        let n = norm(&xi0);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::OffShell(n));
        }
        if !gamma0.is_validated() {
            return Err(Error::DegenerateMatrix("Γ₀ needs a positive definite real part".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
        }
        Ok(Self { x0, xi0, gamma0, q0, h })
    }

    /// Gaussian with `Γ₀ = Id` and `Q₀ ≡ 1`.
    pub fn standard(x0: Vec<f64>, xi0: Vec<f64>, h: f64) -> Result<Self> {
        let d = x0.len();
        Self::new(x0, xi0, ComplexSymMatrix::identity(d), MultiPoly::one(d), h)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn eval(&self, xhat: &[f64], cutoff: bool) -> C64 {
        let w: Vec<f64> = xhat.iter().zip(&self.xi0).map(|(a, b)| a - b).collect();
        let dist = norm(&w);
        let cut = if cutoff { chi(dist / self.h.cbrt()) } else { 1.0 };
        if cut == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let sh = self.h.sqrt();
        let y: Vec<f64> = w.iter().map(|v| v / sh).collect();
        let expo = C64::new(0.0, -dot(&self.x0, xhat) / self.h) - 0.5 * self.gamma0.quad_form(&y);
        self.q0.eval_real(&y) * expo.exp() * cut
    }

    /// Samples on the circle grid (`d = 2`).
    pub fn sample(&self, n: usize, cutoff: bool) -> Result<SphereFunction> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.dim() });
        }
        SphereFunction::from_fn(n, |th| self.eval(&[th.cos(), th.sin()], cutoff))
    }
}

/// Samples of a function on the circle at `θ_j = 2πj/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereFunction {
    pub values: Vec<C64>,
}

impl SphereFunction {
    pub const MIN_POINTS: usize = 16;

    pub fn new(values: Vec<C64>) -> Result<Self> {
        if values.len() < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "sphere grid needs at least {} points, got {}",
                Self::MIN_POINTS,
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sphere sample".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new((0..n).map(|j| f(Self::angle_of(n, j))).collect())
    }

    fn angle_of(n: usize, j: usize) -> f64 {
        2.0 * PI * j as f64 / n as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn angle(&self, j: usize) -> f64 {
        Self::angle_of(self.len(), j)
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { values: self.values.iter().map(|v| v * a).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        let dth = 2.0 * PI / self.len() as f64;
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dth).sqrt()
    }

    /// `‖self − other‖ / ‖other‖`.
    pub fn relative_error(&self, other: &Self) -> f64 {
        let diff = Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() };
        diff.l2_norm() / other.l2_norm()
    }

    /// `∫ conj(self) other dθ`.
    pub fn inner(&self, other: &Self) -> C64 {
        let dth = 2.0 * PI / self.len() as f64;
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * dth
    }
}

fn check_circle(h: f64, d: usize) -> Result<()> {
    if d != 2 {
        return Err(Error::InvalidArgument(format!(
            "the resolution of identity is implemented for d = 2 only, got d = {d}"
        )));
    }
    if !(h > 0.0 && h <= 0.5) {
        return Err(Error::InvalidArgument(format!("h must lie in (0, 0.5], got {h}")));
    }
    Ok(())
}

/// Half-width in angle of the support of `χ̃_h(|ω − ξ|)` on the circle.
fn support_angle(h: f64) -> f64 {
    2.0 * (0.375 * h.cbrt()).asin()
}

/// `c_h` with the reference direction `ω = (cos θ_ω, sin θ_ω)`:
/// `c_h⁻¹ = 2πh ∫ dξ χ̃_h²(|ω−ξ|) / |cos ∠(ω,ξ)|`.
pub fn resolution_constant_at(h: f64, theta_omega: f64) -> Result<f64> {
    check_circle(h, 2)?;
    let omega = [theta_omega.cos(), theta_omega.sin()];
    let b = support_angle(h);
    let integrand = |a: f64| {
        let xi = [a.cos(), a.sin()];
        let dist = ((omega[0] - xi[0]).powi(2) + (omega[1] - xi[1]).powi(2)).sqrt();
        chi_tilde(dist, h).powi(2) / dot(&omega, &xi).abs()
    };
    let scale = (PI * h).sqrt();
    let integral = adaptive(integrand, theta_omega - b, theta_omega + b, 1e-13 * scale);
    Ok(1.0 / (2.0 * PI * h * integral))
}

pub fn resolution_constant(h: f64, d: usize) -> Result<f64> {
    check_circle(h, d)?;
    resolution_constant_at(h, 0.0)
}

/// Leading asymptote `2^{(d−1)/2} (2πh)^{−3(d−1)/2}` of `c_h`.
pub fn resolution_constant_asymptote(h: f64, d: usize) -> f64 {
    let e = (d as f64 - 1.0) / 2.0;
    2f64.powf(e) * (2.0 * PI * h).powf(-3.0 * e)
}

/// Smallest truncation considered reliable, `X = 50h`.
pub fn min_truncation(h: f64) -> f64 {
    50.0 * h
}

/// Eigenvalues `μ_m` of the truncated frame operator on `e^{imθ}`:
/// `μ_m = c_h ∫_{−X}^{X} |F_m(s)|² ds` with
/// `F_m(s) = ∫ χ̃_h(2|sin(β/2)|) e^{is sin β/h} e^{imβ} dβ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMultipliers {
    pub h: f64,
    pub truncation: f64,
    /// Indexed like an FFT of length `n`: entry `k` is mode `m = k` for
    /// `k ≤ n/2`, `m = k − n` otherwise.
    pub mu: Vec<f64>,
}

impl FrameMultipliers {
    pub fn new(h: f64, truncation: f64, n: usize) -> Result<Self> {
        check_circle(h, 2)?;
        if !(truncation > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation must be positive, got {truncation}")));
        }
        let c_h = resolution_constant(h, 2)?;
        let half = (n / 2) as f64;
        let nb = (4.0 * (truncation / h + half + 64.0)).max(256.0) as usize;
        let nb = nb.next_power_of_two();
        let dbeta = 2.0 * PI / nb as f64;
        let support: Vec<(usize, f64, f64)> = (0..nb)
            .map(|k| {
                let b = if k <= nb / 2 { k as f64 * dbeta } else { (k as f64 - nb as f64) * dbeta };
                (k, b, chi_tilde(2.0 * (b / 2.0).sin().abs(), h))
            })
            .filter(|(_, _, v)| *v > 0.0)
            .collect();
        let beta_sup = support_angle(h);
        let panel = (h / beta_sup).min(0.5);
        let panels = (2.0 * truncation / panel).ceil() as usize;
        let nodes = composite_gauss_legendre(-truncation, truncation, panels, 8);

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(nb);
        let mut mu = vec![0.0; n];
        let mut buf = vec![C64::new(0.0, 0.0); nb];
        for (s, w) in nodes {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for &(k, b, v) in &support {
                buf[k] = C64::from_polar(v, s * b.sin() / h);
            }
            fft.process(&mut buf);
            for (k, m) in mu.iter_mut().enumerate() {
                let mode = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                let f = buf[mode.rem_euclid(nb as i64) as usize] * dbeta;
                *m += w * f.norm_sqr();
            }
        }
        mu.iter_mut().for_each(|m| *m *= c_h);
        Ok(Self { h, truncation, mu })
    }

    pub fn mode(&self, m: i64) -> f64 {
        let n = self.mu.len() as i64;
        self.mu[m.rem_euclid(n) as usize]
    }
}

/// Output of [`reconstruct`].
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub function: SphereFunction,
    pub multipliers: FrameMultipliers,
    /// Set when `X < 50h`; the `x`-integral is then far from its limit.
    pub truncation_warning: bool,
}

/// Applies the truncated frame operator
/// `c_h ∫dξ ∫_{x ⊥ ξ, |x| ≤ X} φ_{x,ξ}(ω) ⟨φ_{x,ξ}, f⟩ dx` on the circle.
///
/// The operator commutes with rotations, so it is diagonal in Fourier
/// modes; the `ξ`- and `x`-integrals are evaluated in closed form per mode
/// and `⟨φ_{x,ξ}, f⟩` by the grid rule, which is exact for band-limited `f`.
pub fn reconstruct(f: &SphereFunction, h: f64, truncation: f64) -> Result<Reconstruction> {
    let n = f.len();
    let multipliers = FrameMultipliers::new(h, truncation, n)?;
    let mut planner = FftPlanner::new();
    let mut buf = f.values.clone();
    planner.plan_fft_forward(n).process(&mut buf);
    for (z, m) in buf.iter_mut().zip(&multipliers.mu) {
        *z *= m / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(Reconstruction {
        function: SphereFunction::new(buf)?,
        truncation_warning: truncation < min_truncation(h),
        multipliers,
    })
}

/// Samples `K(θ_i, θ_j)` of an integral kernel on the circle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereKernel {
    pub n: usize,
    /// Row-major, `values[i·n + j] = K(θ_i, θ_j)`.
    pub values: Vec<C64>,
}

impl SphereKernel {
    pub fn zero(n: usize) -> Self {
        Self { n, values: vec![C64::new(0.0, 0.0); n * n] }
    }

    /// Kernel of `f ↦ ⟨g, f⟩ g / ‖g‖²`.
    pub fn projector(g: &SphereFunction) -> Self {
        let n = g.len();
        let nrm2 = g.l2_norm().powi(2);
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(g.values[i] * g.values[j].conj() / nrm2);
            }
        }
        Self { n, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { n: self.n, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    /// Grid trace `Σ K(θ_j, θ_j) dθ`.
    pub fn diagonal_trace(&self) -> C64 {
        let dth = 2.0 * PI / self.n as f64;
        (0..self.n).map(|j| self.values[j * self.n + j]).sum::<C64>() * dth
    }
}

/// `c_h ∫dξ ∫_{x ⊥ ξ, |x| ≤ X} ⟨φ_{x,ξ}, A φ_{x,ξ}⟩ dx` for the operator with
/// kernel `K`, evaluated mode by mode as `Σ_m μ_m ⟨e_m, A e_m⟩`.
pub fn trace_estimate(kernel: &SphereKernel, h: f64, truncation: f64) -> Result<C64> {
    let n = kernel.n;
    if n < SphereFunction::MIN_POINTS || kernel.values.len() != n * n {
        return Err(Error::InvalidArgument("kernel must be an n×n grid with n ≥ 16".into()));
    }
    let multipliers = FrameMultipliers::new(h, truncation, n)?;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    // rows[i][k] = Σ_j K_ij e^{−i k θ_j}
    let mut rows = kernel.values.clone();
    for row in rows.chunks_mut(n) {
        fwd.process(row);
    }
    let dth = 2.0 * PI / n as f64;
    let mut total = C64::new(0.0, 0.0);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        for i in 0..n {
            col[i] = rows[i * n + k];
        }
        inv.process(&mut col);
        // col[k] = Σ_i e^{i k θ_i} Σ_j K_ij e^{−i k θ_j}
        total += col[k] * multipliers.mu[k];
    }
    Ok(total * dth * dth / (2.0 * PI))
}
