//! Fourier calculus of polynomial-times-Gaussian functions.
//!
//! With `F f(ξ) = ∫ e^{−ix·ξ} f(x) dx`, every `P(x) e^{−x·Γx/2}` has a
//! transform of the same shape, `P_Γ(ξ) e^{−ξ·Γ⁻¹ξ/2}`. The polynomial `P_Γ`
//! is computed exactly from `F(x_j f) = i ∂_{ξ_j} F(f)`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::ComplexSymMatrix;
use crate::poly::{MultiIndex, MultiPoly};

pub const DEFAULT_DEGREE_CAP: usize = 16;

/// `(2π)^{d/2} / √det Γ`, the transform of `e^{−x·Γx/2}` at the origin.
pub fn gaussian_constant(gamma: &ComplexSymMatrix) -> Result<C64> {
    let d = gamma.dim() as i32;
    Ok(C64::new((2.0 * PI).powf(d as f64 / 2.0), 0.0) / gamma.sqrt_det()?)
}

/// Images `T^α[1]` of the monomials, where `T_j q = i(∂_j q − (Γ⁻¹ξ)_j q)` is
/// the action of multiplication by `x_j` on the Fourier side.
struct MonomialImages {
    dim: usize,
    binv: Vec<MultiPoly>,
    cache: HashMap<MultiIndex, MultiPoly>,
}

impl MonomialImages {
    fn new(gamma: &ComplexSymMatrix) -> Result<Self> {
        let d = gamma.dim();
        let b = gamma.inverse()?;
        // (Γ⁻¹ξ)_j as linear forms.
        let binv = (0..d)
            .map(|j| {
                let mut f = MultiPoly::zero(d);
                for k in 0..d {
                    f.add_term(MultiIndex::unit(d, k), b.get(j, k));
                }
                f
            })
            .collect();
        let mut cache = HashMap::new();
        cache.insert(MultiIndex::zero(d), MultiPoly::one(d));
        Ok(Self { dim: d, binv, cache })
    }

    fn apply_t(&self, q: &MultiPoly, j: usize) -> MultiPoly {
        let i = C64::new(0.0, 1.0);
        (&q.derivative(j) - &(&self.binv[j] * q)).scale(i)
    }

    fn image(&mut self, alpha: &MultiIndex) -> MultiPoly {
        if let Some(p) = self.cache.get(alpha) {
            return p.clone();
        }
        let j = alpha.0.iter().position(|&a| a > 0).expect("nonzero index");
        let mut lower = alpha.clone();
        lower.0[j] -= 1;
        let prev = self.image(&lower);
        let out = self.apply_t(&prev, j);
        self.cache.insert(alpha.clone(), out.clone());
        out
    }

    fn transform(&mut self, p: &MultiPoly, c0: C64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dim);
        for (alpha, c) in p.terms() {
            out = &out + &self.image(alpha).scale(c * c0);
        }
        out
    }
}

fn check_inputs(p: &MultiPoly, gamma: &ComplexSymMatrix, cap: usize) -> Result<()> {
    if p.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), got: p.dim() });
    }
    if !gamma.is_validated() {
        return Err(Error::DegenerateMatrix("real part is not positive definite".into()));
    }
    if let Some(deg) = p.degree() {
        if deg > cap {
            return Err(Error::DegreeCapExceeded { degree: deg, cap });
        }
    }
    Ok(())
}

/// `P ↦ P_Γ` with the default degree cap.
pub fn fourier_gaussian_poly(p: &MultiPoly, gamma: &ComplexSymMatrix) -> Result<MultiPoly> {
    fourier_gaussian_poly_capped(p, gamma, DEFAULT_DEGREE_CAP)
}

pub fn fourier_gaussian_poly_capped(
    p: &MultiPoly,
    gamma: &ComplexSymMatrix,
    cap: usize,
) -> Result<MultiPoly> {
    check_inputs(p, gamma, cap)?;
    let c0 = gaussian_constant(gamma)?;
    Ok(MonomialImages::new(gamma)?.transform(p, c0))
}

/// Inverse of [`fourier_gaussian_poly`].
///
/// The leading homogeneous part of `P_Γ` is `c₀·P_k(−iΓ⁻¹ξ)`, so the system
/// is triangular in the degree and is solved from the top down.
pub fn inverse_fourier_gaussian_poly(q: &MultiPoly, gamma: &ComplexSymMatrix) -> Result<MultiPoly> {
    check_inputs(q, gamma, DEFAULT_DEGREE_CAP)?;
    let d = gamma.dim();
    let c0 = gaussian_constant(gamma)?;
    let mut images = MonomialImages::new(gamma)?;
    // P_k(y) = R_k(iΓy) / c₀ where R_k is the top part of the remainder.
    let lift = gamma.as_matrix() * C64::new(0.0, 1.0);
    let mut rest = q.clone();
    let mut p = MultiPoly::zero(d);
    let Some(top) = q.degree() else {
        return Ok(p);
    };
    for k in (0..=top).rev() {
        let rk = rest.homogeneous_part(k);
        if rk.is_zero() {
            continue;
        }
        let pk = rk.compose_linear(&lift).homogeneous_part(k).scale(c0.inv());
        let image = images.transform(&pk, c0);
        rest = &rest - &image;
        // The degree-k part is now zero up to rounding; drop it exactly.
        rest = &rest - &rest.homogeneous_part(k);
        p = &p + &pk;
    }
    Ok(p)
}

/// Exact value of `P_{Γ+itId}(tξ)`.
pub fn poly_asymptotic_largetime(
    p: &MultiPoly,
    gamma: &ComplexSymMatrix,
    xi: &[f64],
    t: f64,
) -> Result<C64> {
    if xi.len() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: gamma.dim(), got: xi.len() });
    }
    let shifted = gamma.shifted(C64::new(0.0, t))?;
    let pg = fourier_gaussian_poly(p, &shifted)?;
    let arg: Vec<f64> = xi.iter().map(|x| x * t).collect();
    Ok(pg.eval_real(&arg))
}

/// Stationary-phase asymptote `e^{−idπ/4} P(−ξ) (2π/t)^{d/2}` of
/// [`poly_asymptotic_largetime`].
pub fn largetime_asymptote(p: &MultiPoly, xi: &[f64], t: f64) -> C64 {
    let d = xi.len() as f64;
    let minus: Vec<f64> = xi.iter().map(|x| -x).collect();
    C64::from_polar((2.0 * PI / t).powf(d / 2.0), -d * PI / 4.0) * p.eval_real(&minus)
}
