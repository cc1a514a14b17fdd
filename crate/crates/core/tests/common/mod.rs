#![allow(dead_code)]

use gsmatrix::linalg::{CMatrix, ComplexSymMatrix};
use gsmatrix::poly::MultiPoly;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn coeff() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
}

/// Random polynomial in `dim` variables of degree at most `max_deg`.
pub fn poly(dim: usize, max_deg: u32) -> impl Strategy<Value = MultiPoly> {
    let exps = prop::collection::vec(0..=max_deg, dim).prop_filter("degree", move |e| e.iter().sum::<u32>() <= max_deg);
    prop::collection::vec((exps, coeff()), 1..8).prop_map(move |terms| {
        let mut p = MultiPoly::zero(dim);
        for (e, c) in terms {
            p.add_term(gsmatrix::MultiIndex(e), c);
        }
        p
    })
}

/// Random symmetric matrix with real part `BBᵀ + I/2` and a symmetric
/// imaginary part.
pub fn gamma(dim: usize) -> impl Strategy<Value = ComplexSymMatrix> {
    (prop::collection::vec(-1.0..1.0f64, dim * dim), prop::collection::vec(-1.0..1.0f64, dim * dim)).prop_map(
        move |(b, s)| {
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let re: f64 = (0..dim).map(|k| b[i * dim + k] * b[j * dim + k]).sum::<f64>()
                        + if i == j { 0.5 } else { 0.0 };
                    let im = 0.5 * (s[i * dim + j] + s[j * dim + i]);
                    m[(i, j)] = c(re, im);
                }
            }
            ComplexSymMatrix::new(m).unwrap()
        },
    )
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `∫₀^∞ e^{ithΔ/2}u(x) e^{it/2h} dt` for the Gaussian
/// `u = e^{ix·ξ/h} e^{−Σ γ_j (x_j−c_j)²/2h}`, by Gauss–Legendre panels in `t`
/// with a smooth switch-off on `[2|x|, 3|x|]`. The free evolution is written
/// out coordinate by coordinate.
pub fn farfield_time_integral(center: &[f64], xi: &[f64], gammas: &[f64], h: f64, x: &[f64]) -> C64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let speed2: f64 = xi.iter().map(|k| k * k).sum();
    let x_xi: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
    let integrand = |t: f64| {
        let mut z = c(0.0, (x_xi - 0.5 * t * speed2 + 0.5 * t) / h);
        let mut amp = c(1.0, 0.0);
        for j in 0..x.len() {
            let w = c(1.0, t * gammas[j]);
            let dx = x[j] - center[j] - t * xi[j];
            z -= gammas[j] * dx * dx / (2.0 * h * w);
            amp /= w.sqrt();
        }
        amp * z.exp()
    };
    let step = |s: f64| {
        let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
        f(s) / (f(s) + f(1.0 - s))
    };
    let t_end = 3.0 * r;
    let panels = (t_end / 0.5).ceil() as usize;
    let nodes = gsmatrix::quad::composite_gauss_legendre(0.0, t_end, panels, 10);
    nodes
        .iter()
        .map(|&(t, w)| {
            let taper = if t <= 2.0 * r { 1.0 } else { step((3.0 * r - t) / r) };
            w * taper * integrand(t)
        })
        .sum()
}
