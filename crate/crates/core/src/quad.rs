//! Quadrature helpers.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Nodes and weights of a composite Gauss–Legendre rule on `[a, b]`.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("positive order"));
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let mid = lo + 0.5 * width;
        for &(x, w) in rule.as_node_weight_pairs() {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

/// Adaptive double-exponential quadrature of a smooth integrand to the given
/// absolute error.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, abs_tol).integral
}
