//! Compactly supported smooth potentials.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;

/// A smooth compactly supported potential on `R^d`.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> RMatrix;

    /// Smallest `R` with the support inside the closed ball `B(0, R)`.
    fn support_radius(&self) -> f64;

    /// Whether the forward ray `{x + s·dir : s ≥ 0}` keeps a distance larger
    /// than `margin` from the support.
    fn ray_clear(&self, x: &[f64], dir: &[f64], margin: f64) -> bool {
        ray_clears_ball(x, dir, &vec![0.0; x.len()], self.support_radius() + margin)
    }

    /// Smallest `s₋ ≥ 0` such that the backward ray `{x − s·dir : s ≥ s₋}`
    /// keeps a distance larger than `margin` from the support.
    fn backward_clear_time(&self, x: &[f64], dir: &[f64], margin: f64) -> f64 {
        backward_exit(x, dir, &vec![0.0; x.len()], self.support_radius() + margin)
    }
}

fn unit(dir: &[f64]) -> Vec<f64> {
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter().map(|v| v / n).collect()
}

/// Distance test between a forward ray and a ball of radius `r` about `c`.
pub fn ray_clears_ball(x: &[f64], dir: &[f64], c: &[f64], r: f64) -> bool {
    let u = unit(dir);
    let rel: Vec<f64> = c.iter().zip(x).map(|(a, b)| a - b).collect();
    let along: f64 = rel.iter().zip(&u).map(|(a, b)| a * b).sum();
    let d2: f64 = rel.iter().map(|v| v * v).sum();
    let dist2 = if along <= 0.0 { d2 } else { d2 - along * along };
    dist2 > r * r
}

fn backward_exit(x: &[f64], dir: &[f64], c: &[f64], r: f64) -> f64 {
    let u = unit(dir);
    let rel: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
    let b: f64 = rel.iter().zip(&u).map(|(a, b)| a * b).sum();
    let rho2 = rel.iter().map(|v| v * v).sum::<f64>() - b * b;
    if rho2 >= r * r {
        return 0.0;
    }
    (b + (r * r - rho2).sqrt()).max(0.0)
}

/// `A·exp(1 − 1/(1 − |x−c|²/R²))` inside the ball, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveRadius(radius));
        }
        if center.iter().any(|c| !c.is_finite()) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument("bump parameters must be finite".into()));
        }
        Ok(Self { center, radius, amplitude })
    }

    fn offset(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let dx: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let s = dx.iter().map(|v| v * v).sum::<f64>() / (self.radius * self.radius);
        (dx, s)
    }

    /// `(f, f', f'')` for the profile `f(s) = exp(1 − 1/(1−s))`.
    fn profile(s: f64) -> Option<(f64, f64, f64)> {
        if s >= 1.0 {
            return None;
        }
        let q = 1.0 / (1.0 - s);
        let f = (1.0 - q).exp();
        let f1 = -f * q * q;
        let f2 = f * (q.powi(4) - 2.0 * q.powi(3));
        Some((f, f1, f2))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (_, s) = self.offset(x);
        Self::profile(s).map_or(0.0, |(f, _, _)| self.amplitude * f)
    }

    fn add_gradient(&self, x: &[f64], out: &mut [f64]) {
        let (dx, s) = self.offset(x);
        if let Some((_, f1, _)) = Self::profile(s) {
            let k = self.amplitude * f1 * 2.0 / (self.radius * self.radius);
            for (o, d) in out.iter_mut().zip(&dx) {
                *o += k * d;
            }
        }
    }

    fn add_hessian(&self, x: &[f64], out: &mut RMatrix) {
        let (dx, s) = self.offset(x);
        if let Some((_, f1, f2)) = Self::profile(s) {
            let r2 = self.radius * self.radius;
            let a = self.amplitude * f2 * 4.0 / (r2 * r2);
            let b = self.amplitude * f1 * 2.0 / r2;
            let d = dx.len();
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += a * dx[i] * dx[j];
                }
                out[(i, i)] += b;
            }
        }
    }
}

/// Finite sum of radial bumps.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpPotential {
    dim: usize,
    bumps: Vec<Bump>,
}

impl BumpPotential {
    pub fn new(dim: usize, bumps: Vec<Bump>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for b in &bumps {
            if b.center.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: b.center.len() });
            }
        }
        Ok(Self { dim, bumps })
    }

    /// `V ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self { dim, bumps: Vec::new() }
    }

    pub fn single(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        let dim = center.len();
        Self::new(dim, vec![Bump::new(center, radius, amplitude)?])
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn with_bump(&self, bump: Bump) -> Result<Self> {
        let mut bumps = self.bumps.clone();
        bumps.push(bump);
        Self::new(self.dim, bumps)
    }

    /// Image under `x ↦ R x` for an orthogonal matrix `R`.
    pub fn rotated(&self, r: &RMatrix) -> Self {
        let bumps = self
            .bumps
            .iter()
            .map(|b| {
                let c = r * crate::linalg::RVector::from_column_slice(&b.center);
                Bump { center: c.iter().copied().collect(), ..b.clone() }
            })
            .collect();
        Self { dim: self.dim, bumps }
    }
}

/// Builds a bump potential from `(center, radius, amplitude)` triples.
pub fn make_potential(dim: usize, spec: &[(Vec<f64>, f64, f64)]) -> Result<BumpPotential> {
    let bumps = spec
        .iter()
        .map(|(c, r, a)| Bump::new(c.clone(), *r, *a))
        .collect::<Result<Vec<_>>>()?;
    BumpPotential::new(dim, bumps)
}

impl Potential for BumpPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.value(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for b in &self.bumps {
            b.add_gradient(x, &mut g);
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> RMatrix {
        let mut h = RMatrix::zeros(self.dim, self.dim);
        for b in &self.bumps {
            b.add_hessian(x, &mut h);
        }
        h
    }

    fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + b.radius)
            .fold(0.0, f64::max)
    }

    // Per-bump tests: a bump far from the trajectory never influences the
    // escape decision.
    fn ray_clear(&self, x: &[f64], dir: &[f64], margin: f64) -> bool {
        self.bumps.iter().all(|b| ray_clears_ball(x, dir, &b.center, b.radius + margin))
    }

    fn backward_clear_time(&self, x: &[f64], dir: &[f64], margin: f64) -> f64 {
        self.bumps
            .iter()
            .map(|b| backward_exit(x, dir, &b.center, b.radius + margin))
            .fold(0.0, f64::max)
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type MatrixFn = dyn Fn(&[f64]) -> RMatrix + Send + Sync;

/// A user-supplied potential. The support radius is not computed and must
/// be given.
#[derive(Clone)]
pub struct CallablePotential {
    dim: usize,
    support_radius: f64,
    value: Arc<ScalarFn>,
    gradient: Arc<VectorFn>,
    hessian: Arc<MatrixFn>,
}

impl CallablePotential {
    pub fn new(
        dim: usize,
        support_radius: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> RMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            support_radius,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }
}

impl fmt::Debug for CallablePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallablePotential")
            .field("dim", &self.dim)
            .field("support_radius", &self.support_radius)
            .finish_non_exhaustive()
    }
}

impl Potential for CallablePotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> RMatrix {
        (self.hessian)(x)
    }
    fn support_radius(&self) -> f64 {
        self.support_radius
    }
}
