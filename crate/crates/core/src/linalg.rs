//! Complex symmetric matrices and the analytic square root of determinants.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Determinant moduli below this count as singular when tracking a branch.
pub const SINGULAR_DET: f64 = 1e-14;

const SYMMETRY_TOL: f64 = 1e-9;

/// A symmetric `d×d` complex matrix.
///
/// Symmetry is exact: the constructor averages `M` with its transpose after
/// checking that they agree. Matrices built with [`ComplexSymMatrix::new`]
/// also have a positive definite real part; [`ComplexSymMatrix::new_symmetric`]
/// skips that check and records it in [`ComplexSymMatrix::is_validated`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSymMatrix {
    entries: CMatrix,
    validated: bool,
}

impl ComplexSymMatrix {
    /// Symmetric matrix with positive definite real part.
    pub fn new(m: CMatrix) -> Result<Self> {
        let mut out = Self::new_symmetric(m)?;
        let min = out.real_part_min_eigenvalue();
        if !(min > 0.0) {
            return Err(Error::DegenerateMatrix(format!(
                "real part is not positive definite (min eigenvalue {min:e})"
            )));
        }
        out.validated = true;
        Ok(out)
    }

    /// Symmetric matrix without the positivity requirement.
    pub fn new_symmetric(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DegenerateMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DegenerateMatrix("non-finite entry".into()));
        }
        let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (&m - m.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::DegenerateMatrix(format!("not symmetric (defect {asym:e})")));
        }
        let entries = (&m + m.transpose()).scale(0.5);
        Ok(Self { entries, validated: false })
    }

    pub fn from_real(m: &RMatrix) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: CMatrix::identity(dim, dim), validated: true }
    }

    /// `c·Id`; the positivity flag follows `Re c > 0`.
    pub fn scaled_identity(dim: usize, c: C64) -> Self {
        Self { entries: CMatrix::identity(dim, dim) * c, validated: c.re > 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    /// Whether positivity of the real part was checked at construction.
    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn real_part(&self) -> RMatrix {
        self.entries.map(|z| z.re)
    }

    pub fn real_part_min_eigenvalue(&self) -> f64 {
        self.real_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .entries
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateMatrix("matrix is not invertible".into()))?;
        if self.validated {
            Self::new(inv)
        } else {
            Self::new_symmetric(inv)
        }
    }

    pub fn conj(&self) -> Self {
        Self { entries: self.entries.map(|z| z.conj()), validated: self.validated }
    }

    /// `self + c·Id`.
    pub fn shifted(&self, c: C64) -> Result<Self> {
        let m = &self.entries + CMatrix::identity(self.dim(), self.dim()) * c;
        if self.validated && c.re >= 0.0 {
            // Re part only grows, positivity is preserved.
            Ok(Self { entries: m, validated: true })
        } else {
            Self::new(m)
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { entries: self.entries.scale(c), validated: self.validated && c > 0.0 }
    }

    /// `vᵀ M v` for a complex vector (no conjugation).
    pub fn bilinear(&self, v: &[C64]) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += v[i] * self.entries[(i, j)] * v[j];
            }
        }
        acc
    }

    /// `vᵀ M v` for a real vector.
    pub fn quad_form(&self, v: &[f64]) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += self.entries[(i, j)] * (v[i] * v[j]);
            }
        }
        acc
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `√det` on the analytic branch that is positive on real positive definite
    /// matrices. Requires a positive definite real part, where every
    /// eigenvalue has positive real part and the product of principal roots
    /// is that branch.
    pub fn sqrt_det(&self) -> Result<C64> {
        if !self.validated {
            return Err(Error::DegenerateMatrix(
                "sqrt_det needs a positive definite real part".into(),
            ));
        }
        let eig = self
            .entries
            .clone()
            .schur()
            .eigenvalues()
            .ok_or_else(|| Error::DegenerateMatrix("Schur decomposition failed".into()))?;
        Ok(eig.iter().map(|l| l.sqrt()).product())
    }
}

/// Square root of a determinant followed continuously along a matrix path.
#[derive(Clone, Debug)]
pub struct BranchTrackedDet {
    pub value: C64,
    /// `(s, continuous arg det)` at every sample used.
    pub argument_history: Vec<(f64, f64)>,
}

impl BranchTrackedDet {
    pub fn final_argument(&self) -> f64 {
        self.argument_history.last().map(|p| p.1).unwrap_or(0.0)
    }
}

fn det_of(m: &CMatrix, s: f64) -> Result<C64> {
    let det = m.clone().determinant();
    if !(det.norm() >= SINGULAR_DET) {
        return Err(Error::SingularOnPath { at: s, modulus: det.norm() });
    }
    Ok(det)
}

/// Tracks `√det M(s)` for `s ∈ [0, 1]`, starting from the principal branch at
/// `s = 0` (positive when `det M(0)` is real positive).
///
/// The path is sampled adaptively: an interval is bisected until consecutive
/// determinant arguments differ by less than π/4.
pub fn sqrt_det_analytic<F>(path: F) -> Result<BranchTrackedDet>
where
    F: Fn(f64) -> CMatrix,
{
    const INITIAL: usize = 16;
    const MAX_DEPTH: u32 = 40;

    fn refine<F: Fn(f64) -> CMatrix>(
        path: &F,
        (s0, d0): (f64, C64),
        (s1, d1): (f64, C64),
        depth: u32,
        out: &mut Vec<(f64, C64)>,
    ) -> Result<()> {
        let jump = (d1 / d0).arg().abs();
        if jump < FRAC_PI_4 {
            out.push((s1, d1));
            return Ok(());
        }
        if depth >= MAX_DEPTH {
            if jump >= FRAC_PI_2 {
                return Err(Error::AmbiguousBranch { at: s1, jump });
            }
            out.push((s1, d1));
            return Ok(());
        }
        let sm = 0.5 * (s0 + s1);
        let dm = det_of(&path(sm), sm)?;
        refine(path, (s0, d0), (sm, dm), depth + 1, out)?;
        refine(path, (sm, dm), (s1, d1), depth + 1, out)
    }

    let d_start = det_of(&path(0.0), 0.0)?;
    let mut samples = vec![(0.0, d_start)];
    let mut prev = (0.0, d_start);
    for k in 1..=INITIAL {
        let s = k as f64 / INITIAL as f64;
        let d = det_of(&path(s), s)?;
        refine(&path, prev, (s, d), 0, &mut samples)?;
        prev = (s, d);
    }
    Ok(accumulate(&samples))
}

/// Same as [`sqrt_det_analytic`] for a pre-sampled path (samples at equal
/// spacing). Fails with [`Error::AmbiguousBranch`] when two consecutive
/// samples differ in argument by π/2 or more.
pub fn sqrt_det_sampled(samples: &[CMatrix]) -> Result<BranchTrackedDet> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty matrix path".into()));
    }
    let n = samples.len();
    let s_of = |k: usize| if n == 1 { 1.0 } else { k as f64 / (n - 1) as f64 };
    let mut dets: Vec<(f64, C64)> = Vec::with_capacity(n);
    for (k, m) in samples.iter().enumerate() {
        let d = det_of(m, s_of(k))?;
        if let Some(&(_, prev)) = dets.last() {
            let jump = (d / prev).arg().abs();
            if jump >= FRAC_PI_2 {
                return Err(Error::AmbiguousBranch { at: s_of(k), jump });
            }
        }
        dets.push((s_of(k), d));
    }
    Ok(accumulate(&dets))
}

fn accumulate(samples: &[(f64, C64)]) -> BranchTrackedDet {
    let mut arg = samples[0].1.arg();
    let mut history = Vec::with_capacity(samples.len());
    history.push((samples[0].0, arg));
    for w in samples.windows(2) {
        arg += (w[1].1 / w[0].1).arg();
        history.push((w[1].0, arg));
    }
    let last = samples[samples.len() - 1].1;
    let value = C64::from_polar(last.norm().sqrt(), 0.5 * arg);
    BranchTrackedDet { value, argument_history: history }
}

/// Real symmetric matrix helpers used by the dynamics.
pub(crate) fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}
