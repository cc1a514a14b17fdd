//! Polynomials in `d` variables with complex coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Exponent vector `α` of a monomial `y^α`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn unit(dim: usize, j: usize) -> Self {
        let mut v = vec![0; dim];
        v[j] = 1;
        Self(v)
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn bump(&self, j: usize) -> Self {
        let mut v = self.0.clone();
        v[j] += 1;
        Self(v)
    }

    fn sum(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Sparse polynomial `Σ c_α y^α`. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    dim: usize,
    terms: BTreeMap<MultiIndex, C64>,
}

impl MultiPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self::monomial(MultiIndex::zero(dim), c)
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, C64::new(1.0, 0.0))
    }

    /// The coordinate function `y_j`.
    pub fn variable(dim: usize, j: usize) -> Self {
        Self::monomial(MultiIndex::unit(dim, j), C64::new(1.0, 0.0))
    }

    pub fn monomial(alpha: MultiIndex, c: C64) -> Self {
        let mut p = Self::zero(alpha.dim());
        p.add_term(alpha, c);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, C64)>,
    {
        let mut p = Self::zero(dim);
        for (alpha, c) in terms {
            if alpha.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: alpha.len() });
            }
            p.add_term(MultiIndex(alpha), c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|α|` with a nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(MultiIndex::order).max()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> C64 {
        self.terms.get(alpha).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: C64) {
        debug_assert_eq!(alpha.dim(), self.dim);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(alpha) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == C64::new(0.0, 0.0) {
                    o.remove();
                }
            }
        }
    }

    pub fn eval(&self, y: &[C64]) -> C64 {
        debug_assert_eq!(y.len(), self.dim);
        self.terms
            .iter()
            .map(|(alpha, c)| {
                alpha
                    .0
                    .iter()
                    .zip(y)
                    .fold(*c, |acc, (&a, &yj)| acc * yj.powu(a))
            })
            .sum()
    }

    pub fn eval_real(&self, y: &[f64]) -> C64 {
        debug_assert_eq!(y.len(), self.dim);
        self.terms
            .iter()
            .map(|(alpha, c)| {
                let m: f64 = alpha.0.iter().zip(y).map(|(&a, &yj)| yj.powi(a as i32)).product();
                c * m
            })
            .sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == C64::new(0.0, 0.0) {
            return Self::zero(self.dim);
        }
        Self { dim: self.dim, terms: self.terms.iter().map(|(k, v)| (k.clone(), v * s)).collect() }
    }

    /// `y_j · p`.
    pub fn mul_var(&self, j: usize) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(|(k, v)| (k.bump(j), *v)).collect() }
    }

    /// `∂p/∂y_j`.
    pub fn derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (alpha, c) in &self.terms {
            let a = alpha.0[j];
            if a > 0 {
                let mut beta = alpha.0.clone();
                beta[j] -= 1;
                out.add_term(MultiIndex(beta), c * a as f64);
            }
        }
        out
    }

    /// `y ↦ p(−y)`.
    pub fn reflect(&self) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), if k.order() % 2 == 1 { -v } else { *v }))
                .collect(),
        }
    }

    /// Conjugates every coefficient.
    pub fn conj(&self) -> Self {
        Self { dim: self.dim, terms: self.terms.iter().map(|(k, v)| (k.clone(), v.conj())).collect() }
    }

    /// Homogeneous component of degree `k`.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().filter(|(a, _)| a.order() == k).map(|(a, c)| (a.clone(), *c)).collect(),
        }
    }

    /// Drops coefficients whose modulus is at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(a, c)| (a.clone(), *c)).collect(),
        }
    }

    /// `y ↦ p(M y)` for a `d×d` complex matrix.
    pub fn compose_linear(&self, m: &CMatrix) -> Self {
        let d = self.dim;
        // Linear forms (M y)_j.
        let forms: Vec<MultiPoly> = (0..d)
            .map(|j| {
                let mut f = Self::zero(d);
                for k in 0..d {
                    f.add_term(MultiIndex::unit(d, k), m[(j, k)]);
                }
                f
            })
            .collect();
        let mut out = Self::zero(d);
        for (alpha, c) in &self.terms {
            let mut term = Self::constant(d, *c);
            for (j, &a) in alpha.0.iter().enumerate() {
                for _ in 0..a {
                    term = &term * &forms[j];
                }
            }
            out = &out + &term;
        }
        out
    }

    /// Largest coefficient modulus of `self − other`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        (self - other).terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), *v);
        }
        out
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), -v);
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = MultiPoly::zero(self.dim);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(a.sum(b), ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (alpha, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for (j, &a) in alpha.0.iter().enumerate() {
                match a {
                    0 => {}
                    1 => write!(f, "·y{}", j + 1)?,
                    _ => write!(f, "·y{}^{}", j + 1, a)?,
                }
            }
        }
        Ok(())
    }
}
