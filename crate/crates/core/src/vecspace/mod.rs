//! Dense vector and square-matrix containers with ℓp and Schatten norms.
//!
//! Everything here is plain `f64` storage. Vectors are the weights,
//! features, dual iterates and subgradients of the linear-model protocols;
//! matrices carry the iterates and gradients of the Schatten variant.

mod svd;

use std::fmt;
use std::ops::Index;

use crate::error::{check_dim, invalid, Error, Result};

pub use svd::{svd, SvdResult, SVD_MAX_SWEEPS, SVD_ROTATION_TOL};

/// Norm selector. `Infinity` is kept apart from the finite exponents so the
/// power formula is never evaluated with a huge float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// Validates `p ≥ 1`; `f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid(format!("norm exponent must be >= 1, got {p}")));
        }
        if p.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(p))
        }
    }

    pub fn one() -> Self {
        Exponent::Finite(1.0)
    }

    pub fn two() -> Self {
        Exponent::Finite(2.0)
    }

    /// Hölder conjugate: 1/p + 1/q = 1.
    pub fn conjugate(self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// ℓp norm of a raw slice. Scaled by the largest magnitude so that neither
/// large exponents nor large entries overflow.
pub fn norm_slice(v: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => max_abs(v),
        Exponent::Finite(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
        Exponent::Finite(p) => {
            let scale = max_abs(v);
            if scale == 0.0 {
                return 0.0;
            }
            if p == 2.0 {
                let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
                return scale * s.sqrt();
            }
            let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
            scale * s.powf(1.0 / p)
        }
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A finite, non-empty real vector.
#[derive(Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("vector must have positive length"));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite entry at index {i}")));
        }
        Ok(DenseVector { data })
    }

    /// Builds without validation; callers guarantee finiteness.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        debug_assert!(data.iter().all(|x| x.is_finite()));
        DenseVector { data }
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        DenseVector { data: vec![0.0; d] }
    }

    /// Standard basis vector scaled by `value`.
    pub fn basis(d: usize, index: usize, value: f64) -> Self {
        let mut v = Self::zeros(d);
        v.data[index] = value;
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self, p: Exponent) -> f64 {
        norm_slice(&self.data, p)
    }

    pub fn l1(&self) -> f64 {
        norm_slice(&self.data, Exponent::one())
    }

    pub fn l2(&self) -> f64 {
        norm_slice(&self.data, Exponent::two())
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot_slice(&self.data, &other.data))
    }

    pub(crate) fn dot_unchecked(&self, other: &DenseVector) -> f64 {
        dot_slice(&self.data, &other.data)
    }

    /// `self - other`.
    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    /// `self + other`.
    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn scaled(&self, c: f64) -> DenseVector {
        DenseVector::from_vec_unchecked(self.data.iter().map(|x| c * x).collect())
    }

    /// In place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &DenseVector) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub(crate) fn zip_map(&self, other: &DenseVector, f: impl Fn(f64, f64) -> f64) -> DenseVector {
        DenseVector::from_vec_unchecked(
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 8 {
            write!(f, "DenseVector({:?})", self.data)
        } else {
            write!(
                f,
                "DenseVector(d={}, nnz={}, head={:?}..)",
                self.data.len(),
                self.nnz(),
                &self.data[..4]
            )
        }
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DenseVector::new(v)
    }
}

/// ℓp norm; `p = ∞` is spelled [`Exponent::Infinity`].
pub fn lp_norm(v: &DenseVector, p: Exponent) -> f64 {
    v.norm(p)
}

/// A finite square matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    d: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        check_dim(d * d, data.len())?;
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite entry at ({}, {})", i / d, i % d)));
        }
        Ok(DenseMatrix { d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let mut data = Vec::with_capacity(d * d);
        for r in rows {
            check_dim(d, r.len())?;
            data.extend_from_slice(r);
        }
        DenseMatrix::new(d, data)
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        DenseMatrix { d, data: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = x;
        }
        m
    }

    /// `scale · u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64], scale: f64) -> Result<Self> {
        check_dim(u.len(), v.len())?;
        let d = u.len();
        let mut m = Self::zeros(d);
        for i in 0..d {
            let a = scale * u[i];
            for j in 0..d {
                m.data[i * d + j] = a * v[j];
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.d).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let d = self.d;
        let mut t = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                t.data[j * d + i] = self.data[i * d + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.d, other.d)?;
        let d = self.d;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * d..(k + 1) * d];
                let dst = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.d, other.d)?;
        Ok(DenseMatrix {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.d, other.d)?;
        Ok(DenseMatrix {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix { d: self.d, data: self.data.iter().map(|x| c * x).collect() }
    }

    /// In place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &DenseMatrix) -> Result<()> {
        check_dim(self.d, other.d)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    /// Frobenius inner product ⟨A, B⟩ = Tr(AᵀB).
    pub fn inner(&self, other: &DenseMatrix) -> Result<f64> {
        check_dim(self.d, other.d)?;
        Ok(dot_slice(&self.data, &other.data))
    }

    pub fn frobenius(&self) -> f64 {
        norm_slice(&self.data, Exponent::two())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.d).all(|i| (0..self.d).all(|j| i == j || self.get(i, j) == 0.0))
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix(d={}, fro={:.6e})", self.d, self.frobenius())
    }
}

/// Schatten p-norm: the ℓp norm of the singular values.
pub fn schatten_norm(m: &DenseMatrix, p: Exponent) -> Result<f64> {
    Ok(norm_slice(&svd(m)?.singular_values, p))
}
