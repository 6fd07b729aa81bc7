//! Small dense vectors, covectors, and symmetric matrices for chart
//! dimensions 2..=8, with metric-aware inner products and index
//! raising/lowering.
//!
//! Symmetric matrices store only the lower triangle, so symmetry holds by
//! construction rather than by runtime checks. Inversion goes through a
//! Cholesky factorization: a factorization failure doubles as the signal
//! that the input was not a positive-definite metric.

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

pub fn check_dim(n: usize) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension(n, "2..=8"));
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Contravariant vector in chart components.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

/// Covariant vector (one-form) in chart components.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Covector(Vec<f64>);

macro_rules! impl_components {
    ($ty:ident) => {
        impl $ty {
            pub fn new(components: Vec<f64>) -> Result<Self> {
                check_dim(components.len())?;
                check_finite(&components)?;
                Ok(Self(components))
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub fn from_slice(components: &[f64]) -> Result<Self> {
                Self::new(components.to_vec())
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn components(&self) -> &[f64] {
                &self.0
            }

            pub fn into_components(self) -> Vec<f64> {
                self.0
            }

            pub fn scale(&self, s: f64) -> Self {
                Self(self.0.iter().map(|v| v * s).collect())
            }

            /// self + s * other
            pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
                debug_assert_eq!(self.dim(), other.dim());
                Self(
                    self.0
                        .iter()
                        .zip(&other.0)
                        .map(|(a, b)| a + s * b)
                        .collect(),
                )
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }

        impl std::ops::Index<usize> for $ty {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

impl_components!(Vector);
impl_components!(Covector);

/// Natural pairing of a covector with a vector, no metric involved.
pub fn pairing(omega: &Covector, v: &Vector) -> Result<f64> {
    if omega.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            got: v.dim(),
        });
    }
    Ok(omega
        .components()
        .iter()
        .zip(v.components())
        .map(|(a, b)| a * b)
        .sum())
}

/// Symmetric matrix, lower triangle stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    tri: Vec<f64>,
}

impl SymMatrix {
    fn tri_len(n: usize) -> usize {
        n * (n + 1) / 2
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    /// Builds from a rule evaluated on the lower triangle (i >= j).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut tri = Vec::with_capacity(Self::tri_len(n));
        for i in 0..n {
            for j in 0..=i {
                tri.push(f(i, j));
            }
        }
        SymMatrix { dim: n, tri }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::from_fn(n, |i, j| if i == j { s } else { 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            dim: n,
            tri: vec![0.0; Self::tri_len(n)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.tri[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.tri[k] = value;
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            tri: self.tri.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            tri: self
                .tri
                .iter()
                .zip(&other.tri)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            tri: self
                .tri
                .iter()
                .zip(&other.tri)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tri.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense n x n rows, for serialization and display.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vector(&self, v: &Vector) -> Result<Covector> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        let out = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect();
        Ok(Covector(out))
    }

    /// Lower-triangular Cholesky factor L with A = L L^T.
    ///
    /// Fails with `NotPositiveDefinite` when a pivot is not strictly
    /// positive, which is how non-metric inputs get rejected.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut l = vec![0.0; Self::tri_len(n)];
        let at = |i: usize, j: usize| i * (i + 1) / 2 + j;
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l[at(i, j)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Inverse via Cholesky. Only valid for positive-definite input.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let n = self.dim;
        let l = self.cholesky()?;
        let at = |i: usize, j: usize| i * (i + 1) / 2 + j;
        // Solve A x = e_k column by column: L y = e_k, then L^T x = y.
        let mut inv = SymMatrix::zeros(n);
        let mut y = vec![0.0; n];
        let mut x = vec![0.0; n];
        for col in 0..n {
            for i in 0..n {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[at(i, k)] * y[k];
                }
                y[i] = s / l[at(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= l[at(k, i)] * x[k];
                }
                x[i] = s / l[at(i, i)];
            }
            for row in col..n {
                inv.set(row, col, x[row]);
            }
        }
        Ok(inv)
    }
}

impl serde::Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Dense rank-3 array with one shared dimension, index order (i, j, k).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.n + j) * self.n + k] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| (0..self.n).map(|k| self.get(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }
}

impl serde::Serialize for Tensor3 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested().serialize(serializer)
    }
}

/// Dense rank-4 array with one shared dimension, index order (i, j, k, l).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Tensor4 { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        self.data[((i * self.n + j) * self.n + k) * self.n + l] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Metric inner product X^a g_ab Y^b.
///
/// Symmetric in X and Y bit-for-bit: the accumulation visits the same
/// products in the same order either way.
pub fn inner(g: &SymMatrix, x: &Vector, y: &Vector) -> Result<f64> {
    let n = g.dim();
    if x.dim() != n || y.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x.dim() != n { x.dim() } else { y.dim() },
        });
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += g.get(i, i) * (x[i] * y[i]);
        for j in 0..i {
            acc += g.get(i, j) * (x[i] * y[j] + x[j] * y[i]);
        }
    }
    Ok(acc)
}

/// Raises an index: omega_a -> g^{ab} omega_b.
pub fn raise(g_inverse: &SymMatrix, omega: &Covector) -> Result<Vector> {
    if omega.dim() != g_inverse.dim() {
        return Err(Error::DimensionMismatch {
            expected: g_inverse.dim(),
            got: omega.dim(),
        });
    }
    let n = g_inverse.dim();
    let out = (0..n)
        .map(|a| (0..n).map(|b| g_inverse.get(a, b) * omega[b]).sum())
        .collect();
    Ok(Vector(out))
}

/// Lowers an index: X^a -> g_ab X^b.
pub fn lower(g: &SymMatrix, x: &Vector) -> Result<Covector> {
    g.mul_vector(x)
}
