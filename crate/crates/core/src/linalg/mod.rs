//! Dense linear algebra on small real symmetric matrices.
//!
//! Decompositions delegate to `nalgebra`; results are made canonical here: eigenpairs are
//! sorted by descending eigenvalue and each eigenvector is sign-normalized so that its
//! largest-magnitude entry is nonnegative.

mod dense;
mod eigen;

pub use dense::{cholesky_solve, congruence, pinv_psd, sym_from_dense, Cholesky};
pub use eigen::{eig_sym, matfun_spd, pd_tolerance, EigDecomp, MatFun};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real symmetric `n x n` matrix stored as its upper triangle in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrixRepr", into = "SymMatrixRepr")]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymMatrixRepr {
    n: usize,
    upper: Vec<f64>,
}

impl TryFrom<SymMatrixRepr> for SymMatrix {
    type Error = Error;
    fn try_from(r: SymMatrixRepr) -> Result<Self> {
        SymMatrix::from_upper(r.n, r.upper)
    }
}

impl From<SymMatrix> for SymMatrixRepr {
    fn from(s: SymMatrix) -> Self {
        SymMatrixRepr { n: s.n, upper: s.upper }
    }
}

/// Number of stored entries of an order-`n` symmetric matrix.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl SymMatrix {
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix order must be positive".into()));
        }
        if upper.len() != packed_len(n) {
            return Err(Error::ShapeMismatch(format!(
                "order {n} needs {} upper-triangle entries, got {}",
                packed_len(n),
                upper.len()
            )));
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(SymMatrix { n, upper })
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, upper: vec![0.0; packed_len(n)] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a full matrix, reading only the upper triangle.
    pub fn from_full(a: &Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::ShapeMismatch(format!("{r}x{c} matrix is not square")));
        }
        let mut upper = Vec::with_capacity(packed_len(r));
        for i in 0..r {
            for j in i..r {
                upper.push(a[[i, j]]);
            }
        }
        Self::from_upper(r, upper)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows 0..i hold n + (n-1) + ... + (n-i+1) entries
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.upper[k] = value;
    }

    pub fn to_full(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.n), |(i, j)| self.get(i, j))
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix { n: self.n, upper: self.upper.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        debug_assert_eq!(self.n, other.n);
        SymMatrix { n: self.n, upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        debug_assert_eq!(self.n, other.n);
        SymMatrix { n: self.n, upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a - b).collect() }
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &SymMatrix) {
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += s * b;
        }
    }

    /// Frobenius inner product `trace(A B)`.
    pub fn frobenius_inner(&self, other: &SymMatrix) -> f64 {
        let n = self.n;
        let mut k = 0;
        let mut acc = 0.0;
        for i in 0..n {
            for j in i..n {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.upper[k] * other.upper[k];
                k += 1;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }
}

/// Frobenius-orthonormal basis of the symmetric `n x n` matrices.
///
/// Diagonal units `e_a e_a^T` come first, followed by `(e_a e_b^T + e_b e_a^T)/sqrt(2)` for
/// `a < b` in row-major order.
pub fn sym_basis(n: usize) -> Vec<SymMatrix> {
    let mut basis = Vec::with_capacity(packed_len(n));
    for a in 0..n {
        let mut e = SymMatrix::zeros(n);
        e.set(a, a, 1.0);
        basis.push(e);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let mut e = SymMatrix::zeros(n);
            e.set(a, b, std::f64::consts::FRAC_1_SQRT_2);
            basis.push(e);
        }
    }
    basis
}

/// Index pairs `(a, b)` matching the ordering of [`sym_basis`].
pub fn sym_basis_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|a| (a, a)).collect();
    for a in 0..n {
        for b in (a + 1)..n {
            pairs.push((a, b));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_indexing_matches_row_major_upper() {
        let m = SymMatrix::from_upper(3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.get(0, 0), 1.);
        assert_eq!(m.get(0, 2), 3.);
        assert_eq!(m.get(2, 0), 3.);
        assert_eq!(m.get(1, 1), 4.);
        assert_eq!(m.get(1, 2), 5.);
        assert_eq!(m.get(2, 2), 6.);
        let f = m.to_full();
        assert_eq!(f, f.t());
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(matches!(SymMatrix::from_upper(1, vec![f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(SymMatrix::from_upper(2, vec![1.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn sym_basis_small_orders() {
        let b1 = sym_basis(1);
        assert_eq!(b1, vec![SymMatrix::identity(1)]);

        let b2 = sym_basis(2);
        assert_eq!(b2.len(), 3);
        for (i, x) in b2.iter().enumerate() {
            for (j, y) in b2.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((x.frobenius_inner(y) - expected).abs() < 1e-15);
            }
        }
        assert_eq!(b2[2].get(0, 1), std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn sym_basis_gram_is_identity() {
        for n in 1..=5 {
            let b = sym_basis(n);
            assert_eq!(b.len(), packed_len(n));
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    // full-matrix trace computation, independent of the packed inner product
                    let g = x.to_full().dot(&y.to_full()).diag().sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expected).abs() <= 1e-15, "n={n} ({i},{j}) -> {g}");
                }
            }
        }
    }
}
