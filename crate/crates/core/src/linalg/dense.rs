use ndarray::{Array1, Array2};

use super::{eig_sym, SymMatrix};

/// `g s g^T` for a square `g` of matching order.
pub fn congruence(g: &Array2<f64>, s: &SymMatrix) -> SymMatrix {
    let gs = g.dot(&s.to_full());
    sym_from_dense(&gs.dot(&g.t()))
}

/// Symmetric part `(a + a^T) / 2` of a square matrix.
pub fn sym_from_dense(a: &Array2<f64>) -> SymMatrix {
    let n = a.nrows();
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            out.set(i, j, 0.5 * (a[[i, j]] + a[[j, i]]));
        }
    }
    out
}

/// Moore-Penrose pseudoinverse of a symmetric positive semidefinite matrix, dropping
/// eigenvalues below `rcond * lambda_max`.
pub fn pinv_psd(a: &Array2<f64>, rcond: f64) -> Array2<f64> {
    let n = a.nrows();
    let eig = eig_sym(&sym_from_dense(a)).expect("finite Gram matrix");
    let cutoff = rcond * eig.max_value().max(0.0);
    let mut out = Array2::<f64>::zeros((n, n));
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let v = eig.vectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += v[i] * v[j] / lambda;
            }
        }
    }
    out
}

/// Cholesky factorization of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>);

impl Cholesky {
    /// Returns `None` when `a` is not numerically positive definite.
    pub fn new(a: &Array2<f64>) -> Option<Self> {
        let n = a.nrows();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
        nalgebra::Cholesky::new(m).map(Cholesky)
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let rhs = nalgebra::DVector::from_iterator(b.len(), b.iter().copied());
        Array1::from_iter(self.0.solve(&rhs).iter().copied())
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    Cholesky::new(a).map(|c| c.solve(b))
}
