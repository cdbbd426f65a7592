use ndarray::{Array1, Array2};

use super::SymMatrix;
use crate::error::{Error, Result};

/// Eigendecomposition `A = Q diag(values) Q^T` with eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigDecomp {
    pub values: Array1<f64>,
    /// Orthogonal matrix whose columns are the eigenvectors.
    pub vectors: Array2<f64>,
}

impl EigDecomp {
    /// Rebuilds `Q f(diag(values)) Q^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let q = &self.vectors;
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += q[[i, k]] * fv[k] * q[[j, k]];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }
}

/// Symmetric eigendecomposition, sorted by descending eigenvalue with every eigenvector
/// sign-normalized so that its largest-magnitude entry is nonnegative.
pub fn eig_sym(a: &SymMatrix) -> Result<EigDecomp> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix passed to eig_sym".into()));
    }
    let n = a.order();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidInput("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let v = &eig.eigenvectors;
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 0..n {
            if v[(r, src)].abs() > v[(pivot, src)].abs() {
                pivot = r;
            }
        }
        let sign = if v[(pivot, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[[r, col]] = sign * v[(r, src)];
        }
    }
    Ok(EigDecomp { values, vectors })
}

/// Spectral functions supported by [`matfun_spd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatFun {
    Sqrt,
    InvSqrt,
    Log,
    Exp,
}

/// Positive-definiteness threshold `1e-12 * max(1, lambda_max)`.
pub fn pd_tolerance(lambda_max: f64) -> f64 {
    1e-12 * lambda_max.max(1.0)
}

/// Evaluates `Q f(diag(lambda)) Q^T`. Every function except `Exp` requires a positive
/// definite argument.
pub fn matfun_spd(a: &SymMatrix, f: MatFun) -> Result<SymMatrix> {
    let eig = eig_sym(a)?;
    if f != MatFun::Exp {
        let tol = pd_tolerance(eig.max_value());
        if eig.min_value() <= tol {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: eig.min_value(), tolerance: tol });
        }
    }
    Ok(match f {
        MatFun::Sqrt => eig.reconstruct_with(f64::sqrt),
        MatFun::InvSqrt => eig.reconstruct_with(|x| 1.0 / x.sqrt()),
        MatFun::Log => eig.reconstruct_with(f64::ln),
        MatFun::Exp => eig.reconstruct_with(f64::exp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::congruence;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut impl Rng, n: usize) -> SymMatrix {
        let upper = (0..crate::linalg::packed_len(n)).map(|_| rng.random_range(-2.0..2.0)).collect();
        SymMatrix::from_upper(n, upper).unwrap()
    }

    fn random_spd(rng: &mut impl Rng, n: usize, cond: f64) -> SymMatrix {
        // random rotation from the eigenvectors of a random symmetric matrix
        let q = eig_sym(&random_sym(rng, n)).unwrap().vectors;
        let lambdas: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 1.0 } else { cond.powf(i as f64 / (n - 1) as f64) })
            .map(|l| l * rng.random_range(0.5..2.0))
            .collect();
        congruence(&q, &SymMatrix::from_diag(&lambdas))
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn diagonal_input_gives_permutation_vectors() {
        let e = eig_sym(&SymMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values.to_vec(), vec![3.0, 2.0, 1.0]);
        let expected = ndarray::arr2(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        assert_eq!(e.vectors, expected);
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = eig_sym(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values.to_vec(), vec![1.0; 3]);
        assert!(max_abs(&(e.vectors.t().dot(&e.vectors) - Array2::<f64>::eye(3))) <= 1e-15);
    }

    #[test]
    fn rejects_nan() {
        let mut m = SymMatrix::identity(2);
        // bypass the constructor check through the mutable setter
        m.set(0, 1, f64::NAN);
        assert!(matches!(eig_sym(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn random_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 6, 12] {
            for _ in 0..50 {
                let a = random_sym(&mut rng, n);
                let e = eig_sym(&a).unwrap();
                let q = &e.vectors;
                let orth = q.t().dot(q) - Array2::<f64>::eye(n);
                assert!(max_abs(&orth) <= 1e-12);
                let rec = q.dot(&Array2::from_diag(&e.values)).dot(&q.t()) - a.to_full();
                assert!(max_abs(&rec) <= 1e-10 * a.max_abs().max(1.0));
                for w in e.values.windows(2) {
                    assert!(w[0] >= w[1]);
                }
            }
        }
    }

    #[test]
    fn eigenvector_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let e = eig_sym(&random_sym(&mut rng, 4)).unwrap();
            for col in e.vectors.columns() {
                let pivot = col.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
                assert!(pivot >= 0.0);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_give_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = eig_sym(&random_sym(&mut rng, 3)).unwrap().vectors;
        let a = congruence(&q, &SymMatrix::from_diag(&[2.0, 2.0, -1.0]));
        let e = eig_sym(&a).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-12 && (e.values[1] - 2.0).abs() < 1e-12);
        assert!(max_abs(&(e.vectors.t().dot(&e.vectors) - Array2::<f64>::eye(3))) <= 1e-12);
    }

    #[test]
    fn deterministic_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sym(&mut rng, 6);
        assert_eq!(eig_sym(&a).unwrap(), eig_sym(&a.clone()).unwrap());
    }

    #[test]
    fn matfun_diagonal_cases() {
        let s = matfun_spd(&SymMatrix::from_diag(&[4.0, 9.0, 1.0]), MatFun::Sqrt).unwrap();
        assert_eq!(s, SymMatrix::from_diag(&[2.0, 3.0, 1.0]));
        let l = matfun_spd(&SymMatrix::identity(3), MatFun::Log).unwrap();
        assert_eq!(l, SymMatrix::zeros(3));
    }

    #[test]
    fn matfun_rejects_indefinite() {
        let a = SymMatrix::from_diag(&[1.0, 0.0, 2.0]);
        for f in [MatFun::Sqrt, MatFun::InvSqrt, MatFun::Log] {
            assert!(matches!(matfun_spd(&a, f), Err(Error::NotPositiveDefinite { .. })));
        }
        assert!(matfun_spd(&SymMatrix::from_diag(&[-3.0, 1.0]), MatFun::Exp).is_ok());
    }

    proptest! {
        #[test]
        fn log_exp_round_trip(seed in any::<u64>(), n in 1usize..5, logcond in 0.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(&mut rng, n, 10f64.powf(logcond));
            let back = matfun_spd(&matfun_spd(&a, MatFun::Log).unwrap(), MatFun::Exp).unwrap();
            prop_assert!(back.sub(&a).max_abs() <= 1e-9 * a.max_abs());
        }

        #[test]
        fn sqrt_squares_back(seed in any::<u64>(), n in 1usize..5, logcond in 0.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(&mut rng, n, 10f64.powf(logcond));
            let r = matfun_spd(&a, MatFun::Sqrt).unwrap().to_full();
            let sq = r.dot(&r) - a.to_full();
            prop_assert!(max_abs(&sq) <= 1e-10 * a.max_abs());
            let is = matfun_spd(&a, MatFun::InvSqrt).unwrap().to_full();
            let id = is.dot(&r) - Array2::<f64>::eye(n);
            prop_assert!(max_abs(&id) <= 1e-8);
        }
    }
}
