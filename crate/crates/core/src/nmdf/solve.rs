use ndarray::{s, Array1, Array2};
use rayon::prelude::*;

use super::workspace::{check_shapes, CCWorkspace};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const EPS: f64 = 1e-12;
/// Refinement sweeps that remove the bias of the Tikhonov shift on nonsingular systems.
const REFINE_STEPS: usize = 3;

/// Controls for the factor linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Tikhonov shift; `None` uses `1e-10 * trace(A) / (K d)`.
    pub reg: Option<f64>,
    /// Largest per-component system that is assembled and factorized directly.
    pub dense_limit: usize,
    pub cg_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { reg: None, dense_limit: 4096, cg_tol: 1e-10 }
    }
}

fn check_coefficients(h: &Array2<f64>) -> Result<()> {
    if h.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidInput("coefficients must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Minimizes the curvature-corrected objective over `F` for fixed `H`.
pub fn update_factors(h: &Array2<f64>, w: &CCWorkspace, reg: Option<f64>) -> Result<Array2<f64>> {
    update_factors_with(h, w, &SolverOptions { reg, ..SolverOptions::default() })
}

/// The normal equations split into one independent system per manifold component, since
/// every frame is block-diagonal. Component `c` solves
/// `sum_i (H_i^T H_i) (x) P_ic  vec(F_c) = sum_i H_i^T (x) r_ic`.
pub fn update_factors_with(h: &Array2<f64>, w: &CCWorkspace, opts: &SolverOptions) -> Result<Array2<f64>> {
    if h.nrows() != w.len() {
        return Err(Error::ShapeMismatch(format!("H has {} rows for {} data", h.nrows(), w.len())));
    }
    check_coefficients(h)?;
    let k = h.ncols();
    let b = w.block_dim();
    let nb = w.n_blocks();
    let d = w.dim();

    let diags: Vec<Array1<f64>> = (0..nb).into_par_iter().map(|c| block_diagonal(h, w, c)).collect();
    let trace: f64 = diags.iter().map(|g| g.sum()).sum();
    if !(trace > 0.0) {
        return Err(Error::InvalidInput("factor system is zero; coefficients vanish".into()));
    }
    let lambda = opts.reg.unwrap_or(1e-10 * trace / (k * d) as f64);

    let solutions: Vec<Array1<f64>> = (0..nb)
        .into_par_iter()
        .map(|c| {
            let rhs = block_rhs(h, w, c);
            let b_norm = rhs.dot(&rhs).sqrt();
            if k * b <= opts.dense_limit {
                let a = assemble_block(h, w, c);
                let mut shifted = a.clone();
                for j in 0..k * b {
                    shifted[[j, j]] += lambda;
                }
                if let Some(l) = Cholesky::new(&shifted) {
                    let mut x = l.solve(&rhs);
                    for _ in 0..REFINE_STEPS {
                        let r = &rhs - &a.dot(&x);
                        if r.dot(&r).sqrt() <= 1e-15 * b_norm {
                            break;
                        }
                        x += &l.solve(&r);
                    }
                    return Ok(x);
                }
                log::debug!("Cholesky failed on component {c}; falling back to CG");
            }
            let cg = |r: &Array1<f64>| conjugate_gradient(h, w, c, lambda, &diags[c], r, opts.cg_tol, 10 * k * d);
            let mut x = cg(&rhs)?;
            for _ in 0..REFINE_STEPS {
                let r = &rhs - &apply_block(h, w, c, 0.0, &x);
                if r.dot(&r).sqrt() <= opts.cg_tol * b_norm {
                    break;
                }
                x += &cg(&r)?;
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let mut f = Array2::zeros((k, d));
    for (c, x) in solutions.iter().enumerate() {
        for kk in 0..k {
            f.slice_mut(s![kk, c * b..(c + 1) * b]).assign(&x.slice(s![kk * b..(kk + 1) * b]));
        }
    }
    Ok(f)
}

fn block_diagonal(h: &Array2<f64>, w: &CCWorkspace, c: usize) -> Array1<f64> {
    let (k, b) = (h.ncols(), w.block_dim());
    let mut g = Array1::zeros(k * b);
    for i in 0..w.len() {
        let p = w.weighted_block(i, c);
        for kk in 0..k {
            let h2 = h[[i, kk]] * h[[i, kk]];
            for j in 0..b {
                g[kk * b + j] += h2 * p[[j, j]];
            }
        }
    }
    g
}

fn block_rhs(h: &Array2<f64>, w: &CCWorkspace, c: usize) -> Array1<f64> {
    let (k, b) = (h.ncols(), w.block_dim());
    let mut rhs = Array1::zeros(k * b);
    for i in 0..w.len() {
        let r = w.weighted_rhs(i);
        let r = r.slice(s![c * b..(c + 1) * b]);
        for kk in 0..k {
            let hik = h[[i, kk]];
            if hik != 0.0 {
                rhs.slice_mut(s![kk * b..(kk + 1) * b]).scaled_add(hik, &r);
            }
        }
    }
    rhs
}

fn assemble_block(h: &Array2<f64>, w: &CCWorkspace, c: usize) -> Array2<f64> {
    let (k, b) = (h.ncols(), w.block_dim());
    let mut a = Array2::zeros((k * b, k * b));
    for i in 0..w.len() {
        let p = w.weighted_block(i, c);
        for k1 in 0..k {
            for k2 in 0..k {
                let s = h[[i, k1]] * h[[i, k2]];
                if s != 0.0 {
                    a.slice_mut(s![k1 * b..(k1 + 1) * b, k2 * b..(k2 + 1) * b]).scaled_add(s, p);
                }
            }
        }
    }
    a
}

/// `A_c x` without forming `A_c`.
fn apply_block(h: &Array2<f64>, w: &CCWorkspace, c: usize, lambda: f64, x: &Array1<f64>) -> Array1<f64> {
    let (k, b) = (h.ncols(), w.block_dim());
    let xm = x.view().into_shape_with_order((k, b)).expect("k*b entries");
    let mut y = Array2::<f64>::zeros((k, b));
    for i in 0..w.len() {
        let hi = h.row(i);
        let t = hi.dot(&xm);
        let u = w.weighted_block(i, c).dot(&t);
        for kk in 0..k {
            if hi[kk] != 0.0 {
                y.row_mut(kk).scaled_add(hi[kk], &u);
            }
        }
    }
    let mut y = y.into_shape_with_order(k * b).expect("k*b entries");
    y.scaled_add(lambda, x);
    y
}

#[allow(clippy::too_many_arguments)]
fn conjugate_gradient(
    h: &Array2<f64>,
    w: &CCWorkspace,
    c: usize,
    lambda: f64,
    diag: &Array1<f64>,
    rhs: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array1<f64>> {
    let precond = diag.mapv(|g| {
        let g = g + lambda;
        if g > 0.0 {
            1.0 / g
        } else {
            1.0
        }
    });
    let b_norm = rhs.dot(rhs).sqrt();
    let mut x = Array1::zeros(rhs.len());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut z = &r * &precond;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut res = b_norm;
    for _ in 0..max_iter {
        let ap = apply_block(h, w, c, lambda, &p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        res = r.dot(&r).sqrt();
        if res <= tol * b_norm {
            return Ok(x);
        }
        z = &r * &precond;
        let rz_next = r.dot(&z);
        p = &z + &(rz_next / rz * &p);
        rz = rz_next;
    }
    let reduction = res / b_norm;
    if reduction > 1e-2 {
        return Err(Error::SolverFailure(format!("CG on component {c} reduced the residual only to {reduction:.3e}")));
    }
    log::warn!("CG on component {c} stopped at relative residual {reduction:.3e}");
    Ok(x)
}

/// One multiplicative coefficient step for fixed `F`.
///
/// Row `i` of the objective is the quadratic `h G_i h^T - 2 h V_i + const` with
/// `G_i = F P_i F^T` and `V_i = F r_i`; the update splits `G_i` and `V_i` into positive and
/// negative parts so that it decreases every row, and it is stationary exactly where
/// `h G_i = V_i`.
pub fn update_coefficients(h: &Array2<f64>, f: &Array2<f64>, w: &CCWorkspace) -> Result<Array2<f64>> {
    check_shapes(h, f, w)?;
    check_coefficients(h)?;
    let k = h.ncols();
    let b = w.block_dim();
    let blocks: Vec<Array2<f64>> = (0..w.n_blocks()).map(|c| f.slice(s![.., c * b..(c + 1) * b]).to_owned()).collect();
    let rows: Vec<Array1<f64>> = (0..w.len())
        .into_par_iter()
        .map(|i| {
            let mut g = Array2::<f64>::zeros((k, k));
            for (c, fc) in blocks.iter().enumerate() {
                let fp = fc.dot(w.weighted_block(i, c));
                g += &fp.dot(&fc.t());
            }
            let v = f.dot(&w.weighted_rhs(i));
            let hi = h.row(i);
            let g_pos = g.mapv(|x| x.max(0.0));
            let g_neg = g.mapv(|x| (-x).max(0.0));
            let hp = hi.dot(&g_pos);
            let hn = hi.dot(&g_neg);
            Array1::from_shape_fn(k, |kk| {
                let num = v[kk].max(0.0) + hn[kk] + EPS;
                let den = (-v[kk]).max(0.0) + hp[kk] + EPS;
                hi[kk] * (num / den).sqrt()
            })
        })
        .collect();
    let mut out = Array2::zeros(h.dim());
    for (i, row) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}
