use ndarray::{Array2, ArrayView2};

use super::{frobenius_dist_sq, kmeans};
use crate::error::{Error, Result};
use crate::linalg::pinv_psd;

const DENOM_FLOOR: f64 = 1e-12;
const PINV_RCOND: f64 = 1e-12;
const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone)]
pub struct SemiNmfResult {
    pub h: Array2<f64>,
    pub f: Array2<f64>,
    /// `||M - HF||_F^2` after every iteration.
    pub objective_trace: Vec<f64>,
}

/// Least-squares factor for fixed coefficients: `(H^T H)^+ H^T M`.
pub fn least_squares_factor(m: ArrayView2<f64>, h: &Array2<f64>) -> Array2<f64> {
    let gram = h.t().dot(h);
    pinv_psd(&gram, PINV_RCOND).dot(&h.t().dot(&m))
}

/// One multiplicative coefficient update for fixed `f`.
pub fn ding_step(m: ArrayView2<f64>, h: &Array2<f64>, f: &Array2<f64>) -> Array2<f64> {
    let mft = m.dot(&f.t());
    let fft = f.dot(&f.t());
    let fft_pos = fft.mapv(|x| x.max(0.0));
    let fft_neg = fft.mapv(|x| (-x).max(0.0));
    let h_pos = h.dot(&fft_pos);
    let h_neg = h.dot(&fft_neg);
    let mut out = h.clone();
    for ((i, k), v) in out.indexed_iter_mut() {
        let a = mft[[i, k]];
        let num = a.max(0.0) + h_neg[[i, k]];
        let den = ((-a).max(0.0) + h_pos[[i, k]]).max(DENOM_FLOOR);
        *v *= (num / den).sqrt();
    }
    out
}

fn warn_dead_columns(h: &Array2<f64>) {
    for (k, col) in h.columns().into_iter().enumerate() {
        if col.iter().all(|&x| x < DENOM_FLOOR) {
            log::warn!("semi-NMF coefficient column {k} has died");
        }
    }
}

/// Semi-NMF `M ~ H F` with `H >= 0`, alternating the least-squares factor step and the
/// multiplicative coefficient step.
///
/// Without `h0` the coefficients start at the K-means indicator plus 0.2.
pub fn semi_nmf(
    m: ArrayView2<f64>,
    k: usize,
    iters: usize,
    h0: Option<Array2<f64>>,
    seed: u64,
) -> Result<SemiNmfResult> {
    let (n, d) = m.dim();
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidInput(format!("rank {k} outside 1..={}", n.min(d))));
    }
    if iters == 0 {
        return Err(Error::InvalidInput("semi-NMF needs at least one iteration".into()));
    }
    let mut h = match h0 {
        Some(h0) => {
            if h0.dim() != (n, k) {
                return Err(Error::ShapeMismatch(format!(
                    "initial coefficients are {:?}, expected ({n}, {k})",
                    h0.dim()
                )));
            }
            if h0.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput("initial coefficients must be finite and nonnegative".into()));
            }
            h0
        }
        None => kmeans(m, k, DEFAULT_RESTARTS, seed)?.indicator.mapv(|x| x + 0.2),
    };
    let mut f = Array2::zeros((k, d));
    let mut objective_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        f = least_squares_factor(m, &h);
        h = ding_step(m, &h, &f);
        objective_trace.push(frobenius_dist_sq(&m.to_owned(), &h.dot(&f)));
    }
    warn_dead_columns(&h);
    Ok(SemiNmfResult { h, f, objective_trace })
}
