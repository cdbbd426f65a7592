use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euclid::{canonical_log_coords, check_dataset, TangentBasis};
use crate::manifold::{BlockFrame, Chart, Point};

/// Per-datum curvature frames and the quantities the curvature-corrected objective needs.
///
/// Frames are block-diagonal over power-manifold components, so every `d x d` quantity is
/// kept as one `b x b` block per component (`b` the component dimension).
#[derive(Debug, Clone)]
pub struct CCWorkspace {
    basepoint: Point,
    basis: TangentBasis,
    block_dim: usize,
    /// Data coordinates in the tangent basis, `N x d`.
    pub coords: Array2<f64>,
    pub frames: Vec<BlockFrame>,
    /// `(log_q x^i, Theta^{(i),l})_q`, `N x d`.
    pub data_coords: Array2<f64>,
    /// `overlap[i][c][(j, l)] = (phi^j, Theta^{(i),l})_q` within component `c`.
    overlap: Vec<Vec<Array2<f64>>>,
    /// `O diag(beta^2) O^T` per datum and component.
    weighted: Vec<Vec<Array2<f64>>>,
    /// `O diag(beta^2) data_coords_i` per datum, length `d`.
    weighted_rhs: Array2<f64>,
}

impl CCWorkspace {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn basepoint(&self) -> &Point {
        &self.basepoint
    }

    pub fn basis(&self) -> &TangentBasis {
        &self.basis
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn n_blocks(&self) -> usize {
        self.dim() / self.block_dim
    }

    /// `(phi^j, Theta^{(i),l})_q`; zero across components.
    pub fn overlap(&self, i: usize, j: usize, l: usize) -> f64 {
        let b = self.block_dim;
        if j / b != l / b {
            return 0.0;
        }
        self.overlap[i][j / b][[j % b, l % b]]
    }

    pub(crate) fn weighted_block(&self, i: usize, c: usize) -> &Array2<f64> {
        &self.weighted[i][c]
    }

    pub(crate) fn weighted_rhs(&self, i: usize) -> ArrayView1<'_, f64> {
        self.weighted_rhs.row(i)
    }

    /// Frame coordinates of a tangent vector given by its basis coordinates, for datum `i`.
    pub fn frame_coords(&self, i: usize, x: ArrayView1<f64>) -> Array1<f64> {
        let b = self.block_dim;
        let mut out = Array1::zeros(self.dim());
        for (c, o) in self.overlap[i].iter().enumerate() {
            let xs = x.slice(ndarray::s![c * b..(c + 1) * b]);
            out.slice_mut(ndarray::s![c * b..(c + 1) * b]).assign(&o.t().dot(&xs));
        }
        out
    }
}

/// Builds the curvature frame of every `log_q x^i` and the derived weights, in parallel over
/// data.
pub fn build_workspace(data: &[Point], q: &Point) -> Result<CCWorkspace> {
    build_workspace_in(data, q, &TangentBasis::canonical())
}

pub fn build_workspace_in(data: &[Point], q: &Point, basis: &TangentBasis) -> Result<CCWorkspace> {
    check_dataset(data, q)?;
    let chart = Chart::at(q)?;
    let canonical = canonical_log_coords(&chart, data)?;
    let desc = q.descriptor();
    let (base, m) = desc.components();
    let b = base.dim();
    let d = desc.dim();
    let n = data.len();
    let mixing: Vec<Array2<f64>> = (0..m).map(|c| basis.block(c, b)).collect();

    struct Row {
        frame: BlockFrame,
        coords: Vec<f64>,
        data_coords: Vec<f64>,
        overlap: Vec<Array2<f64>>,
        weighted: Vec<Array2<f64>>,
        rhs: Vec<f64>,
    }

    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = canonical.row(i).to_vec();
            let frame = BlockFrame::from_coords(desc, &v)?;
            let data_coords = frame.project(&v);
            let coords = basis.to_basis(&v);
            let mut overlap = Vec::with_capacity(m);
            let mut weighted = Vec::with_capacity(m);
            let mut rhs = vec![0.0; d];
            for c in 0..m {
                let o = mixing[c].t().dot(&frame.blocks[c]);
                let w2 = ArrayView1::from(&frame.beta_sq[c * b..(c + 1) * b]);
                let scaled = &o * &w2;
                weighted.push(scaled.dot(&o.t()));
                let dc = ArrayView1::from(&data_coords[c * b..(c + 1) * b]);
                let r = scaled.dot(&dc);
                rhs[c * b..(c + 1) * b].copy_from_slice(r.as_slice().expect("contiguous"));
                overlap.push(o);
            }
            Ok(Row { frame, coords, data_coords, overlap, weighted, rhs })
        })
        .collect::<Result<_>>()?;

    let mut coords = Array2::zeros((n, d));
    let mut data_coords = Array2::zeros((n, d));
    let mut weighted_rhs = Array2::zeros((n, d));
    let mut frames = Vec::with_capacity(n);
    let mut overlap = Vec::with_capacity(n);
    let mut weighted = Vec::with_capacity(n);
    for (i, row) in rows.into_iter().enumerate() {
        coords.row_mut(i).assign(&ArrayView1::from(&row.coords));
        data_coords.row_mut(i).assign(&ArrayView1::from(&row.data_coords));
        weighted_rhs.row_mut(i).assign(&ArrayView1::from(&row.rhs));
        frames.push(row.frame);
        overlap.push(row.overlap);
        weighted.push(row.weighted);
    }
    Ok(CCWorkspace {
        basepoint: q.clone(),
        basis: basis.clone(),
        block_dim: b,
        coords,
        frames,
        data_coords,
        overlap,
        weighted,
        weighted_rhs,
    })
}

pub(crate) fn check_shapes(h: &Array2<f64>, f: &Array2<f64>, w: &CCWorkspace) -> Result<()> {
    if h.nrows() != w.len() || f.ncols() != w.dim() || h.ncols() != f.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "H is {:?} and F is {:?} for {} data of dimension {}",
            h.dim(),
            f.dim(),
            w.len(),
            w.dim()
        )));
    }
    Ok(())
}

/// Curvature-corrected objective
/// `sum_i sum_l beta(kappa_il)^2 ((sum_k H_ik Xi^k - log_q x^i), Theta^{(i),l})^2`.
pub fn cc_objective(h: &Array2<f64>, f: &Array2<f64>, w: &CCWorkspace) -> Result<f64> {
    check_shapes(h, f, w)?;
    let recon = h.dot(f);
    let terms: Vec<f64> = (0..w.len())
        .into_par_iter()
        .map(|i| {
            let model = w.frame_coords(i, recon.row(i));
            let beta_sq = &w.frames[i].beta_sq;
            model.iter().zip(w.data_coords.row(i)).zip(beta_sq).map(|((a, b), w2)| w2 * (a - b) * (a - b)).sum()
        })
        .collect();
    Ok(terms.iter().sum())
}
