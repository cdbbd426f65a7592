//! Euclidean building blocks on coordinate matrices: the tangent-space lift of a dataset,
//! Lloyd K-means and Ding-style semi-NMF.

mod kmeans;
mod semi_nmf;

pub use kmeans::{kmeans, KMeansResult};
pub use semi_nmf::{ding_step, least_squares_factor, semi_nmf, SemiNmfResult};

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{Chart, Element, ManifoldDescriptor, Point, Tangent};

/// Orthonormal basis of a tangent space, expressed against the canonical basis.
///
/// `None` is the canonical basis itself. A mixed basis stores one orthogonal matrix per
/// manifold component whose columns are the canonical coordinates of the basis vectors, so
/// every basis vector stays supported on a single component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TangentBasis {
    mixing: Option<Vec<Array2<f64>>>,
}

impl TangentBasis {
    pub fn canonical() -> Self {
        TangentBasis { mixing: None }
    }

    pub fn mixed(descriptor: &ManifoldDescriptor, blocks: Vec<Array2<f64>>) -> Result<Self> {
        let (base, m) = descriptor.components();
        let b = base.dim();
        if blocks.len() != m {
            return Err(Error::ShapeMismatch(format!("expected {m} mixing blocks, got {}", blocks.len())));
        }
        for block in &blocks {
            if block.dim() != (b, b) {
                return Err(Error::ShapeMismatch(format!("mixing block must be {b}x{b}")));
            }
            let defect = block.t().dot(block) - Array2::<f64>::eye(b);
            if defect.iter().any(|x| x.abs() > 1e-10) {
                return Err(Error::InvalidInput("mixing block is not orthogonal".into()));
            }
        }
        Ok(TangentBasis { mixing: Some(blocks) })
    }

    pub fn is_canonical(&self) -> bool {
        self.mixing.is_none()
    }

    /// Basis coordinates from canonical coordinates.
    pub fn to_basis(&self, canonical: &[f64]) -> Vec<f64> {
        match &self.mixing {
            None => canonical.to_vec(),
            Some(blocks) => {
                let b = blocks[0].nrows();
                let mut out = vec![0.0; canonical.len()];
                for (c, r) in blocks.iter().enumerate() {
                    for j in 0..b {
                        out[c * b + j] = (0..b).map(|m| r[[m, j]] * canonical[c * b + m]).sum();
                    }
                }
                out
            }
        }
    }

    /// Canonical coordinates from basis coordinates.
    pub fn to_canonical(&self, coords: ArrayView1<f64>) -> Vec<f64> {
        match &self.mixing {
            None => coords.to_vec(),
            Some(blocks) => {
                let b = blocks[0].nrows();
                let mut out = vec![0.0; coords.len()];
                for (c, r) in blocks.iter().enumerate() {
                    for m in 0..b {
                        out[c * b + m] = (0..b).map(|j| r[[m, j]] * coords[c * b + j]).sum();
                    }
                }
                out
            }
        }
    }

    /// Per-component mixing block (identity for the canonical basis).
    pub fn block(&self, c: usize, size: usize) -> Array2<f64> {
        match &self.mixing {
            None => Array2::eye(size),
            Some(blocks) => blocks[c].clone(),
        }
    }

    /// The basis vectors at `chart`'s base point.
    pub fn vectors(&self, chart: &Chart) -> Vec<Tangent> {
        let d = chart.dim();
        (0..d)
            .map(|j| {
                let mut e = ndarray::Array1::zeros(d);
                e[j] = 1.0;
                chart.from_coords(&self.to_canonical(e.view()))
            })
            .collect()
    }
}

/// Coordinates of log-mapped data: row `i` holds `(log_q x_i, phi_j)_q`.
#[derive(Debug, Clone)]
pub struct CoordMatrix {
    pub values: Array2<f64>,
    pub basepoint: Point,
    pub basis: TangentBasis,
}

impl CoordMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Canonical coordinates of `log_q x` for each datum, computed in parallel.
pub(crate) fn canonical_log_coords(chart: &Chart, data: &[Point]) -> Result<Array2<f64>> {
    let d = chart.dim();
    let rows: Vec<Vec<f64>> = data
        .par_iter()
        .map(|x| {
            let parts = chart.log_whitened(x)?;
            let mut row = Vec::with_capacity(d);
            for p in &parts {
                match p {
                    Element::Vector(v) => row.extend_from_slice(v),
                    Element::Sym(w) => row.extend(crate::manifold::packed_coords(w)),
                    Element::Product(_) => unreachable!("validated nesting"),
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((data.len(), d));
    for (i, row) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&ArrayView1::from(&row));
    }
    Ok(out)
}

pub(crate) fn check_dataset(data: &[Point], q: &Point) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    if let Some(x) = data.iter().find(|x| x.descriptor() != q.descriptor()) {
        return Err(Error::ShapeMismatch(format!(
            "datum on {:?} but base point on {:?}",
            x.descriptor(),
            q.descriptor()
        )));
    }
    Ok(())
}

/// Coordinate matrix in the canonical orthonormal basis at `q`.
pub fn coordinate_matrix(data: &[Point], q: &Point) -> Result<CoordMatrix> {
    coordinate_matrix_in(data, q, &TangentBasis::canonical())
}

pub fn coordinate_matrix_in(data: &[Point], q: &Point, basis: &TangentBasis) -> Result<CoordMatrix> {
    check_dataset(data, q)?;
    let chart = Chart::at(q)?;
    let mut values = canonical_log_coords(&chart, data)?;
    if !basis.is_canonical() {
        for mut row in values.rows_mut() {
            let mixed = basis.to_basis(row.as_slice().expect("standard layout"));
            row.assign(&ArrayView1::from(&mixed));
        }
    }
    Ok(CoordMatrix { values, basepoint: q.clone(), basis: basis.clone() })
}

/// `||a - b||_F^2`.
pub(crate) fn frobenius_dist_sq(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}
