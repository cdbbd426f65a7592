use ndarray::Array2;

use super::chart::{packed_coords, unpack_coords};
use super::{Chart, ManifoldDescriptor, Point, Tangent};
use crate::error::Result;
use crate::linalg::{congruence, eig_sym, sym_basis, sym_basis_pairs};

/// Curvature weight: `sinh(sqrt(-k))/sqrt(-k)` for `k < 0`, `1` at zero and
/// `sin(sqrt(k))/sqrt(k)` for `k > 0`.
pub fn beta(kappa: f64) -> f64 {
    if kappa.abs() < 1e-8 {
        1.0 - kappa / 6.0 + kappa * kappa / 120.0
    } else if kappa < 0.0 {
        let r = (-kappa).sqrt();
        r.sinh() / r
    } else {
        let r = kappa.sqrt();
        r.sin() / r
    }
}

/// Orthonormal eigenframe of `Theta -> R_q(Theta, v) v` in ambient form.
#[derive(Debug, Clone)]
pub struct CurvatureFrame {
    pub vectors: Vec<Tangent>,
    pub kappas: Vec<f64>,
    pub beta_sq: Vec<f64>,
}

/// Block-diagonal coordinate form of a curvature frame.
///
/// `blocks[c]` holds, column by column, the canonical coordinates of the frame vectors that
/// live in component `c`. Frame index order is component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrame {
    pub blocks: Vec<Array2<f64>>,
    pub kappas: Vec<f64>,
    pub beta_sq: Vec<f64>,
}

impl BlockFrame {
    /// Frame for the velocity with canonical coordinates `v`.
    pub fn from_coords(descriptor: &ManifoldDescriptor, v: &[f64]) -> Result<Self> {
        let (base, m) = descriptor.components();
        let bdim = base.dim();
        let mut blocks = Vec::with_capacity(m);
        let mut kappas = Vec::with_capacity(m * bdim);
        for c in 0..m {
            let vc = &v[c * bdim..(c + 1) * bdim];
            match base {
                ManifoldDescriptor::Euclidean { d } => {
                    blocks.push(Array2::eye(*d));
                    kappas.extend(std::iter::repeat_n(0.0, *d));
                }
                ManifoldDescriptor::Spd { n } => {
                    let w = unpack_coords(*n, vc);
                    let eig = eig_sym(&w)?;
                    let theta = &eig.values;
                    let mut block = Array2::zeros((bdim, bdim));
                    for (l, (e, (a, b))) in sym_basis(*n).iter().zip(sym_basis_pairs(*n)).enumerate() {
                        let rotated = congruence(&eig.vectors, e);
                        for (j, x) in packed_coords(&rotated).into_iter().enumerate() {
                            block[[j, l]] = x;
                        }
                        kappas.push(if a == b { 0.0 } else { -0.25 * (theta[a] - theta[b]).powi(2) });
                    }
                    blocks.push(block);
                }
                ManifoldDescriptor::Power { .. } => unreachable!("validated nesting"),
            }
        }
        let beta_sq = kappas.iter().map(|&k| beta(k).powi(2)).collect();
        Ok(BlockFrame { blocks, kappas, beta_sq })
    }

    pub fn dim(&self) -> usize {
        self.kappas.len()
    }

    /// Canonical coordinates of frame vector `l`.
    pub fn vector_coords(&self, l: usize) -> Vec<f64> {
        let bdim = self.blocks[0].nrows();
        let (c, local) = (l / bdim, l % bdim);
        let mut out = vec![0.0; self.dim()];
        for j in 0..bdim {
            out[c * bdim + j] = self.blocks[c][[j, local]];
        }
        out
    }

    /// Frame coordinates `(x, Theta^l)` of a vector given in canonical coordinates.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let bdim = self.blocks[0].nrows();
        let mut out = vec![0.0; self.dim()];
        for (c, block) in self.blocks.iter().enumerate() {
            let xs = &x[c * bdim..(c + 1) * bdim];
            for l in 0..bdim {
                let mut acc = 0.0;
                for j in 0..bdim {
                    acc += xs[j] * block[[j, l]];
                }
                out[c * bdim + l] = acc;
            }
        }
        out
    }
}

/// Eigenframe of the curvature operator along `v` at `q`.
///
/// On SPD components, with `q^{-1/2} v q^{-1/2} = U diag(theta) U^T`, the frame vectors are
/// `q^{1/2} U E U^T q^{1/2}` over the symmetric basis `E`, with eigenvalue
/// `-(theta_a - theta_b)^2 / 4` for the off-diagonal element `(a, b)` and zero otherwise.
pub fn curvature_frame(q: &Point, v: &Tangent) -> Result<CurvatureFrame> {
    let chart = Chart::at(q)?;
    let coords = chart.coords(v)?;
    let frame = BlockFrame::from_coords(q.descriptor(), &coords)?;
    let vectors = (0..frame.dim()).map(|l| chart.from_coords(&frame.vector_coords(l))).collect();
    Ok(CurvatureFrame { vectors, kappas: frame.kappas, beta_sq: frame.beta_sq })
}
