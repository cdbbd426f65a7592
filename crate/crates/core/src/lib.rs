//! Nonnegative factorization of manifold-valued data.
//!
//! The crate provides the SPD / power-manifold geometry kernel, tangent-space (T-NMDF) and
//! curvature corrected (CC-NMDF) factorizations, error metrics, tensor-field I/O and glyph
//! rendering. The `nmdf` binary drives the whole pipeline from the command line.

pub mod cli;
pub mod error;
pub mod euclid;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod nmdf;
pub mod synth;

pub use error::{Error, Result};
