//! Reconstruction errors of a factorization and the diagnostics built on them.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euclid::{canonical_log_coords, check_dataset, frobenius_dist_sq, TangentBasis};
use crate::manifold::{self, Chart, Point};
use crate::nmdf::{self, build_workspace_in, cc_objective, Factorization, Method, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rank: usize,
    /// `sqrt(sum_i dist(x^i, exp_q(sum_k H_ik Xi^k))^2)`.
    pub exact: f64,
    pub tangent: f64,
    pub cc: f64,
    pub wall_time_s: f64,
}

/// Fitted model in canonical coordinates, detached from rendering.
struct Model<'a> {
    q: &'a Point,
    basis: &'a TangentBasis,
    h: &'a Array2<f64>,
    f: &'a Array2<f64>,
}

impl<'a> Model<'a> {
    fn of(fac: &'a Factorization) -> Self {
        Model { q: &fac.basepoint, basis: &fac.basis, h: &fac.h, f: &fac.f }
    }

    fn canonical_reconstruction(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut recon = h.dot(self.f);
        if !self.basis.is_canonical() {
            for mut row in recon.rows_mut() {
                let c = self.basis.to_canonical(row.view());
                row.assign(&ndarray::ArrayView1::from(&c));
            }
        }
        recon
    }

    fn check(&self, data: &[Point]) -> Result<()> {
        check_dataset(data, self.q)?;
        if self.h.nrows() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "factorization has {} coefficient rows for {} data",
                self.h.nrows(),
                data.len()
            )));
        }
        Ok(())
    }

    fn exact(&self, data: &[Point], h: &Array2<f64>) -> Result<f64> {
        let chart = Chart::at(self.q)?;
        let recon = self.canonical_reconstruction(h);
        let terms: Vec<f64> = data
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let y = chart.exp(&chart.from_coords(recon.row(i).as_slice().expect("contiguous")))?;
                Ok(manifold::dist(x, &y)?.powi(2))
            })
            .collect::<Result<_>>()?;
        Ok(terms.iter().sum::<f64>().sqrt())
    }

    fn tangent(&self, data: &[Point], h: &Array2<f64>) -> Result<f64> {
        let chart = Chart::at(self.q)?;
        let m = canonical_log_coords(&chart, data)?;
        Ok(frobenius_dist_sq(&m, &self.canonical_reconstruction(h)).sqrt())
    }

    fn cc(&self, data: &[Point], h: &Array2<f64>) -> Result<f64> {
        let w = build_workspace_in(data, self.q, self.basis)?;
        Ok(cc_objective(h, self.f, &w)?.max(0.0).sqrt())
    }
}

/// Root-sum-square manifold distance between the data and their reconstructions.
pub fn exact_error(data: &[Point], fac: &Factorization) -> Result<f64> {
    let m = Model::of(fac);
    m.check(data)?;
    m.exact(data, m.h)
}

/// `sqrt(sum_i ||sum_k H_ik Xi^k - log_q x^i||_q^2)`.
pub fn tangent_error(data: &[Point], fac: &Factorization) -> Result<f64> {
    let m = Model::of(fac);
    m.check(data)?;
    m.tangent(data, m.h)
}

/// Square root of the curvature-corrected objective, with frames rebuilt from the data.
pub fn cc_error(data: &[Point], fac: &Factorization) -> Result<f64> {
    let m = Model::of(fac);
    m.check(data)?;
    m.cc(data, m.h)
}

/// All three errors; `wall_time_s` is left at zero.
pub fn error_report(data: &[Point], fac: &Factorization) -> Result<ErrorReport> {
    let m = Model::of(fac);
    m.check(data)?;
    Ok(ErrorReport {
        rank: fac.rank(),
        exact: m.exact(data, m.h)?,
        tangent: m.tangent(data, m.h)?,
        cc: m.cc(data, m.h)?,
        wall_time_s: 0.0,
    })
}

/// `round(linspace(2, 35, 12))`.
pub fn default_ranks() -> Vec<usize> {
    linspace_ranks(2, 35, 12)
}

/// `count` integers rounded from an even grid over `[lo, hi]`, duplicates removed.
pub fn linspace_ranks(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = if count <= 1 {
        vec![lo]
    } else {
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                (lo as f64 + t * (hi as f64 - lo as f64)).round() as usize
            })
            .collect()
    };
    out.dedup();
    out
}

/// Outcome of one rank in a sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub rank: usize,
    pub result: Result<ErrorReport>,
}

/// Fits `method` at every rank with the same parameters and records the errors; a failing
/// rank is recorded and the sweep moves on.
pub fn rank_sweep(data: &[Point], q: &Point, ranks: &[usize], method: Method, params: &Params) -> Vec<SweepEntry> {
    ranks
        .iter()
        .map(|&rank| {
            let start = Instant::now();
            let result = fit(data, q, rank, method, params).and_then(|fac| {
                let mut report = error_report(data, &fac)?;
                report.wall_time_s = start.elapsed().as_secs_f64();
                Ok(report)
            });
            if let Err(e) = &result {
                log::warn!("rank {rank} failed: {e}");
            }
            SweepEntry { rank, result }
        })
        .collect()
}

pub fn fit(data: &[Point], q: &Point, rank: usize, method: Method, params: &Params) -> Result<Factorization> {
    match method {
        Method::TNmdf => nmdf::t_nmdf_in(data, q, rank, params, &TangentBasis::canonical()),
        Method::CcNmdf => nmdf::cc_nmdf(data, q, rank, params),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub scale: f64,
    /// Tangent error of the scaled problem.
    pub epsilon: f64,
    pub exact: f64,
    pub cc: f64,
    pub tangent: f64,
    /// `|exact^2 - cc^2|`.
    pub cc_gap: f64,
    /// `|exact^2 - tangent^2|`.
    pub tangent_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan {
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of `log cc_gap` against `log epsilon`.
    pub cc_slope: Option<f64>,
    pub tangent_slope: Option<f64>,
}

/// Shrinks the data toward the base point, `x^i(s) = exp_q(s log_q x^i)`, together with the
/// coefficients (`H -> s H`), and compares the three errors at every scale.
pub fn thm34_scan(data: &[Point], fac: &Factorization, scales: &[f64]) -> Result<Scan> {
    if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::InvalidInput("scales must lie in (0, 1]".into()));
    }
    if scales.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("scales must be sorted in descending order".into()));
    }
    let model = Model::of(fac);
    model.check(data)?;
    let chart = Chart::at(model.q)?;
    let logs: Vec<_> = data.iter().map(|x| chart.log(x)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        let scaled: Vec<Point> = if s == 1.0 {
            data.to_vec()
        } else {
            logs.iter().map(|v| chart.exp(&v.scaled(s))).collect::<Result<_>>()?
        };
        let h = model.h * s;
        let exact = model.exact(&scaled, &h)?;
        let tangent = model.tangent(&scaled, &h)?;
        let cc = model.cc(&scaled, &h)?;
        rows.push(ScanRow {
            scale: s,
            epsilon: tangent,
            exact,
            cc,
            tangent,
            cc_gap: (exact * exact - cc * cc).abs(),
            tangent_gap: (exact * exact - tangent * tangent).abs(),
        });
    }
    let cc_slope = loglog_slope(rows.iter().map(|r| (r.epsilon, r.cc_gap)));
    let tangent_slope = loglog_slope(rows.iter().map(|r| (r.epsilon, r.tangent_gap)));
    Ok(Scan { rows, cc_slope, tangent_slope })
}

/// Least-squares slope in log-log space over the positive, finite pairs; `None` with fewer
/// than two usable points.
pub fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
