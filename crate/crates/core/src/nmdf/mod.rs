//! Nonnegative manifold data factorization: the tangent-space variant (T-NMDF) and the
//! curvature-corrected one (CC-NMDF), plus the rendering of manifold-valued factors.

mod solve;
mod workspace;

pub use solve::{update_coefficients, update_factors, update_factors_with, SolverOptions};
pub use workspace::{build_workspace, build_workspace_in, cc_objective, CCWorkspace};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euclid::{coordinate_matrix_in, kmeans, semi_nmf, TangentBasis};
use crate::manifold::{Chart, Point, Tangent};

/// Norm below which a tangent factor counts as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TNmdf,
    CcNmdf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TNmdf => "t-nmdf",
            Method::CcNmdf => "cc-nmdf",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t-nmdf" => Ok(Method::TNmdf),
            "cc-nmdf" => Ok(Method::CcNmdf),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

/// Iteration budget and initialization controls. T-NMDF uses `max_iter` semi-NMF
/// iterations and ignores `delta` and `max_sub_iter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub delta: f64,
    pub max_iter: usize,
    pub max_sub_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params { delta: 0.1, max_iter: 50, max_sub_iter: 5, restarts: 10, seed: 0 }
    }
}

/// A fitted factorization with its rendered tangent and manifold-valued factors.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub method: Method,
    pub params: Params,
    pub basepoint: Point,
    pub basis: TangentBasis,
    /// `N x K`, nonnegative.
    pub h: Array2<f64>,
    /// `K x d` tangent factor coordinates.
    pub f: Array2<f64>,
    /// Tangent factors `Xi^k`.
    pub xi: Vec<Tangent>,
    /// Cancellation-corrected coefficients.
    pub h_eff: Array2<f64>,
    /// Rendering coefficients `c_k`.
    pub scales: Vec<f64>,
    /// Manifold-valued factors `exp_q(c_k Xi^k)`.
    pub y: Vec<Point>,
    pub objective_trace: Vec<f64>,
}

impl Factorization {
    /// Derives the tangent and manifold-valued factors from `H` and `F`.
    pub fn assemble(
        method: Method,
        params: Params,
        basepoint: Point,
        basis: TangentBasis,
        h: Array2<f64>,
        f: Array2<f64>,
        objective_trace: Vec<f64>,
    ) -> Result<Self> {
        let d = basepoint.dim();
        if f.ncols() != d || h.ncols() != f.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "H is {:?} and F is {:?} on a {d}-dimensional manifold",
                h.dim(),
                f.dim()
            )));
        }
        if h.iter().chain(f.iter()).any(|x| !x.is_finite()) || h.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput("factorization has negative or non-finite entries".into()));
        }
        let chart = Chart::at(&basepoint)?;
        let xi: Vec<Tangent> = f.rows().into_iter().map(|row| chart.from_coords(&basis.to_canonical(row))).collect();
        let gram = f.dot(&f.t());
        let h_eff = effective_from_gram(&h, &gram, false)?;
        let scales = render_scales(&h_eff);
        let y = xi.iter().zip(&scales).map(|(x, &c)| chart.exp(&x.scaled(c))).collect::<Result<_>>()?;
        Ok(Factorization { method, params, basepoint, basis, h, f, xi, h_eff, scales, y, objective_trace })
    }

    pub fn rank(&self) -> usize {
        self.h.ncols()
    }

    /// Canonical coordinates of the tangent reconstruction of every datum, `N x d`.
    pub fn canonical_reconstruction(&self) -> Array2<f64> {
        let recon = self.h.dot(&self.f);
        if self.basis.is_canonical() {
            return recon;
        }
        let mut out = recon.clone();
        for (mut row, src) in out.rows_mut().into_iter().zip(recon.rows()) {
            row.assign(&ndarray::ArrayView1::from(&self.basis.to_canonical(src)));
        }
        out
    }
}

fn check_rank(n: usize, d: usize, k: usize) -> Result<()> {
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidInput(format!("rank {k} outside 1..={}", n.min(d))));
    }
    Ok(())
}

/// Tangent-space factorization: semi-NMF of the log-mapped coordinate matrix.
pub fn t_nmdf(data: &[Point], q: &Point, k: usize, iters: usize, seed: u64) -> Result<Factorization> {
    let params = Params { max_iter: iters, seed, ..Params::default() };
    t_nmdf_in(data, q, k, &params, &TangentBasis::canonical())
}

pub fn t_nmdf_in(data: &[Point], q: &Point, k: usize, params: &Params, basis: &TangentBasis) -> Result<Factorization> {
    let m = coordinate_matrix_in(data, q, basis)?;
    check_rank(m.nrows(), m.ncols(), k)?;
    let res = semi_nmf(m.values.view(), k, params.max_iter, None, params.seed)?;
    Factorization::assemble(Method::TNmdf, *params, q.clone(), basis.clone(), res.h, res.f, res.objective_trace)
}

/// K-means initialization with every zero of the indicator raised to `delta`, rows
/// normalized to sum to one. Returns `(h0, f0)` with `f0` the centroids.
pub fn init_cc(data: &[Point], q: &Point, k: usize, delta: f64, seed: u64) -> Result<(Array2<f64>, Array2<f64>)> {
    let m = coordinate_matrix_in(data, q, &TangentBasis::canonical())?;
    init_from_coords(m.values.view(), k, delta, Params::default().restarts, seed)
}

pub fn init_from_coords(
    m: ArrayView2<f64>,
    k: usize,
    delta: f64,
    restarts: usize,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    check_rank(m.nrows(), m.ncols(), k)?;
    let km = kmeans(m, k, restarts, seed)?;
    let mut h0 = km.indicator.mapv(|x| if x == 0.0 { delta } else { x });
    for mut row in h0.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok((h0, km.centroids))
}

/// Alternating minimization of the curvature-corrected objective from `h0`: every outer
/// round solves for `F` and then takes `max_sub_iter` coefficient steps. Returns
/// `(H, F, objective after each round)`.
pub fn cc_iterate(
    w: &CCWorkspace,
    h0: Array2<f64>,
    params: &Params,
    solver: &SolverOptions,
) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    if params.max_iter == 0 {
        return Err(Error::InvalidInput("at least one outer iteration is required".into()));
    }
    let mut h = h0;
    let mut f = Array2::zeros((h.ncols(), w.dim()));
    let mut trace = Vec::with_capacity(params.max_iter);
    for round in 0..params.max_iter {
        f = update_factors_with(&h, w, solver)?;
        for _ in 0..params.max_sub_iter {
            h = update_coefficients(&h, &f, w)?;
        }
        let obj = cc_objective(&h, &f, w)?;
        if let Some(&prev) = trace.last() {
            if obj > prev * (1.0 + 1e-6) {
                log::debug!("objective rose in round {round}: {prev} -> {obj}");
            }
        }
        trace.push(obj);
    }
    Ok((h, f, trace))
}

/// Curvature-corrected factorization with default solver settings in the canonical basis.
pub fn cc_nmdf(data: &[Point], q: &Point, k: usize, params: &Params) -> Result<Factorization> {
    cc_nmdf_in(data, q, k, params, &TangentBasis::canonical(), &SolverOptions::default())
}

pub fn cc_nmdf_in(
    data: &[Point],
    q: &Point,
    k: usize,
    params: &Params,
    basis: &TangentBasis,
    solver: &SolverOptions,
) -> Result<Factorization> {
    let w = build_workspace_in(data, q, basis)?;
    let (h0, _) = init_from_coords(w.coords.view(), k, params.delta, params.restarts, params.seed)?;
    let (h, f, trace) = cc_iterate(&w, h0, params, solver)?;
    Factorization::assemble(Method::CcNmdf, *params, q.clone(), basis.clone(), h, f, trace)
}

fn effective_from_gram(h: &Array2<f64>, gram: &Array2<f64>, strict: bool) -> Result<Array2<f64>> {
    let k = h.ncols();
    let mut out = h.clone();
    for kk in 0..k {
        let nsq = gram[[kk, kk]];
        if nsq.max(0.0).sqrt() <= DEGENERATE_NORM {
            if strict {
                return Err(Error::DegenerateFactor { index: kk, norm: nsq.max(0.0).sqrt() });
            }
            log::warn!("tangent factor {kk} is zero; its coefficients are left uncorrected");
            continue;
        }
        for b in (0..k).filter(|&b| b != kk) {
            let rho = gram[[b, kk]].min(0.0) / nsq;
            if rho != 0.0 {
                for i in 0..h.nrows() {
                    out[[i, kk]] += h[[i, b]] * rho;
                }
            }
        }
    }
    Ok(out)
}

/// Cancellation-corrected coefficients
/// `H^_ik = H_ik + sum_{b != k} H_ib min(0, (Xi^b, Xi^k)) / ||Xi^k||^2`.
pub fn effective_coordinates(h: &Array2<f64>, xi: &[Tangent], q: &Point) -> Result<Array2<f64>> {
    if xi.len() != h.ncols() {
        return Err(Error::ShapeMismatch(format!("{} factors for {} coefficient columns", xi.len(), h.ncols())));
    }
    let chart = Chart::at(q)?;
    let k = xi.len();
    let mut gram = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let v = chart.inner(&xi[a], &xi[b])?;
            gram[[a, b]] = v;
            gram[[b, a]] = v;
        }
    }
    effective_from_gram(h, &gram, true)
}

fn render_scales(h_eff: &Array2<f64>) -> Vec<f64> {
    h_eff
        .columns()
        .into_iter()
        .enumerate()
        .map(|(k, col)| {
            let m = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m < 0.0 {
                log::warn!("factor {k} has negative effective coefficients only; rendered at the base point");
            }
            m.max(0.0)
        })
        .collect()
}

/// Manifold-valued factors `exp_q(c_k Xi^k)` with `c_k = max(0, max_i H^_ik)`.
pub fn manifold_factors(h_eff: &Array2<f64>, xi: &[Tangent], q: &Point) -> Result<Vec<Point>> {
    if xi.len() != h_eff.ncols() {
        return Err(Error::ShapeMismatch(format!("{} factors for {} coefficient columns", xi.len(), h_eff.ncols())));
    }
    let chart = Chart::at(q)?;
    render_scales(h_eff).iter().zip(xi).map(|(&c, x)| chart.exp(&x.scaled(c))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasepointCheck {
    pub ok: bool,
    /// Smallest `(log_q x^a, log_q x^b)_q` over all pairs, diagonal included.
    pub min_inner: f64,
}

/// Whether every pair of log-mapped data has a nonnegative inner product at `q`.
pub fn verify_basepoint(data: &[Point], q: &Point) -> Result<BasepointCheck> {
    let m = coordinate_matrix_in(data, q, &TangentBasis::canonical())?.values;
    let gram = m.dot(&m.t());
    let min_inner = gram.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BasepointCheck { ok: min_inner >= -1e-12, min_inner })
}
