use super::{Chart, Point, Tangent};
use crate::error::{Error, Result};

/// Outcome of the Karcher-mean iteration. `converged` is false when the iteration budget
/// ran out; `point` is then the last iterate.
#[derive(Debug, Clone)]
pub struct Barycenter {
    pub point: Point,
    pub converged: bool,
    pub iterations: usize,
    /// Norm of the mean log-map at `point`.
    pub residual: f64,
}

/// Fixed-point iteration `q <- exp_q(mean_i log_q x_i)` starting at the first datum.
pub fn barycenter(data: &[Point], tol: f64, max_iter: usize) -> Result<Barycenter> {
    let first = data.first().ok_or_else(|| Error::InvalidInput("barycenter of an empty dataset".into()))?;
    let mut q = first.clone();
    let weight = 1.0 / data.len() as f64;
    let mut iterations = 0;
    loop {
        let chart = Chart::at(&q)?;
        let mut mean = Tangent::zeros(q.descriptor());
        for x in data {
            mean = mean.add(&chart.log(x)?.scaled(weight));
        }
        let residual = chart.inner(&mean, &mean)?.max(0.0).sqrt();
        if residual <= tol {
            return Ok(Barycenter { point: q, converged: true, iterations, residual });
        }
        if iterations == max_iter {
            log::warn!("barycenter stopped after {max_iter} iterations (residual {residual:e})");
            return Ok(Barycenter { point: q, converged: false, iterations, residual });
        }
        q = chart.exp(&mean)?;
        iterations += 1;
    }
}
