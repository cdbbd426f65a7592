use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::synth;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index of every row.
    pub labels: Vec<usize>,
    /// `N x K` one-hot indicator matrix.
    pub indicator: Array2<f64>,
    /// `K x d` centroids.
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    /// Inertia of every restart, in restart order.
    pub restart_inertia: Vec<f64>,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd K-means on the rows of `m`, best of `restarts` k-means++ seeded runs.
///
/// Empty clusters are re-seeded with the row farthest from its current centroid.
pub fn kmeans(m: ArrayView2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k-means needs 1 <= k <= N, got k={k}, N={n}")));
    }
    let mut rng = synth::rng(seed);
    let mut best: Option<(Vec<usize>, Array2<f64>, f64)> = None;
    let mut restart_inertia = Vec::with_capacity(restarts.max(1));
    for _ in 0..restarts.max(1) {
        let (labels, centroids, inertia) = lloyd(m, k, &mut rng);
        restart_inertia.push(inertia);
        if best.as_ref().is_none_or(|b| inertia < b.2) {
            best = Some((labels, centroids, inertia));
        }
    }
    let (labels, centroids, inertia) = best.expect("at least one restart");
    let mut indicator = Array2::zeros((n, k));
    for (i, &l) in labels.iter().enumerate() {
        indicator[[i, l]] = 1.0;
    }
    Ok(KMeansResult { labels, indicator, centroids, inertia, restart_inertia })
}

fn plus_plus_init(m: ArrayView2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = m.nrows();
    let mut centroids = Array2::zeros((k, m.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&m.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(m.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&m.row(pick));
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(m.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(m: ArrayView2<f64>, k: usize, rng: &mut impl Rng) -> (Vec<usize>, Array2<f64>, f64) {
    let n = m.nrows();
    let mut centroids = plus_plus_init(m, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for i in 0..n {
            let best = (0..k)
                .map(|c| (c, sq_dist(m.row(i), centroids.row(c))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .expect("k >= 1");
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += &m.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
        let mut reseeded = false;
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n).filter(|&i| counts[labels[i]] > 1).max_by(|&a, &b| {
                    sq_dist(m.row(a), centroids.row(labels[a])).total_cmp(&sq_dist(m.row(b), centroids.row(labels[b])))
                });
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    centroids.row_mut(c).assign(&m.row(i));
                    reseeded = true;
                }
            }
        }
        if reseeded {
            // refresh centroids of the clusters that donated a point
            let mut sums = Array2::<f64>::zeros(centroids.dim());
            for (i, &l) in labels.iter().enumerate() {
                let mut row = sums.row_mut(l);
                row += &m.row(i);
            }
            for c in 0..k {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
        if !changed && !reseeded {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist(m.row(i), centroids.row(labels[i]))).sum();
    (labels, centroids, inertia)
}
