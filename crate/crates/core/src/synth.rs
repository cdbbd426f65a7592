//! Seeded generators for synthetic manifold data and diffusion-tensor-like fields.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{congruence, eig_sym, packed_len, SymMatrix};
use crate::manifold::{Chart, Element, ManifoldDescriptor, Point, Tangent};

/// Deterministic RNG used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMatrix {
    let upper = (0..packed_len(n)).map(|_| scale * standard_normal(rng)).collect();
    SymMatrix::from_upper(n, upper).expect("finite")
}

/// Random orthogonal matrix (eigenvectors of a random symmetric matrix).
pub fn random_rotation(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    eig_sym(&random_sym(rng, n, 1.0)).expect("finite").vectors
}

/// Random SPD matrix whose eigenvalues are spread log-uniformly over `[1, cond]` times a
/// random overall scale in `[0.5, 2]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, cond: f64) -> SymMatrix {
    let q = random_rotation(rng, n);
    let scale = rng.random_range(0.5..2.0);
    let lambdas: Vec<f64> = (0..n).map(|_| scale * cond.powf(rng.random_range(0.0..1.0))).collect();
    congruence(&q, &SymMatrix::from_diag(&lambdas))
}

/// Random point: Gaussian coordinates for flat parts, SPD with bounded condition otherwise.
pub fn random_point(rng: &mut impl Rng, desc: &ManifoldDescriptor, cond: f64) -> Point {
    fn fill(rng: &mut impl Rng, desc: &ManifoldDescriptor, cond: f64) -> Element {
        match desc {
            ManifoldDescriptor::Euclidean { d } => Element::Vector((0..*d).map(|_| standard_normal(rng)).collect()),
            ManifoldDescriptor::Spd { n } => Element::Sym(random_spd(rng, *n, cond)),
            ManifoldDescriptor::Power { base, m } => Element::Product((0..*m).map(|_| fill(rng, base, cond)).collect()),
        }
    }
    Point::new(desc.clone(), fill(rng, desc, cond)).expect("valid by construction")
}

/// Random tangent vector at `chart`'s base point with Gaussian canonical coordinates.
pub fn random_tangent(rng: &mut impl Rng, chart: &Chart, scale: f64) -> Tangent {
    let coords: Vec<f64> = (0..chart.dim()).map(|_| scale * standard_normal(rng)).collect();
    chart.from_coords(&coords)
}

/// Random tangent vector of exact norm `radius`.
pub fn tangent_of_norm(rng: &mut impl Rng, chart: &Chart, radius: f64) -> Tangent {
    let mut coords: Vec<f64> = (0..chart.dim()).map(|_| standard_normal(rng)).collect();
    let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
    coords.iter_mut().for_each(|x| *x *= radius / norm);
    chart.from_coords(&coords)
}

/// Points `exp_q(v)` with `||v||_q` uniform in `[0, radius]`.
pub fn points_near(rng: &mut impl Rng, q: &Point, count: usize, radius: f64) -> Result<Vec<Point>> {
    let chart = Chart::at(q)?;
    (0..count)
        .map(|_| {
            let r = radius * rng.random_range(0.0..1.0);
            chart.exp(&tangent_of_norm(rng, &chart, r))
        })
        .collect()
}

/// Planted nonnegative mixture: `count` points `exp_q(sum_k h_k xi_k + noise)` with
/// nonnegative random `h` over `k` random tangent factors of norm `factor_norm`.
pub fn planted_mixture(
    rng: &mut impl Rng,
    q: &Point,
    count: usize,
    k: usize,
    factor_norm: f64,
    noise: f64,
) -> Result<Vec<Point>> {
    let chart = Chart::at(q)?;
    let factors: Vec<Tangent> = (0..k).map(|_| tangent_of_norm(rng, &chart, factor_norm)).collect();
    (0..count)
        .map(|_| {
            let mut v = random_tangent(rng, &chart, noise);
            for f in &factors {
                let h: f64 = rng.random_range(0.0..1.0);
                v = v.add(&f.scaled(h * h));
            }
            chart.exp(&v)
        })
        .collect()
}

/// Diffusion-tensor-like SPD(3) voxel: principal direction `dir`, eigenvalues
/// `(l1, l2, l2)` in units of `scale`.
pub fn dti_voxel(dir: [f64; 3], l1: f64, l2: f64, scale: f64) -> SymMatrix {
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let u = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
    let mut m = SymMatrix::zeros(3);
    for a in 0..3 {
        for b in a..3 {
            let iso = if a == b { l2 } else { 0.0 };
            m.set(a, b, scale * (iso + (l1 - l2) * u[a] * u[b]));
        }
    }
    m
}

/// Random DTI-like voxels on `P(3)^m`: a few fiber-direction prototypes blended per point,
/// with jitter. Produces data whose log-maps at a near-zero base point are positively
/// correlated, as in real diffusion data.
pub fn dti_points(rng: &mut impl Rng, count: usize, m: usize, prototypes: usize) -> Result<Vec<Point>> {
    let protos: Vec<Vec<([f64; 3], f64)>> = (0..prototypes)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let dir = [standard_normal(rng), standard_normal(rng), standard_normal(rng)];
                    (dir, rng.random_range(1.5..6.0))
                })
                .collect()
        })
        .collect();
    (0..count)
        .map(|_| {
            let p = &protos[rng.random_range(0..prototypes)];
            let parts = p
                .iter()
                .map(|(dir, aniso)| {
                    let jitter = [
                        dir[0] + 0.3 * standard_normal(rng),
                        dir[1] + 0.3 * standard_normal(rng),
                        dir[2] + 0.3 * standard_normal(rng),
                    ];
                    let scale = 1e-3 * rng.random_range(0.6..1.4);
                    Point::spd(dti_voxel(jitter, *aniso, 1.0, scale))
                })
                .collect::<Result<Vec<_>>>()?;
            Point::power(parts)
        })
        .collect()
}

/// Synthetic diffusion-tensor field: a smoothly rotating in-plane fiber direction with
/// spatially varying anisotropy, per-voxel jitter and DTI-scale magnitudes (about 1e-3).
pub fn dti_field(rng: &mut impl Rng, dims: [usize; 3]) -> Result<crate::io::TensorField> {
    let mut field = crate::io::TensorField::empty(dims, 3)?;
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let (fx, fy, fz) = (x as f64, y as f64, z as f64);
                let theta = 0.35 * fx + 0.2 * fy + 0.15 * standard_normal(rng);
                let dir = [theta.cos(), theta.sin(), 0.3 * (0.5 * fz).cos() + 0.1 * standard_normal(rng)];
                let aniso = 3.0 + 2.0 * (0.3 * fx).sin() * (0.25 * fy).cos();
                let scale = 1e-3 * rng.random_range(0.8..1.2);
                field.set(x, y, z, dti_voxel(dir, aniso, 1.0, scale))?;
            }
        }
    }
    Ok(field)
}
