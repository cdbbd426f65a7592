//! Geometry of the supported data domains: Euclidean space, SPD matrices with the
//! affine-invariant metric, and power manifolds of either.
//!
//! Tangent vectors are stored in ambient form (a vector or a symmetric matrix per
//! component). All maps are evaluated component-wise on power manifolds.

mod chart;
mod curvature;
mod mean;

pub(crate) use chart::packed_coords;
pub use chart::Chart;
pub use curvature::{beta, curvature_frame, BlockFrame, CurvatureFrame};
pub use mean::{barycenter, Barycenter};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, pd_tolerance, SymMatrix};

/// Algebraic description of the data domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifoldDescriptor {
    Euclidean { d: usize },
    Spd { n: usize },
    Power { base: Box<ManifoldDescriptor>, m: usize },
}

impl ManifoldDescriptor {
    pub fn euclidean(d: usize) -> Self {
        ManifoldDescriptor::Euclidean { d }
    }

    pub fn spd(n: usize) -> Self {
        ManifoldDescriptor::Spd { n }
    }

    pub fn power(base: ManifoldDescriptor, m: usize) -> Self {
        ManifoldDescriptor::Power { base: Box::new(base), m }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            ManifoldDescriptor::Euclidean { d } => *d,
            ManifoldDescriptor::Spd { n } => n * (n + 1) / 2,
            ManifoldDescriptor::Power { base, m } => m * base.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldDescriptor::Euclidean { d: 0 } | ManifoldDescriptor::Spd { n: 0 } => {
                Err(Error::InvalidInput("manifold dimension must be positive".into()))
            }
            ManifoldDescriptor::Power { m: 0, .. } => {
                Err(Error::InvalidInput("power manifold needs at least one component".into()))
            }
            ManifoldDescriptor::Power { base, .. } => match **base {
                ManifoldDescriptor::Power { .. } => {
                    Err(Error::InvalidInput("nested power manifolds are not supported".into()))
                }
                _ => base.validate(),
            },
            _ => Ok(()),
        }
    }

    /// The single-component manifold and the number of components.
    pub fn components(&self) -> (&ManifoldDescriptor, usize) {
        match self {
            ManifoldDescriptor::Power { base, m } => (base, *m),
            other => (other, 1),
        }
    }

    /// Coordinate ranges of the individual components, component-major.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let (base, m) = self.components();
        let b = base.dim();
        (0..m).map(|c| c * b..(c + 1) * b).collect()
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.components().0, ManifoldDescriptor::Euclidean { .. })
    }
}

/// Ambient representation of a point or tangent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Vector(Vec<f64>),
    Sym(SymMatrix),
    Product(Vec<Element>),
}

impl Element {
    fn check_shape(&self, desc: &ManifoldDescriptor) -> Result<()> {
        let ok = match (desc, self) {
            (ManifoldDescriptor::Euclidean { d }, Element::Vector(v)) => v.len() == *d,
            (ManifoldDescriptor::Spd { n }, Element::Sym(s)) => s.order() == *n,
            (ManifoldDescriptor::Power { base, m }, Element::Product(parts)) => {
                if parts.len() != *m {
                    false
                } else {
                    return parts.iter().try_for_each(|p| p.check_shape(base));
                }
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("element does not match {desc:?}")))
        }
    }

    /// Leaf components: the parts of a product, or the element itself.
    pub fn parts(&self) -> &[Element] {
        match self {
            Element::Product(p) => p,
            other => std::slice::from_ref(other),
        }
    }

    fn map_zip(&self, other: &Element, f: &impl Fn(f64, f64) -> f64) -> Element {
        match (self, other) {
            (Element::Vector(a), Element::Vector(b)) => {
                Element::Vector(a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            }
            (Element::Sym(a), Element::Sym(b)) => {
                let upper = a.upper().iter().zip(b.upper()).map(|(x, y)| f(*x, *y)).collect();
                Element::Sym(SymMatrix::from_upper(a.order(), upper).expect("same order"))
            }
            (Element::Product(a), Element::Product(b)) => {
                Element::Product(a.iter().zip(b).map(|(x, y)| x.map_zip(y, f)).collect())
            }
            _ => panic!("element kinds differ"),
        }
    }

    fn zeros_like(desc: &ManifoldDescriptor) -> Element {
        match desc {
            ManifoldDescriptor::Euclidean { d } => Element::Vector(vec![0.0; *d]),
            ManifoldDescriptor::Spd { n } => Element::Sym(SymMatrix::zeros(*n)),
            ManifoldDescriptor::Power { base, m } => {
                Element::Product((0..*m).map(|_| Element::zeros_like(base)).collect())
            }
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            Element::Vector(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Element::Sym(s) => s.max_abs(),
            Element::Product(p) => p.iter().fold(0.0, |m, x| m.max(x.max_abs())),
        }
    }
}

/// A validated point on a manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointRepr")]
pub struct Point {
    descriptor: ManifoldDescriptor,
    value: Element,
}

#[derive(Deserialize)]
struct PointRepr {
    descriptor: ManifoldDescriptor,
    value: Element,
}

impl TryFrom<PointRepr> for Point {
    type Error = Error;
    fn try_from(r: PointRepr) -> Result<Self> {
        Point::new(r.descriptor, r.value)
    }
}

impl Point {
    pub fn new(descriptor: ManifoldDescriptor, value: Element) -> Result<Self> {
        descriptor.validate()?;
        value.check_shape(&descriptor)?;
        for part in value.parts() {
            match part {
                Element::Sym(s) => {
                    let e = eig_sym(s)?;
                    let tol = pd_tolerance(e.max_value());
                    if e.min_value() <= tol {
                        return Err(Error::NotPositiveDefinite { min_eigenvalue: e.min_value(), tolerance: tol });
                    }
                }
                Element::Vector(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidInput("non-finite coordinate".into()));
                    }
                }
                Element::Product(_) => unreachable!("nesting depth is validated"),
            }
        }
        Ok(Point { descriptor, value })
    }

    pub fn euclidean(v: Vec<f64>) -> Result<Self> {
        Self::new(ManifoldDescriptor::euclidean(v.len()), Element::Vector(v))
    }

    pub fn spd(s: SymMatrix) -> Result<Self> {
        Self::new(ManifoldDescriptor::spd(s.order()), Element::Sym(s))
    }

    /// Power-manifold point from validated single-component points.
    pub fn power(parts: Vec<Point>) -> Result<Self> {
        let first =
            parts.first().ok_or_else(|| Error::InvalidInput("power point needs at least one component".into()))?;
        let base = first.descriptor.clone();
        if parts.iter().any(|p| p.descriptor != base) {
            return Err(Error::ShapeMismatch("power components have differing types".into()));
        }
        let m = parts.len();
        let value = Element::Product(parts.into_iter().map(|p| p.value).collect());
        Self::new(ManifoldDescriptor::power(base, m), value)
    }

    /// Point with every SPD component equal to `scale * I` and Euclidean components zero.
    pub fn scaled_identity(descriptor: &ManifoldDescriptor, scale: f64) -> Result<Self> {
        fn fill(desc: &ManifoldDescriptor, scale: f64) -> Element {
            match desc {
                ManifoldDescriptor::Euclidean { d } => Element::Vector(vec![0.0; *d]),
                ManifoldDescriptor::Spd { n } => Element::Sym(SymMatrix::identity(*n).scaled(scale)),
                ManifoldDescriptor::Power { base, m } => Element::Product((0..*m).map(|_| fill(base, scale)).collect()),
            }
        }
        Self::new(descriptor.clone(), fill(descriptor, scale))
    }

    pub fn descriptor(&self) -> &ManifoldDescriptor {
        &self.descriptor
    }

    pub fn value(&self) -> &Element {
        &self.value
    }

    pub fn parts(&self) -> &[Element] {
        self.value.parts()
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim()
    }
}

/// A tangent vector in ambient form. The base point is supplied by the caller of every
/// geometric operation; only the shape is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent(pub Element);

impl Tangent {
    pub fn zeros(descriptor: &ManifoldDescriptor) -> Self {
        Tangent(Element::zeros_like(descriptor))
    }

    pub fn parts(&self) -> &[Element] {
        self.0.parts()
    }

    pub fn scaled(&self, s: f64) -> Tangent {
        Tangent(self.0.map_zip(&self.0, &|a, _| s * a))
    }

    pub fn add(&self, other: &Tangent) -> Tangent {
        Tangent(self.0.map_zip(&other.0, &|a, b| a + b))
    }

    pub fn sub(&self, other: &Tangent) -> Tangent {
        Tangent(self.0.map_zip(&other.0, &|a, b| a - b))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    pub fn check_shape(&self, descriptor: &ManifoldDescriptor) -> Result<()> {
        self.0.check_shape(descriptor)
    }
}

fn same_manifold(x: &Point, y: &Point) -> Result<()> {
    if x.descriptor != y.descriptor {
        return Err(Error::ShapeMismatch(format!("points live on {:?} and {:?}", x.descriptor, y.descriptor)));
    }
    Ok(())
}

/// Exponential map `exp_q(v)`.
pub fn exp(q: &Point, v: &Tangent) -> Result<Point> {
    Chart::at(q)?.exp(v)
}

/// Logarithmic map `log_q(x)`.
pub fn log(q: &Point, x: &Point) -> Result<Tangent> {
    Chart::at(q)?.log(x)
}

/// Riemannian inner product at `q`.
pub fn inner(q: &Point, u: &Tangent, v: &Tangent) -> Result<f64> {
    Chart::at(q)?.inner(u, v)
}

pub fn norm(q: &Point, v: &Tangent) -> Result<f64> {
    Ok(inner(q, v, v)?.max(0.0).sqrt())
}

/// Geodesic distance.
pub fn dist(x: &Point, y: &Point) -> Result<f64> {
    same_manifold(x, y)?;
    let mut acc = 0.0;
    for (a, b) in x.parts().iter().zip(y.parts()) {
        let d2 = match (a, b) {
            (Element::Vector(a), Element::Vector(b)) => a.iter().zip(b).map(|(s, t)| (s - t) * (s - t)).sum(),
            (Element::Sym(a), Element::Sym(b)) => chart::spd_dist_sq(a, b)?,
            _ => unreachable!("validated shapes"),
        };
        acc += d2;
    }
    Ok(acc.sqrt())
}

/// Orthonormal basis of `T_q M` in the canonical order (component-major, then the
/// symmetric-matrix basis order within each SPD component).
pub fn orthonormal_basis(q: &Point) -> Result<Vec<Tangent>> {
    let chart = Chart::at(q)?;
    let d = q.dim();
    Ok((0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            chart.from_coords(&e)
        })
        .collect())
}
