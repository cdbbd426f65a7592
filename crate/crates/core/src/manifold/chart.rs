use ndarray::Array2;

use super::{same_manifold, Element, Point, Tangent};
use crate::error::{Error, Result};
use crate::linalg::{congruence, eig_sym, matfun_spd, MatFun, SymMatrix};

#[derive(Debug, Clone)]
enum Component {
    Flat { d: usize },
    Spd { n: usize, sqrt: Array2<f64>, inv_sqrt: Array2<f64> },
}

impl Component {
    fn dim(&self) -> usize {
        match self {
            Component::Flat { d } => *d,
            Component::Spd { n, .. } => n * (n + 1) / 2,
        }
    }
}

/// Precomputed square roots of a base point, shared by every map evaluated at it.
///
/// On SPD components tangent vectors are whitened, `u -> q^{-1/2} u q^{-1/2}`, which turns
/// the affine-invariant metric into the Frobenius inner product. Canonical coordinates are
/// the Frobenius coordinates of the whitened matrix in the symmetric-matrix basis.
#[derive(Debug, Clone)]
pub struct Chart {
    base: Point,
    components: Vec<Component>,
}

impl Chart {
    pub fn at(q: &Point) -> Result<Self> {
        let components = q
            .parts()
            .iter()
            .map(|p| match p {
                Element::Vector(v) => Ok(Component::Flat { d: v.len() }),
                Element::Sym(s) => Ok(Component::Spd {
                    n: s.order(),
                    sqrt: matfun_spd(s, MatFun::Sqrt)?.to_full(),
                    inv_sqrt: matfun_spd(s, MatFun::InvSqrt)?.to_full(),
                }),
                Element::Product(_) => unreachable!("validated nesting"),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Chart { base: q.clone(), components })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    fn check(&self, v: &Tangent) -> Result<()> {
        v.check_shape(self.base.descriptor())
    }

    /// Whitened SPD component `q_c^{-1/2} u_c q_c^{-1/2}` (identity on flat components).
    pub fn whiten_part(&self, c: usize, part: &SymMatrix) -> SymMatrix {
        match &self.components[c] {
            Component::Spd { inv_sqrt, .. } => congruence(inv_sqrt, part),
            Component::Flat { .. } => part.clone(),
        }
    }

    pub fn unwhiten_part(&self, c: usize, part: &SymMatrix) -> SymMatrix {
        match &self.components[c] {
            Component::Spd { sqrt, .. } => congruence(sqrt, part),
            Component::Flat { .. } => part.clone(),
        }
    }

    pub fn exp(&self, v: &Tangent) -> Result<Point> {
        self.check(v)?;
        let parts = self
            .components
            .iter()
            .zip(self.base.parts())
            .zip(v.parts())
            .map(|((comp, q), v)| match (comp, q, v) {
                (Component::Flat { .. }, Element::Vector(q), Element::Vector(v)) => {
                    Ok(Element::Vector(q.iter().zip(v).map(|(a, b)| a + b).collect()))
                }
                (Component::Spd { sqrt, inv_sqrt, .. }, _, Element::Sym(v)) => {
                    let w = congruence(inv_sqrt, v);
                    let e = matfun_spd(&w, MatFun::Exp)?;
                    Ok(Element::Sym(congruence(sqrt, &e)))
                }
                _ => Err(Error::ShapeMismatch("tangent does not match base point".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        self.assemble(parts)
    }

    pub fn log(&self, x: &Point) -> Result<Tangent> {
        same_manifold(&self.base, x)?;
        let parts = self
            .components
            .iter()
            .zip(self.base.parts())
            .zip(x.parts())
            .map(|((comp, q), x)| match (comp, q, x) {
                (Component::Flat { .. }, Element::Vector(q), Element::Vector(x)) => {
                    Ok(Element::Vector(x.iter().zip(q).map(|(a, b)| a - b).collect()))
                }
                (Component::Spd { sqrt, inv_sqrt, .. }, _, Element::Sym(x)) => {
                    let w = congruence(inv_sqrt, x);
                    let l = matfun_spd(&w, MatFun::Log)?;
                    Ok(Element::Sym(congruence(sqrt, &l)))
                }
                _ => unreachable!("validated shapes"),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.wrap(parts))
    }

    /// Whitened log map of every component, `logm(q^{-1/2} x q^{-1/2})`, together with the
    /// flat differences. Skips the final un-whitening congruence.
    pub fn log_whitened(&self, x: &Point) -> Result<Vec<Element>> {
        same_manifold(&self.base, x)?;
        self.components
            .iter()
            .zip(self.base.parts())
            .zip(x.parts())
            .map(|((comp, q), x)| match (comp, q, x) {
                (Component::Flat { .. }, Element::Vector(q), Element::Vector(x)) => {
                    Ok(Element::Vector(x.iter().zip(q).map(|(a, b)| a - b).collect()))
                }
                (Component::Spd { inv_sqrt, .. }, _, Element::Sym(x)) => {
                    Ok(Element::Sym(matfun_spd(&congruence(inv_sqrt, x), MatFun::Log)?))
                }
                _ => unreachable!("validated shapes"),
            })
            .collect()
    }

    pub fn inner(&self, u: &Tangent, v: &Tangent) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let mut acc = 0.0;
        for ((comp, a), b) in self.components.iter().zip(u.parts()).zip(v.parts()) {
            acc += match (comp, a, b) {
                (Component::Flat { .. }, Element::Vector(a), Element::Vector(b)) => {
                    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
                }
                (Component::Spd { inv_sqrt, .. }, Element::Sym(a), Element::Sym(b)) => {
                    congruence(inv_sqrt, a).frobenius_inner(&congruence(inv_sqrt, b))
                }
                _ => unreachable!("validated shapes"),
            };
        }
        Ok(acc)
    }

    /// Canonical orthonormal coordinates of a tangent vector.
    pub fn coords(&self, v: &Tangent) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut out = Vec::with_capacity(self.dim());
        for (c, part) in v.parts().iter().enumerate() {
            match part {
                Element::Vector(x) => out.extend_from_slice(x),
                Element::Sym(s) => out.extend(packed_coords(&self.whiten_part(c, s))),
                Element::Product(_) => unreachable!("validated nesting"),
            }
        }
        Ok(out)
    }

    /// Tangent vector with the given canonical coordinates.
    pub fn from_coords(&self, coords: &[f64]) -> Tangent {
        assert_eq!(coords.len(), self.dim(), "coordinate length");
        let mut offset = 0;
        let parts = self
            .components
            .iter()
            .enumerate()
            .map(|(c, comp)| {
                let d = comp.dim();
                let slice = &coords[offset..offset + d];
                offset += d;
                match comp {
                    Component::Flat { .. } => Element::Vector(slice.to_vec()),
                    Component::Spd { n, .. } => Element::Sym(self.unwhiten_part(c, &unpack_coords(*n, slice))),
                }
            })
            .collect();
        self.wrap(parts)
    }

    fn wrap(&self, parts: Vec<Element>) -> Tangent {
        match self.base.value() {
            Element::Product(_) => Tangent(Element::Product(parts)),
            _ => Tangent(parts.into_iter().next().expect("one component")),
        }
    }

    fn assemble(&self, parts: Vec<Element>) -> Result<Point> {
        let value = self.wrap(parts).0;
        Point::new(self.base.descriptor().clone(), value)
    }
}

/// Frobenius coordinates in the symmetric-matrix basis: diagonal entries, then
/// `sqrt(2) * w_ab` for `a < b` row-major.
pub(crate) fn packed_coords(w: &SymMatrix) -> Vec<f64> {
    let n = w.order();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    out.extend((0..n).map(|a| w.get(a, a)));
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(std::f64::consts::SQRT_2 * w.get(a, b));
        }
    }
    out
}

pub(crate) fn unpack_coords(n: usize, coords: &[f64]) -> SymMatrix {
    let mut w = SymMatrix::zeros(n);
    for a in 0..n {
        w.set(a, a, coords[a]);
    }
    let mut k = n;
    for a in 0..n {
        for b in (a + 1)..n {
            w.set(a, b, coords[k] * std::f64::consts::FRAC_1_SQRT_2);
            k += 1;
        }
    }
    w
}

/// Squared affine-invariant distance, `||logm(x^{-1/2} y x^{-1/2})||_F^2`.
pub(crate) fn spd_dist_sq(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    let inv_sqrt = matfun_spd(x, MatFun::InvSqrt)?.to_full();
    let w = congruence(&inv_sqrt, y);
    let e = eig_sym(&w)?;
    let tol = crate::linalg::pd_tolerance(e.max_value());
    if e.min_value() <= tol {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: e.min_value(), tolerance: tol });
    }
    Ok(e.values.iter().map(|l| l.ln().powi(2)).sum())
}
