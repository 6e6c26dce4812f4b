//! The round unit sphere `S^{L-1} ⊂ R^L` as target manifold.
//!
//! Nearest-point projection, tangential projection and second fundamental
//! form all have closed forms here:
//!
//! ```text
//! Π(y)       = y / |y|
//! P(y) v     = v - ⟨v, y⟩ y
//! A(y)(X, Y) = -⟨X, Y⟩ y
//! ```
//!
//! The derivatives of `P` along a curve in the sphere are exposed to the
//! flow module so that the explicit normal term can be assembled without
//! symbolic differentiation.

use crate::error::{Error, Result};
use crate::lattice::MapField;

/// Below this norm a point is too close to the cone point to be projected.
pub const MIN_PROJECTABLE_NORM: f64 = 1e-8;
/// Tolerance for "lies on the sphere" preconditions.
pub const ON_SPHERE_TOL: f64 = 1e-8;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereTarget {
    l: usize,
}

impl SphereTarget {
    pub fn new(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::BadAmbientDim(l));
        }
        Ok(Self { l })
    }

    pub fn ambient_dim(&self) -> usize {
        self.l
    }

    /// Operator norm of `A` on unit tangent vectors.
    pub fn second_fundamental_form_bound(&self) -> f64 {
        1.0
    }

    pub fn project_point(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r = norm(y);
        if !(r >= MIN_PROJECTABLE_NORM) {
            return Err(Error::ProjectionDegenerate(r));
        }
        Ok(y.iter().map(|v| v / r).collect())
    }

    fn check_on_sphere(&self, y: &[f64]) -> Result<()> {
        let defect = (norm(y) - 1.0).abs();
        if defect <= ON_SPHERE_TOL {
            Ok(())
        } else {
            Err(Error::OffSphere(defect))
        }
    }

    /// `P(y) v = v - ⟨v, y⟩ y`.
    pub fn tangential(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_on_sphere(y)?;
        let mut out = v.to_vec();
        tangential_in_place(y, &mut out);
        Ok(out)
    }

    /// `A(y)(X, Y) = -⟨X, Y⟩ y` for tangent `X`, `Y`.
    pub fn second_fundamental_form(&self, y: &[f64], x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_on_sphere(y)?;
        for v in [x, w] {
            let defect = dot(v, y).abs();
            if defect > ON_SPHERE_TOL * norm(v).max(f64::MIN_POSITIVE) {
                return Err(Error::NotTangent(defect));
            }
        }
        let s = dot(x, w);
        Ok(y.iter().map(|v| -s * v).collect())
    }

    /// Reprojects every point of a map field; fails on points too close to
    /// the origin.
    pub fn project_field(&self, f: &MapField) -> Result<MapField> {
        let mut out = f.clone();
        let norms = f.norms();
        for (idx, &r) in norms.values.iter().enumerate() {
            if !(r >= MIN_PROJECTABLE_NORM) {
                return Err(Error::ProjectionDegenerate(r));
            }
            for c in out.components.iter_mut() {
                c[idx] /= r;
            }
        }
        Ok(out)
    }

    /// Checks that a map field lies on the sphere within [`ON_SPHERE_TOL`].
    pub fn check_field(&self, f: &MapField) -> Result<()> {
        let defect = f.sphere_defect();
        if defect <= ON_SPHERE_TOL {
            Ok(())
        } else {
            Err(Error::OffSphere(defect))
        }
    }

    /// Projects `w` pointwise onto the tangent spaces along `f`.
    pub fn tangential_field(&self, f: &MapField, w: &MapField) -> Result<MapField> {
        self.check_field(f)?;
        Ok(tangential_field_unchecked(f, w))
    }
}

#[inline]
pub(crate) fn tangential_in_place(y: &[f64], v: &mut [f64]) {
    let s = dot(v, y);
    for (o, yi) in v.iter_mut().zip(y) {
        *o -= s * yi;
    }
}

pub(crate) fn tangential_field_unchecked(f: &MapField, w: &MapField) -> MapField {
    let s = f.dot(w);
    let mut out = w.clone();
    for (o, fc) in out.components.iter_mut().zip(&f.components) {
        for ((ov, fv), sv) in o.iter_mut().zip(fc).zip(&s.values) {
            *ov -= sv * fv;
        }
    }
    out
}

/// `dP(y)[z] v = -⟨v, z⟩ y - ⟨v, y⟩ z`: derivative of the tangential
/// projector in direction `z`.
pub(crate) fn d_tangential(y: &[f64], z: &[f64], v: &[f64], out: &mut [f64]) {
    let vz = dot(v, z);
    let vy = dot(v, y);
    for ((o, yi), zi) in out.iter_mut().zip(y).zip(z) {
        *o = -vz * yi - vy * zi;
    }
}

/// `d²P(y)[z, w] v = -⟨v, z⟩ w - ⟨v, w⟩ z`.
pub(crate) fn d2_tangential(z: &[f64], w: &[f64], v: &[f64], out: &mut [f64]) {
    let vz = dot(v, z);
    let vw = dot(v, w);
    for ((o, zi), wi) in out.iter_mut().zip(z).zip(w) {
        *o = -vz * wi - vw * zi;
    }
}

/// `A(y)(X, Y) = -⟨X, Y⟩ y` without tangency checks.
#[inline]
pub(crate) fn second_fundamental_form_unchecked(y: &[f64], x: &[f64], w: &[f64], out: &mut [f64]) {
    let s = dot(x, w);
    for (o, yi) in out.iter_mut().zip(y) {
        *o = -s * yi;
    }
}

/// `max_x |⟨w(x), f(x)⟩|`: how far `w` is from being tangent along `f`.
pub fn tangency_defect(f: &MapField, w: &MapField) -> f64 {
    f.dot(w).values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
