//! The flat 4-torus `[0, 2π)⁴` sampled on a uniform grid, with fields and
//! Fourier-multiplier calculus on top of it.
//!
//! Storage is row-major with `x₁` slowest. Map-valued fields keep one
//! contiguous array per ambient component so that every component can be
//! transformed independently.

mod spectral;
pub mod snapshot;
mod window;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub use spectral::Jet;
pub use window::{window, window_gradient_max, window_profile, WindowStencil};

/// Volume of the torus, `(2π)⁴`.
pub const TORUS_VOLUME: f64 = 16.0 * PI * PI * PI * PI;

/// Discretized flat 4-torus together with its FFT plans.
#[derive(Clone)]
pub struct Grid4 {
    n: usize,
    h: f64,
    l: usize,
    plans: Arc<Plans>,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Signed wavenumber per 1-D index; the Nyquist index maps to zero.
    wave: Vec<f64>,
}

impl fmt::Debug for Grid4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid4")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("l", &self.l)
            .finish()
    }
}

impl PartialEq for Grid4 {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l
    }
}

impl Grid4 {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadResolution(n));
        }
        if l < 2 {
            return Err(Error::BadAmbientDim(l));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let half = n / 2;
        let wave = (0..n)
            .map(|i| match i.cmp(&half) {
                std::cmp::Ordering::Less => i as f64,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => i as f64 - n as f64,
            })
            .collect();
        Ok(Self {
            n,
            h: 2.0 * PI / n as f64,
            l,
            plans: Arc::new(Plans {
                forward,
                inverse,
                wave,
            }),
        })
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `2π/n`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Ambient dimension of the target's embedding space.
    pub fn ambient_dim(&self) -> usize {
        self.l
    }

    /// Total number of grid points, `n⁴`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same resolution with a different ambient dimension.
    pub fn with_ambient_dim(&self, l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::BadAmbientDim(l));
        }
        Ok(Self {
            l,
            ..self.clone()
        })
    }

    #[inline]
    pub fn index(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.n + i[1]) * self.n + i[2]) * self.n + i[3]
    }

    #[inline]
    pub fn multi_index(&self, mut idx: usize) -> [usize; 4] {
        let n = self.n;
        let i3 = idx % n;
        idx /= n;
        let i2 = idx % n;
        idx /= n;
        let i1 = idx % n;
        [idx / n, i1, i2, i3]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 4] {
        let m = self.multi_index(idx);
        [
            m[0] as f64 * self.h,
            m[1] as f64 * self.h,
            m[2] as f64 * self.h,
            m[3] as f64 * self.h,
        ]
    }

    /// Trapezoid rule on the torus: `h⁴ Σ s`.
    pub fn integrate(&self, s: &ScalarField) -> f64 {
        self.integrate_slice(&s.values)
    }

    pub(crate) fn integrate_slice(&self, s: &[f64]) -> f64 {
        let h2 = self.h * self.h;
        h2 * h2 * s.iter().sum::<f64>()
    }

    /// Largest symbol of the bilaplacian used for the explicit step bound.
    pub fn bilaplacian_symbol_bound(&self) -> f64 {
        let n = self.n as f64;
        n * n * n * n
    }

    fn wave(&self) -> &[f64] {
        &self.plans.wave
    }
}

/// Real value per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid4) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid4, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid4, f: impl Fn([f64; 4]) -> f64) -> Self {
        Self {
            values: (0..grid.len()).map(|i| f(grid.coords(i))).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `L` reals per grid point, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    pub components: Vec<Vec<f64>>,
}

impl MapField {
    pub fn zeros(grid: &Grid4) -> Self {
        Self {
            components: vec![vec![0.0; grid.len()]; grid.ambient_dim()],
        }
    }

    /// Builds a field from a closure writing the `L` values at a point.
    pub fn from_fn(grid: &Grid4, f: impl Fn([f64; 4], &mut [f64])) -> Self {
        let l = grid.ambient_dim();
        let mut out = Self::zeros(grid);
        let mut buf = vec![0.0; l];
        for idx in 0..grid.len() {
            f(grid.coords(idx), &mut buf);
            for (c, v) in out.components.iter_mut().zip(&buf) {
                c[idx] = *v;
            }
        }
        out
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn len(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c[idx];
        }
    }

    #[inline]
    pub fn set_point(&mut self, idx: usize, v: &[f64]) {
        for (c, x) in self.components.iter_mut().zip(v) {
            c[idx] = *x;
        }
    }

    /// Pointwise Euclidean norm.
    pub fn norms(&self) -> ScalarField {
        let mut sq = vec![0.0; self.len()];
        for c in &self.components {
            for (s, v) in sq.iter_mut().zip(c) {
                *s += v * v;
            }
        }
        ScalarField {
            values: sq.into_iter().map(f64::sqrt).collect(),
        }
    }

    /// Pointwise squared norm.
    pub fn norms_sq(&self) -> ScalarField {
        let mut sq = vec![0.0; self.len()];
        for c in &self.components {
            for (s, v) in sq.iter_mut().zip(c) {
                *s += v * v;
            }
        }
        ScalarField { values: sq }
    }

    /// Pointwise inner product with another field of the same shape.
    pub fn dot(&self, other: &MapField) -> ScalarField {
        let mut out = vec![0.0; self.len()];
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        ScalarField { values: out }
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.norms().max()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &MapField) -> MapField {
        MapField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> MapField {
        MapField {
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| s * v).collect())
                .collect(),
        }
    }

    /// Multiplies every component pointwise by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> MapField {
        MapField {
            components: self
                .components
                .iter()
                .map(|c| c.iter().zip(&s.values).map(|(v, w)| v * w).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &MapField) -> MapField {
        self.axpy(-1.0, other)
    }

    /// Largest deviation `| |f(x)| - 1 |`.
    pub fn sphere_defect(&self) -> f64 {
        self.norms()
            .values
            .iter()
            .fold(0.0, |m, v| m.max((v - 1.0).abs()))
    }
}

/// Periodic displacement `x - c` wrapped into `[-π, π)`.
#[inline]
pub fn periodic_displacement(x: f64, c: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let d = (x - c).rem_euclid(two_pi);
    if d >= PI {
        d - two_pi
    } else {
        d
    }
}

/// Euclidean distance on the torus.
pub fn periodic_distance(x: [f64; 4], c: [f64; 4]) -> f64 {
    x.iter()
        .zip(&c)
        .map(|(a, b)| periodic_displacement(*a, *b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = Grid4::new(8, 3).unwrap();
        assert_eq!(g.n(), 8);
        assert_eq!(g.ambient_dim(), 3);
        assert!((g.h() - PI / 4.0).abs() < 1e-15);
        assert_eq!(g.len(), 4096);

        let g = Grid4::new(16, 3).unwrap();
        assert!((g.h() - PI / 8.0).abs() < 1e-15);
        assert!((g.h() * g.n() as f64 - 2.0 * PI).abs() < 1e-14);

        assert!(matches!(Grid4::new(6, 3), Err(Error::BadResolution(6))));
        assert!(matches!(Grid4::new(4, 3), Err(Error::BadResolution(4))));
        assert!(matches!(Grid4::new(8, 1), Err(Error::BadAmbientDim(1))));
    }

    #[test]
    fn index_round_trip() {
        let g = Grid4::new(8, 2).unwrap();
        for idx in [0, 1, 7, 8, 511, 4095] {
            assert_eq!(g.index(g.multi_index(idx)), idx);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid4::new(8, 3).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((g.integrate(&one) - TORUS_VOLUME).abs() < 1e-10);
        assert!((TORUS_VOLUME - 1558.5455).abs() < 1e-4);

        let c = ScalarField::from_fn(&g, |x| x[0].cos());
        assert!(g.integrate(&c).abs() < 1e-12);

        let c2 = ScalarField::from_fn(&g, |x| x[0].cos().powi(2));
        assert!((g.integrate(&c2) - TORUS_VOLUME / 2.0).abs() < 1e-10);
    }

    #[test]
    fn periodic_displacement_wraps() {
        assert!((periodic_displacement(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-14);
        assert!((periodic_displacement(PI, 0.0) + PI).abs() < 1e-14);
        assert!(periodic_displacement(1.0, 1.0).abs() < 1e-15);
    }
}
