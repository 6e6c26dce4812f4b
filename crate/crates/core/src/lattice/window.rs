//! Smooth cut-off functions on periodic balls.

use std::f64::consts::PI;

use super::{periodic_displacement, periodic_distance, Grid4, ScalarField};
use crate::error::{Error, Result};

/// Radial profile of the cut-off as a function of `s = d / r`: one on
/// `[0, 1/2]`, zero on `[1, ∞)`, a quintic C² ramp in between.
pub fn window_profile(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let t = 2.0 * s - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Derivative of [`window_profile`] with respect to `s`.
fn window_profile_slope(s: f64) -> f64 {
    if s <= 0.5 || s >= 1.0 {
        0.0
    } else {
        let t = 2.0 * s - 1.0;
        -2.0 * 30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r <= PI {
        Ok(())
    } else {
        Err(Error::BadRadius(r))
    }
}

/// `φ` with `φ ≡ 1` on `B_{r/2}(center)` and `φ ≡ 0` outside `B_r(center)`.
pub fn window(grid: &Grid4, center: [f64; 4], r: f64) -> Result<ScalarField> {
    check_radius(r)?;
    Ok(ScalarField::from_fn(grid, |x| {
        window_profile(periodic_distance(x, center) / r)
    }))
}

/// Largest `|∇φ|` over the grid, from the analytic chain rule (the periodic
/// distance has unit gradient away from the center and its cut locus).
pub fn window_gradient_max(grid: &Grid4, center: [f64; 4], r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok((0..grid.len())
        .map(|i| window_profile_slope(periodic_distance(grid.coords(i), center) / r).abs() / r)
        .fold(0.0, f64::max))
}

/// The support of a window centred on a grid point, as lattice offsets with
/// weights `φ⁴`. Summing in offset order makes the integral identical for
/// every centre when the integrand is translation invariant.
#[derive(Debug, Clone)]
pub struct WindowStencil {
    pub radius: f64,
    offsets: Vec<([usize; 4], f64)>,
}

impl WindowStencil {
    pub fn new(grid: &Grid4, r: f64) -> Result<Self> {
        check_radius(r)?;
        let n = grid.n();
        let h = grid.h();
        let mut offsets = Vec::new();
        for idx in 0..grid.len() {
            let m = grid.multi_index(idx);
            let d = m
                .iter()
                .map(|&k| periodic_displacement(k as f64 * h, 0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            let phi = window_profile(d / r);
            if phi > 0.0 {
                offsets.push((m, phi.powi(4)));
            }
        }
        debug_assert!(offsets.iter().all(|(m, _)| m.iter().all(|&k| k < n)));
        Ok(Self { radius: r, offsets })
    }

    /// `∫ s φ⁴` for the window centred at lattice point `center`.
    pub fn integrate_at(&self, grid: &Grid4, s: &[f64], center: [usize; 4]) -> f64 {
        let n = grid.n();
        let h2 = grid.h() * grid.h();
        let mut acc = 0.0;
        for (off, w) in &self.offsets {
            let idx = grid.index([
                (center[0] + off[0]) % n,
                (center[1] + off[1]) % n,
                (center[2] + off[2]) % n,
                (center[3] + off[3]) % n,
            ]);
            acc += w * s[idx];
        }
        h2 * h2 * acc
    }

    /// `∫ φ⁴`.
    pub fn mass(&self, grid: &Grid4) -> f64 {
        let h2 = grid.h() * grid.h();
        h2 * h2 * self.offsets.iter().map(|(_, w)| w).sum::<f64>()
    }
}
