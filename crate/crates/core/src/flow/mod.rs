//! The coupled flow
//!
//! ```text
//! f_t = e^{-4u} (-Δ²f + B),          B = Δ(A(df,df)) - ⟨Δf, ΔP⟩ + 2∇⟨Δf, ∇P⟩
//! u_t = b e^{-4u} (|∇df|² + |df|⁴) - a
//! ```
//!
//! with `u(0) = 0`, together with its time integrators.

mod conformal;
mod rhs;
mod stepper;

pub use conformal::ConformalState;
pub use rhs::{
    bienergy, density, gradient_check, rhs_explicit_b, rhs_projection, tangential_bilaplacian,
};
pub use stepper::{advance, stability_dt, step, step_imex};

pub(crate) use rhs::{explicit_normal_term, projected_normal_term};

use crate::error::{Error, Result};
use crate::fixedpoint::PicardSettings;
use crate::lattice::{Grid4, MapField, ScalarField};

/// Real-axis stability extent of classical RK4.
pub const RK4_STABILITY_EXTENT: f64 = 2.78;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitRk4,
    StabilizedImex,
    Picard,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "explicit-rk4" => Ok(Scheme::ExplicitRk4),
            "stabilized-imex" => Ok(Scheme::StabilizedImex),
            "picard" => Ok(Scheme::Picard),
            _ => Err(format!("unknown scheme '{s}'")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::ExplicitRk4 => "explicit-rk4",
            Scheme::StabilizedImex => "stabilized-imex",
            Scheme::Picard => "picard",
        })
    }
}

/// How the conformal factor is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalRoute {
    /// Closed form with a trapezoid accumulator (canonical).
    Quadrature,
    /// Runge–Kutta integration of the pointwise ODE.
    Ode,
    /// `u ≡ 0`: plain extrinsic biharmonic map flow.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub a: f64,
    pub b: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    pub route: ConformalRoute,
    pub picard: PicardSettings,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            dt: 1e-4,
            t_end: 1.0,
            scheme: Scheme::ExplicitRk4,
            cfl_safety: 0.5,
            route: ConformalRoute::Quadrature,
            picard: PicardSettings::default(),
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::InvalidParam("a must be positive".into()));
        }
        // b = 0 decouples u from f; kept for the homogeneous-decay checks
        if !(self.b >= 0.0) {
            return Err(Error::InvalidParam("b must be non-negative".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParam("dt must be positive".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParam("t_end must be positive".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParam("cfl_safety must lie in (0, 1]".into()));
        }
        self.picard.validate()
    }
}

/// Complete state of the coupled system.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub f: MapField,
    pub conformal: ConformalState,
    pub t: f64,
    pub step_count: u64,
    /// `max ||f| - 1|` just before the last reprojection.
    pub last_drift: f64,
    /// Density of `f`, cached for the next accumulator update.
    pub(crate) density: Option<ScalarField>,
}

impl FlowState {
    pub fn new(grid: &Grid4, f: MapField) -> Self {
        Self {
            f,
            conformal: ConformalState::new(grid),
            t: 0.0,
            step_count: 0,
            last_drift: 0.0,
            density: None,
        }
    }

    pub fn from_parts(f: MapField, conformal: ConformalState, step_count: u64) -> Self {
        Self {
            t: conformal.t,
            f,
            conformal,
            step_count,
            last_drift: 0.0,
            density: None,
        }
    }

    pub fn u(&self) -> &ScalarField {
        &self.conformal.u
    }

    pub(crate) fn density_cached(&mut self, grid: &Grid4) -> ScalarField {
        if let Some(d) = &self.density {
            return d.clone();
        }
        let d = density(grid, &self.f);
        self.density = Some(d.clone());
        d
    }
}
