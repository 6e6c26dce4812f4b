//! The conformal factor `u` and its closed-form quadrature.
//!
//! The scalar equation `u_t = b e^{-4u} D - a` integrates to
//!
//! ```text
//! e^{4u(t)} = e^{-4at} (1 + 4b I(t)),   I(t) = ∫₀ᵗ e^{4as} D(s) ds,
//! ```
//!
//! so the state keeps the pointwise accumulator `I` and derives `u` from it.
//! `I` is stored as `accumulator · e^{log_scale}`; `log_scale` stays zero
//! until `e^{4at}` approaches the floating-point range.

use super::FlowParams;
use crate::lattice::{Grid4, ScalarField};

/// Rescale once the quadrature weight exceeds this.
const RESCALE_THRESHOLD: f64 = 1e150;

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalState {
    pub u: ScalarField,
    pub accumulator: ScalarField,
    pub log_scale: f64,
    pub t: f64,
}

impl ConformalState {
    /// `u(·, 0) = 0`, empty accumulator.
    pub fn new(grid: &Grid4) -> Self {
        Self {
            u: ScalarField::zeros(grid),
            accumulator: ScalarField::zeros(grid),
            log_scale: 0.0,
            t: 0.0,
        }
    }

    /// Rebuilds a state from a stored accumulator `I` at time `t`.
    pub fn from_accumulator(accumulator: ScalarField, t: f64, params: &FlowParams) -> Self {
        let mut s = Self {
            u: accumulator.clone(),
            accumulator,
            log_scale: 0.0,
            t,
        };
        s.refresh_u(params);
        s
    }

    /// `I(x, t)` in natural units (may overflow for very long runs).
    pub fn accumulator_value(&self) -> ScalarField {
        let s = self.log_scale.exp();
        self.accumulator.map(|v| v * s)
    }

    /// `e^{-4at}(1 + 4b I)` evaluated independently of `u`.
    pub fn closed_form_exp4u(&self, params: &FlowParams) -> ScalarField {
        let decay = (-4.0 * params.a * self.t).exp();
        let scale = (self.log_scale - 4.0 * params.a * self.t).exp();
        self.accumulator
            .map(|acc| decay + 4.0 * params.b * acc * scale)
    }

    pub(crate) fn refresh_u(&mut self, params: &FlowParams) {
        let at = params.a * self.t;
        let log_scale = self.log_scale;
        let b4 = 4.0 * params.b;
        self.u = self.accumulator.map(|acc| {
            let x = b4 * acc;
            let q = if x <= 0.0 {
                0.0
            } else if log_scale == 0.0 {
                x.ln_1p()
            } else {
                let lx = x.ln() + log_scale;
                if lx < 30.0 {
                    lx.exp().ln_1p()
                } else {
                    lx + (-lx).exp().ln_1p()
                }
            };
            -at + 0.25 * q
        });
    }

    fn rescale_if_needed(&mut self, t_next: f64, a: f64) {
        let weight = 4.0 * a * t_next - self.log_scale;
        if weight > RESCALE_THRESHOLD.ln() {
            let shift = 4.0 * a * t_next;
            let f = (self.log_scale - shift).exp();
            self.accumulator = self.accumulator.map(|v| v * f);
            self.log_scale = shift;
        }
    }

    /// Composite-trapezoid step of the accumulator followed by the closed
    /// form for `u`.
    pub fn update_quadrature(
        &self,
        d_old: &ScalarField,
        d_new: &ScalarField,
        dt: f64,
        params: &FlowParams,
    ) -> Self {
        let mut next = self.clone();
        next.advance_accumulator(d_old, d_new, dt, params.a);
        next.t = self.t + dt;
        next.refresh_u(params);
        next
    }

    fn advance_accumulator(&mut self, d_old: &ScalarField, d_new: &ScalarField, dt: f64, a: f64) {
        let t_next = self.t + dt;
        self.rescale_if_needed(t_next, a);
        let w_old = 0.5 * dt * (4.0 * a * self.t - self.log_scale).exp();
        let w_new = 0.5 * dt * (4.0 * a * t_next - self.log_scale).exp();
        for ((acc, o), n) in self
            .accumulator
            .values
            .iter_mut()
            .zip(&d_old.values)
            .zip(&d_new.values)
        {
            *acc += w_old * o + w_new * n;
        }
    }

    /// One classical RK4 step of `u_t = b e^{-4u} D - a` with `D` frozen
    /// over the step. The accumulator is advanced alongside so the state
    /// stays restartable.
    pub fn update_ode(&self, d: &ScalarField, dt: f64, params: &FlowParams) -> Self {
        if dt == 0.0 {
            return self.clone();
        }
        let mut next = self.clone();
        next.advance_accumulator(d, d, dt, params.a);
        next.t = self.t + dt;
        let (a, b) = (params.a, params.b);
        let rate = |u: f64, dens: f64| b * (-4.0 * u).exp() * dens - a;
        next.u = ScalarField {
            values: self
                .u
                .values
                .iter()
                .zip(&d.values)
                .map(|(&u, &dens)| rk4_scalar(u, dt, |v| rate(v, dens)))
                .collect(),
        };
        next
    }
}

#[inline]
pub(crate) fn rk4_scalar(y: f64, dt: f64, f: impl Fn(f64) -> f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * dt * k1);
    let k3 = f(y + 0.5 * dt * k2);
    let k4 = f(y + dt * k3);
    y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> FlowParams {
        FlowParams {
            a,
            b,
            ..FlowParams::default()
        }
    }

    fn run_quadrature(grid: &Grid4, d: f64, p: &FlowParams, dt: f64, steps: usize) -> ConformalState {
        let dens = ScalarField::constant(grid, d);
        let mut s = ConformalState::new(grid);
        for _ in 0..steps {
            s = s.update_quadrature(&dens, &dens, dt, p);
        }
        s
    }

    fn run_ode(grid: &Grid4, d: f64, p: &FlowParams, dt: f64, steps: usize) -> ConformalState {
        let dens = ScalarField::constant(grid, d);
        let mut s = ConformalState::new(grid);
        for _ in 0..steps {
            s = s.update_ode(&dens, dt, p);
        }
        s
    }

    #[test]
    fn constant_density_quadrature_matches_closed_form() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(1.0, 1.0);
        let s = run_quadrature(&g, 2.0, &p, 1e-3, 500);
        assert!((s.t - 0.5).abs() < 1e-12);
        let exact = 2.0 - (-2.0f64).exp();
        assert!((exact - 1.86466).abs() < 1e-5);
        let e4u = (4.0 * s.u.values[0]).exp();
        // trapezoid error of ∫ 2e^{4s} at dt = 1e-3 is (dt²/12)·8(e²-1)
        let predicted = 4.0 * (1e-6 / 12.0) * 8.0 * (2.0f64.exp() - 1.0) * (-2.0f64).exp();
        assert!((e4u - exact).abs() <= 1.1 * predicted);
        assert!((e4u - exact).abs() / exact <= 1.5e-6);
    }

    #[test]
    fn zero_density_decays_linearly() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(0.7, 1.0);
        let s = run_quadrature(&g, 0.0, &p, 0.01, 37);
        for u in &s.u.values {
            assert_eq!(*u, -(0.7 * s.t));
        }
    }

    #[test]
    fn long_time_limit_is_stationary_point() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(1.0, 1.0);
        let s = run_quadrature(&g, 2.0, &p, 2e-3, 5000);
        let e4u = (4.0 * s.u.values[0]).exp();
        assert!((e4u - 2.0).abs() < 1e-4);
    }

    #[test]
    fn invariants_hold_by_construction() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(1.3, 0.8);
        let mut s = ConformalState::new(&g);
        assert!(s.u.values.iter().all(|v| *v == 0.0));
        for k in 0..50 {
            let d_old = ScalarField::from_fn(&g, |x| (1.0 + x[0].sin()) * (1.0 + 0.01 * k as f64));
            let d_new = ScalarField::from_fn(&g, |x| (1.0 + x[0].sin()) * (1.0 + 0.01 * (k + 1) as f64));
            s = s.update_quadrature(&d_old, &d_new, 2e-3, &p);
            let closed = s.closed_form_exp4u(&p);
            let bound = (4.0 * p.a * s.t).exp();
            for (u, c) in s.u.values.iter().zip(&closed.values) {
                assert!(((4.0 * u).exp() - c).abs() <= 1e-12 * c);
                assert!((-4.0 * u).exp() <= bound);
            }
        }
    }

    #[test]
    fn ode_route_examples() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(1.0, 1.0);
        let s = run_ode(&g, 0.0, &p, 0.1, 1);
        assert!((s.u.values[0] + 0.1).abs() < 1e-8);

        let s = run_ode(&g, 2.0, &p, 1e-3, 500);
        let e4u = (4.0 * s.u.values[0]).exp();
        assert!((e4u - (2.0 - (-2.0f64).exp())).abs() < 1e-6);

        let s0 = ConformalState::new(&g);
        let dens = ScalarField::constant(&g, 2.0);
        assert_eq!(s0.update_ode(&dens, 0.0, &p), s0);
    }

    #[test]
    fn routes_agree_at_second_order() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(1.0, 1.0);
        let err = |dt: f64, steps: usize| {
            let q = run_quadrature(&g, 2.0, &p, dt, steps);
            let o = run_ode(&g, 2.0, &p, dt, steps);
            (q.u.values[0] - o.u.values[0]).abs()
        };
        let e1 = err(1e-2, 50);
        let e2 = err(5e-3, 100);
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn rescaling_preserves_u() {
        let g = Grid4::new(8, 3).unwrap();
        let p = params(50.0, 1.0);
        let dens = ScalarField::constant(&g, 2.0);
        let mut s = ConformalState::new(&g);
        for _ in 0..200 {
            s = s.update_quadrature(&dens, &dens, 0.01, &p);
        }
        assert!(s.log_scale > 0.0);
        assert!(s.u.is_finite());
        // fixed point of the discrete recursion
        // S⁺ = e^{-4ah} S + 2bhD (1 + e^{-4ah}) for S = e^{4u}
        let q = (-4.0 * 50.0 * 0.01f64).exp();
        let fixed = 2.0 * 0.01 * 2.0 * (1.0 + q) / (1.0 - q);
        let e4u = (4.0 * s.u.values[0]).exp();
        assert!((e4u - fixed).abs() < 1e-10 * fixed);
    }
}
