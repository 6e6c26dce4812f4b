//! Windowed Picard iteration for the coupled flow.
//!
//! On a window `[t₀, t₀ + T]` the map `(f, u) ↦ (S₁(f, u), S₂(f, u))` is
//! iterated, where `h = S₁(f, u)` solves the linear problem
//!
//! ```text
//! (∂_t + e^{-4u} Δ²) h = e^{-4u} B(f),   h(t₀) = f(t₀)
//! ```
//!
//! and `v = S₂(f, u)` is the conformal factor produced by the density of `f`.
//! The iteration starts from the biharmonic semigroup applied to `f(t₀)`.

use crate::error::{Error, Result};
use crate::flow::{
    density, explicit_normal_term, projected_normal_term, ConformalState, FlowParams, FlowState,
};
use crate::lattice::{Grid4, MapField, ScalarField};
use crate::target::SphereTarget;

/// How `S₁` evaluates the normal term `B(f)` of its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalSource {
    /// Term-by-term assembly from derivatives of `f` and the sphere forms.
    Explicit,
    /// `⟨Δ²f, y⟩ y` at `y = f/|f|`; matches the explicit steppers exactly.
    Projected,
}

impl std::str::FromStr for NormalSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "explicit" => Ok(NormalSource::Explicit),
            "projected" => Ok(NormalSource::Projected),
            _ => Err(format!("unknown normal source '{s}'")),
        }
    }
}

impl std::fmt::Display for NormalSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormalSource::Explicit => "explicit",
            NormalSource::Projected => "projected",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub inner_steps: usize,
    /// Weight `c` in the distance `p2 / (2c) + z2`.
    pub norm_weight: f64,
    /// How many times a window may be halved before giving up.
    pub retry_cap: usize,
    /// Largest admissible window length.
    pub max_window: f64,
    pub source: NormalSource,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-5,
            inner_steps: 16,
            norm_weight: 1.0,
            retry_cap: 6,
            max_window: 1e-2,
            source: NormalSource::Explicit,
        }
    }
}

impl PicardSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 2 {
            return Err(Error::InvalidParam("picard max_iter must be at least 2".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam("picard tol must be positive".into()));
        }
        if self.inner_steps == 0 {
            return Err(Error::InvalidParam("picard inner_steps must be positive".into()));
        }
        if !(self.norm_weight > 0.0) {
            return Err(Error::InvalidParam("picard norm_weight must be positive".into()));
        }
        if !(self.max_window > 0.0) {
            return Err(Error::InvalidParam("picard max_window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardWindow {
    pub t_len: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub inner_steps: usize,
    pub source: NormalSource,
}

impl PicardWindow {
    pub fn new(t_len: f64, settings: &PicardSettings) -> Result<Self> {
        let w = Self {
            t_len,
            max_iter: settings.max_iter,
            tol: settings.tol,
            inner_steps: settings.inner_steps,
            source: settings.source,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_len > 0.0) || !(self.tol > 0.0) || self.max_iter < 2 || self.inner_steps == 0 {
            return Err(Error::InvalidParam(format!("invalid picard window {self:?}")));
        }
        Ok(())
    }

    pub fn inner_dt(&self) -> f64 {
        self.t_len / self.inner_steps as f64
    }

    /// Sample times relative to the window start.
    pub fn sample_times(&self) -> Vec<f64> {
        let dt = self.inner_dt();
        (0..=self.inner_steps).map(|k| k as f64 * dt).collect()
    }
}

/// Space-time L² pieces of the window norms: `(f, Δ²f, ∂_t f)` and
/// `(u, Δu, ∂_t u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNorms {
    pub p2_partial: f64,
    pub z2_partial: f64,
}

impl DiscreteNorms {
    /// Norms of the trajectory pair `(f, u)` sampled with spacing `dt`.
    pub fn of(grid: &Grid4, f: &[MapField], u: &[ScalarField], dt: f64) -> Self {
        let m = f.len();
        assert!(m >= 2 && u.len() == m);
        let w = |k: usize| if k == 0 || k == m - 1 { 0.5 * dt } else { dt };
        let mut p = 0.0;
        let mut z = 0.0;
        for k in 0..m {
            let bl = grid.bilaplacian(&f[k]);
            let lap = grid.laplacian_scalar(&u[k].values);
            let pf = map_sq_integral(grid, &f[k]) + map_sq_integral(grid, &bl);
            let zu = grid.integrate_slice(&sq(&u[k].values)) + grid.integrate_slice(&sq(&lap));
            p += w(k) * pf;
            z += w(k) * zu;
        }
        for k in 0..m - 1 {
            let df = f[k + 1].sub(&f[k]).scale(1.0 / dt);
            p += dt * map_sq_integral(grid, &df);
            let du: Vec<f64> = u[k + 1]
                .values
                .iter()
                .zip(&u[k].values)
                .map(|(a, b)| (a - b) / dt)
                .collect();
            z += dt * grid.integrate_slice(&sq(&du));
        }
        Self {
            p2_partial: p.sqrt(),
            z2_partial: z.sqrt(),
        }
    }

    /// Norms of the difference of two trajectory pairs.
    pub fn of_difference(
        grid: &Grid4,
        f_a: &[MapField],
        f_b: &[MapField],
        u_a: &[ScalarField],
        u_b: &[ScalarField],
        dt: f64,
    ) -> Self {
        let df: Vec<MapField> = f_a.iter().zip(f_b).map(|(a, b)| a.sub(b)).collect();
        let du: Vec<ScalarField> = u_a
            .iter()
            .zip(u_b)
            .map(|(a, b)| ScalarField {
                values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
            })
            .collect();
        Self::of(grid, &df, &du, dt)
    }

    pub fn distance(&self, c: f64) -> f64 {
        self.p2_partial / (2.0 * c) + self.z2_partial
    }
}

fn sq(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}

fn map_sq_integral(grid: &Grid4, f: &MapField) -> f64 {
    grid.integrate_slice(&f.norms_sq().values)
}

/// `S₁` with a prescribed source: `inner_steps` stabilized implicit steps of
/// `∂_t h + e^{-4u} Δ² h = g`, with coefficient and source taken at the
/// end of each sub-step.
pub fn s1_solve_with_source(
    grid: &Grid4,
    u_frozen: &[ScalarField],
    source: &[MapField],
    f0: &MapField,
    window: &PicardWindow,
) -> Vec<MapField> {
    let m = window.inner_steps;
    assert!(u_frozen.len() == m + 1 && source.len() == m + 1);
    let dt = window.inner_dt();
    let mut out = Vec::with_capacity(m + 1);
    out.push(f0.clone());
    for k in 0..m {
        let weight = u_frozen[k + 1].map(|v| (-4.0 * v).exp());
        let cbar = weight.max();
        let h = &out[k];
        let bl = grid.bilaplacian(h);
        let remainder = bl.scale_by(&weight.map(|w| cbar - w));
        let explicit = h.axpy(dt, &source[k + 1]).axpy(dt, &remainder);
        out.push(grid.inverse_bilaplacian_shift(&explicit, dt * cbar));
    }
    out
}

/// `S₁(f, u)` with source `e^{-4u} B(f)`, `B` evaluated as selected by
/// `window.source`.
pub fn s1_solve(
    grid: &Grid4,
    f_frozen: &[MapField],
    u_frozen: &[ScalarField],
    f0: &MapField,
    window: &PicardWindow,
) -> Vec<MapField> {
    let source: Vec<MapField> = f_frozen
        .iter()
        .zip(u_frozen)
        .map(|(f, u)| {
            let b = match window.source {
                NormalSource::Explicit => explicit_normal_term(grid, f),
                NormalSource::Projected => projected_normal_term(grid, f),
            };
            b.scale_by(&u.map(|v| (-4.0 * v).exp()))
        })
        .collect();
    s1_solve_with_source(grid, u_frozen, &source, f0, window)
}

/// `S₂(f)`: the conformal state at every sample time, continuing the
/// accumulator of `start` with the densities of `f_frozen`.
pub fn s2_solve(
    grid: &Grid4,
    f_frozen: &[MapField],
    window: &PicardWindow,
    params: &FlowParams,
    start: &ConformalState,
) -> Vec<ConformalState> {
    let densities: Vec<ScalarField> = f_frozen.iter().map(|f| density(grid, f)).collect();
    s2_from_densities(&densities, window.inner_dt(), params, start)
}

fn s2_from_densities(
    densities: &[ScalarField],
    dt: f64,
    params: &FlowParams,
    start: &ConformalState,
) -> Vec<ConformalState> {
    let mut out = Vec::with_capacity(densities.len());
    out.push(start.clone());
    for k in 1..densities.len() {
        let next = out[k - 1].update_quadrature(&densities[k - 1], &densities[k], dt, params);
        out.push(next);
    }
    out
}

/// Result of one converged window.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub state: FlowState,
    /// Successive-iterate distances, one per iteration.
    pub distances: Vec<f64>,
}

impl PicardOutcome {
    /// Ratios `d_{k+1} / d_k` of the distance sequence.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Iterates `(f, u) ← (S₁(f, u), S₂(f, u))` over one window starting at
/// `state`.
pub fn picard_iterate(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    window: &PicardWindow,
    params: &FlowParams,
) -> Result<PicardOutcome> {
    window.validate()?;
    if window.t_len > params.picard.max_window {
        return Err(Error::InvalidParam(format!(
            "picard window {} exceeds max_window {}",
            window.t_len, params.picard.max_window
        )));
    }
    target.check_field(&state.f)?;
    let c = params.picard.norm_weight;
    let dt = window.inner_dt();
    let times = window.sample_times();
    let f0 = &state.f;

    let mut f: Vec<MapField> = times
        .iter()
        .map(|&s| grid.bilaplacian_semigroup(f0, s))
        .collect();
    let mut u: Vec<ScalarField> = vec![state.u().clone(); times.len()];
    let mut distances = Vec::new();
    let mut converged = false;
    for iteration in 1..=window.max_iter {
        let f_next = s1_solve(grid, &f, &u, f0, window);
        let u_next: Vec<ScalarField> = s2_solve(grid, &f, window, params, &state.conformal)
            .into_iter()
            .map(|c| c.u)
            .collect();
        if f_next.iter().any(|h| !h.is_finite()) {
            return Err(Error::NonFinite { what: "picard iterate", t: state.t + window.t_len });
        }
        let d = DiscreteNorms::of_difference(grid, &f_next, &f, &u_next, &u, dt).distance(c);
        distances.push(d);
        f = f_next;
        u = u_next;
        if d < window.tol {
            converged = true;
            break;
        }
        let k = distances.len();
        if k >= 3 && !(distances[k - 1] < distances[k - 2]) {
            return Err(Error::NonContraction { iteration, distances });
        }
    }
    if !converged {
        return Err(Error::NonContraction { iteration: window.max_iter, distances });
    }

    let f_raw = f.pop().expect("window has samples");
    let t_end = state.t + window.t_len;
    let norms = f_raw.norms();
    let min_norm = norms.min();
    if min_norm < crate::target::MIN_PROJECTABLE_NORM {
        return Err(Error::SphereDeparture { t: t_end, min_norm });
    }
    let drift = norms
        .values
        .iter()
        .fold(0.0, |m: f64, r| m.max((r - 1.0).abs()));
    let f_end = target.project_field(&f_raw)?;

    let (conformal, d_end) = match params.route {
        crate::flow::ConformalRoute::Frozen => {
            let mut c = state.conformal.clone();
            c.t = t_end;
            (c, None)
        }
        _ => {
            let mut dens: Vec<ScalarField> = f.iter().map(|h| density(grid, h)).collect();
            let d_end = density(grid, &f_end);
            dens.push(d_end.clone());
            let mut c = s2_from_densities(&dens, dt, params, &state.conformal)
                .pop()
                .expect("window has samples");
            // pin the clock so repeated sub-step sums do not leak into u
            c.t = t_end;
            c.refresh_u(params);
            (c, Some(d_end))
        }
    };
    if !conformal.u.is_finite() {
        return Err(Error::NonFinite { what: "u", t: t_end });
    }
    Ok(PicardOutcome {
        state: FlowState {
            f: f_end,
            conformal,
            t: t_end,
            step_count: state.step_count + 1,
            last_drift: drift,
            density: d_end,
        },
        distances,
    })
}

/// Advances by `params.dt`, halving the window on non-contraction.
/// Returns the new state and the distance history of every sub-window.
pub fn advance_with_history(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    params: &FlowParams,
) -> Result<(FlowState, Vec<Vec<f64>>)> {
    let settings = &params.picard;
    'retry: for r in 0..=settings.retry_cap {
        let pieces = 1usize << r;
        let window = PicardWindow::new(params.dt / pieces as f64, settings)?;
        let mut s = state.clone();
        let mut history = Vec::with_capacity(pieces);
        for _ in 0..pieces {
            match picard_iterate(grid, target, &s, &window, params) {
                Ok(out) => {
                    history.push(out.distances);
                    s = out.state;
                }
                Err(Error::NonContraction { .. }) => continue 'retry,
                Err(e) => return Err(e),
            }
        }
        s.step_count = state.step_count + 1;
        return Ok((s, history));
    }
    Err(Error::NonContractionCap { retries: settings.retry_cap })
}

pub(crate) fn picard_advance(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    params: &FlowParams,
) -> Result<FlowState> {
    advance_with_history(grid, target, state, params).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{stability_dt, step, Scheme};
    use crate::init::{generate_initial, InitSpec};

    fn setup() -> (Grid4, SphereTarget) {
        (Grid4::new(8, 3).unwrap(), SphereTarget::new(3).unwrap())
    }

    fn window(t: f64, inner: usize) -> PicardWindow {
        PicardWindow::new(
            t,
            &PicardSettings {
                inner_steps: inner,
                ..PicardSettings::default()
            },
        )
        .unwrap()
    }

    fn zeros_u(g: &Grid4, m: usize) -> Vec<ScalarField> {
        vec![ScalarField::zeros(g); m + 1]
    }

    #[test]
    fn s1_keeps_constant_map() {
        let (g, t) = setup();
        let f = generate_initial(&g, &t, &InitSpec::Constant, 0).unwrap();
        let w = window(1e-3, 4);
        let h = s1_solve(&g, &vec![f.clone(); 5], &zeros_u(&g, 4), &f, &w);
        for hk in &h {
            assert!(hk.sub(&f).max_abs() <= 1e-15);
        }
    }

    #[test]
    fn s1_mode_decay_matches_implicit_stability_function() {
        let (g, _) = setup();
        let m = 10;
        let w = window(1e-2, m);
        let f0 = MapField::from_fn(&g, |x, o| {
            o[0] = (x[0] + x[1]).cos();
            o[1] = (2.0 * x[2]).sin();
            o[2] = 0.0;
        });
        let zero = vec![MapField::zeros(&g); m + 1];
        let h = s1_solve_with_source(&g, &zeros_u(&g, m), &zero, &f0, &w);
        let idx = g.index([0, 0, 0, 0]);
        let z0 = w.inner_dt() * 4.0;
        let r0 = h[m].components[0][idx];
        assert!((r0 - (1.0 + z0).powi(-(m as i32))).abs() < 1e-12);
        assert!((r0 - (-4.0 * w.t_len).exp()).abs() < 16.0 * w.t_len * w.t_len / m as f64);
        let idx = g.index([0, 0, 1, 0]);
        let z1 = w.inner_dt() * 16.0;
        let r1 = h[m].components[1][idx] / f0.components[1][idx];
        assert!((r1 - (1.0 + z1).powi(-(m as i32))).abs() < 1e-12);
    }

    #[test]
    fn s1_keeps_great_circle() {
        let (g, t) = setup();
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let w = window(1e-3, 4);
        let h = s1_solve(&g, &vec![f.clone(); 5], &zeros_u(&g, 4), &f, &w);
        assert!(h[4].sub(&f).max_abs() <= 1e-9);
    }

    #[test]
    fn s2_examples() {
        let (g, t) = setup();
        let p = FlowParams::default();
        let start = ConformalState::new(&g);
        let c = generate_initial(&g, &t, &InitSpec::Constant, 0).unwrap();
        let w = window(0.1, 5);
        let v = s2_solve(&g, &vec![c; 6], &w, &p, &start);
        assert_eq!(v[0].u, start.u);
        for (k, s) in v.iter().enumerate() {
            let expected = -(p.a * (k as f64 * w.inner_dt()));
            assert!(s.u.values.iter().all(|u| (u - expected).abs() <= 1e-15));
        }

        let circle = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let w = window(1e-2, 10);
        let v = s2_solve(&g, &vec![circle; 11], &w, &p, &start);
        let e4u = (4.0 * v[10].u.values[0]).exp();
        assert!((e4u - (2.0 - (-0.04f64).exp())).abs() < 1e-6);

        let v = s2_from_densities(&[ScalarField::constant(&g, 2.0)], 0.0, &p, &start);
        assert_eq!(v.len(), 1);
        assert!(v[0].u.values.iter().all(|u| *u == 0.0));
    }

    #[test]
    fn s1_is_linear() {
        let (g, _) = setup();
        let m = 3;
        let w = window(1e-3, m);
        let f0 = MapField::from_fn(&g, |x, o| {
            o[0] = x[0].sin() * x[3].cos();
            o[1] = (x[1] - x[2]).cos();
            o[2] = 0.3;
        });
        let src: Vec<MapField> = (0..=m)
            .map(|k| MapField::from_fn(&g, |x, o| o.iter_mut().for_each(|v| *v = (x[0] + k as f64).sin())))
            .collect();
        let u: Vec<ScalarField> = (0..=m)
            .map(|k| ScalarField::from_fn(&g, |x| 0.1 * (x[1] + k as f64).cos()))
            .collect();
        let h1 = s1_solve_with_source(&g, &u, &src, &f0, &w);
        let alpha = -1.7;
        let src_a: Vec<MapField> = src.iter().map(|s| s.scale(alpha)).collect();
        let h2 = s1_solve_with_source(&g, &u, &src_a, &f0.scale(alpha), &w);
        for (a, b) in h1.iter().zip(&h2) {
            assert!(a.scale(alpha).sub(b).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn picard_recovers_great_circle() {
        let (g, t) = setup();
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let p = FlowParams {
            scheme: Scheme::Picard,
            ..FlowParams::default()
        };
        let w = PicardWindow::new(1e-3, &p.picard).unwrap();
        let out = picard_iterate(&g, &t, &FlowState::new(&g, f.clone()), &w, &p).unwrap();
        assert!(out.distances.len() <= 3, "{:?}", out.distances);
        assert!(out.state.f.sub(&f).max_abs() <= 1e-8);
        let e4u = (4.0 * out.state.u().values[0]).exp();
        assert!((e4u - (2.0 - (-4e-3f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn picard_constant_map() {
        let (g, t) = setup();
        let f = generate_initial(&g, &t, &InitSpec::Constant, 0).unwrap();
        let p = FlowParams::default();
        let w = PicardWindow::new(1e-3, &p.picard).unwrap();
        let out = picard_iterate(&g, &t, &FlowState::new(&g, f.clone()), &w, &p).unwrap();
        assert!(out.distances.len() <= 2);
        assert_eq!(out.state.f, f);
        assert!(out.state.u().values.iter().all(|u| *u == -(p.a * 1e-3)));
    }

    fn random_window_gap(source: NormalSource, frac: f64) -> (f64, PicardOutcome) {
        let (g, t) = setup();
        let f = generate_initial(
            &g,
            &t,
            &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
            3,
        )
        .unwrap();
        let mut p = FlowParams::default();
        p.picard.source = source;
        p.dt = frac * stability_dt(&g, &ScalarField::zeros(&g), &p);
        let s0 = FlowState::new(&g, f);
        let rk = step(&g, &t, &s0, &p).unwrap();
        let w = PicardWindow::new(p.dt, &p.picard).unwrap();
        let out = picard_iterate(&g, &t, &s0, &w, &p).unwrap();
        (out.state.f.sub(&rk.f).max_abs(), out)
    }

    #[test]
    fn picard_random_data_contracts_and_is_consistent() {
        let (d1, out) = random_window_gap(NormalSource::Explicit, 1.0);
        for k in 2..out.distances.len() {
            assert!(out.distances[k] < out.distances[k - 1]);
        }
        let (d2, _) = random_window_gap(NormalSource::Explicit, 0.5);
        assert!(d1 / d2 >= 1.8, "ratio {}", d1 / d2);
    }

    #[test]
    fn projected_source_matches_rk4_at_second_order() {
        let (d1, _) = random_window_gap(NormalSource::Projected, 1.0);
        let (d2, _) = random_window_gap(NormalSource::Projected, 0.5);
        assert!(d1 <= 1e-4, "{d1}");
        assert!(d1 / d2 >= 3.0, "ratio {}", d1 / d2);
    }

    #[test]
    fn halving_exhausts_cap() {
        let (g, t) = setup();
        let f = generate_initial(
            &g,
            &t,
            &InitSpec::RandomBandlimited { mode_cap: 3, amplitude: 0.9 },
            5,
        )
        .unwrap();
        let p = FlowParams {
            dt: 1e-2,
            scheme: Scheme::Picard,
            picard: PicardSettings {
                max_iter: 3,
                tol: 1e-30,
                retry_cap: 1,
                ..PicardSettings::default()
            },
            ..FlowParams::default()
        };
        let r = advance_with_history(&g, &t, &FlowState::new(&g, f), &p);
        assert!(matches!(r, Err(Error::NonContractionCap { retries: 1 })));
    }
}
