use super::rhs::{density, stage_rhs};
use super::{ConformalRoute, FlowParams, FlowState, Scheme, RK4_STABILITY_EXTENT};
use crate::error::{Error, Result};
use crate::fixedpoint;
use crate::lattice::{Grid4, MapField, ScalarField};
use crate::target::{tangential_field_unchecked, SphereTarget, MIN_PROJECTABLE_NORM};

/// Largest stable explicit step: `cfl · 2.78 / (n⁴ · max e^{-4u})`.
pub fn stability_dt(grid: &Grid4, u: &ScalarField, params: &FlowParams) -> f64 {
    let cmax = u
        .values
        .iter()
        .map(|v| (-4.0 * v).exp())
        .fold(0.0, f64::max);
    params.cfl_safety * RK4_STABILITY_EXTENT / (grid.bilaplacian_symbol_bound() * cmax)
}

/// One step with the scheme selected in `params`.
pub fn advance(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    params: &FlowParams,
) -> Result<FlowState> {
    match params.scheme {
        Scheme::ExplicitRk4 => step(grid, target, state, params),
        Scheme::StabilizedImex => step_imex(grid, target, state, params),
        Scheme::Picard => fixedpoint::picard_advance(grid, target, state, params),
    }
}

fn conformal_rate(u: &ScalarField, d: &ScalarField, params: &FlowParams) -> ScalarField {
    ScalarField {
        values: u
            .values
            .iter()
            .zip(&d.values)
            .map(|(u, d)| params.b * (-4.0 * u).exp() * d - params.a)
            .collect(),
    }
}

fn add_scaled(u: &ScalarField, s: f64, v: &ScalarField) -> ScalarField {
    ScalarField {
        values: u.values.iter().zip(&v.values).map(|(a, b)| a + s * b).collect(),
    }
}

/// Classical RK4 on the coupled system. The conformal stages use the ODE
/// form; the accepted `u` then comes from the selected route.
pub fn step(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    params: &FlowParams,
) -> Result<FlowState> {
    let dt = params.dt;
    let limit = stability_dt(grid, state.u(), params);
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    target.check_field(&state.f)?;
    let frozen = params.route == ConformalRoute::Frozen;
    let mut state = state.clone();
    let t0 = state.t;

    let d0 = if frozen {
        None
    } else {
        Some(state.density_cached(grid))
    };
    let eval = |f: &MapField, u: &ScalarField, d: Option<ScalarField>, t: f64| -> Result<_> {
        let ft = stage_rhs(grid, f, u, t)?;
        let ut = if frozen {
            None
        } else {
            let d = d.unwrap_or_else(|| density(grid, f));
            Some(conformal_rate(u, &d, params))
        };
        Ok((ft, ut))
    };
    let u0 = state.u().clone();
    let f0 = &state.f;
    let stage_u = |du: &Option<ScalarField>, s: f64| match du {
        Some(du) => add_scaled(&u0, s, du),
        None => u0.clone(),
    };

    let (k1, l1) = eval(f0, &u0, d0.clone(), t0)?;
    let f2 = f0.axpy(0.5 * dt, &k1);
    let (k2, l2) = eval(&f2, &stage_u(&l1, 0.5 * dt), None, t0 + 0.5 * dt)?;
    let f3 = f0.axpy(0.5 * dt, &k2);
    let (k3, l3) = eval(&f3, &stage_u(&l2, 0.5 * dt), None, t0 + 0.5 * dt)?;
    let f4 = f0.axpy(dt, &k3);
    let (k4, l4) = eval(&f4, &stage_u(&l3, dt), None, t0 + dt)?;

    let f_raw = f0
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4);
    let u_ode = match (l1, l2, l3, l4) {
        (Some(l1), Some(l2), Some(l3), Some(l4)) => Some(ScalarField {
            values: (0..u0.len())
                .map(|i| {
                    u0.values[i]
                        + dt / 6.0
                            * (l1.values[i] + 2.0 * l2.values[i] + 2.0 * l3.values[i] + l4.values[i])
                })
                .collect(),
        }),
        _ => None,
    };
    finish_step(grid, target, &mut state, f_raw, u_ode, dt, params)
}

/// First-order stabilized splitting: the stiff part `c̄ Δ²` is treated
/// implicitly (diagonal in Fourier space) and the remainder explicitly,
///
/// ```text
/// (1 + dt c̄ Δ²) f⁺ = f + dt (rhs + c̄ Δ²f),   c̄ = max e^{-4u}.
/// ```
pub fn step_imex(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    params: &FlowParams,
) -> Result<FlowState> {
    target.check_field(&state.f)?;
    let dt = params.dt;
    let mut state = state.clone();
    let u = state.u().clone();
    let weight = u.map(|v| (-4.0 * v).exp());
    let cbar = weight.max();
    let bl = grid.bilaplacian(&state.f);
    let rhs = tangential_field_unchecked(&state.f, &bl)
        .scale_by(&weight)
        .scale(-1.0);
    let explicit = state.f.axpy(dt, &rhs).axpy(dt * cbar, &bl);
    let f_raw = grid.inverse_bilaplacian_shift(&explicit, dt * cbar);
    let u_ode = match params.route {
        ConformalRoute::Ode => {
            let d = state.density_cached(grid);
            Some(state.conformal.update_ode(&d, dt, params).u)
        }
        _ => None,
    };
    finish_step(grid, target, &mut state, f_raw, u_ode, dt, params)
}

/// Reprojection and conformal update shared by every scheme.
pub(crate) fn finish_step(
    grid: &Grid4,
    target: &SphereTarget,
    state: &mut FlowState,
    f_raw: MapField,
    u_ode: Option<ScalarField>,
    dt: f64,
    params: &FlowParams,
) -> Result<FlowState> {
    let t_new = state.t + dt;
    if !f_raw.is_finite() {
        return Err(Error::NonFinite { what: "f", t: t_new });
    }
    let norms = f_raw.norms();
    let min_norm = norms.min();
    if min_norm < MIN_PROJECTABLE_NORM {
        return Err(Error::SphereDeparture { t: t_new, min_norm });
    }
    let drift = norms
        .values
        .iter()
        .fold(0.0, |m: f64, r| m.max((r - 1.0).abs()));
    let f_new = target.project_field(&f_raw)?;

    let (conformal, d_new) = match params.route {
        ConformalRoute::Frozen => {
            let mut c = state.conformal.clone();
            c.t = t_new;
            (c, None)
        }
        ConformalRoute::Quadrature | ConformalRoute::Ode => {
            let d_old = state.density_cached(grid);
            let d_new = density(grid, &f_new);
            let mut c = state.conformal.update_quadrature(&d_old, &d_new, dt, params);
            if params.route == ConformalRoute::Ode {
                if let Some(u) = u_ode {
                    c.u = u;
                }
            }
            (c, Some(d_new))
        }
    };
    if !conformal.u.is_finite() {
        return Err(Error::NonFinite { what: "u", t: t_new });
    }
    Ok(FlowState {
        f: f_new,
        conformal,
        t: t_new,
        step_count: state.step_count + 1,
        last_drift: drift,
        density: d_new,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{bienergy, rhs_projection};
    use crate::init::{generate_initial, InitSpec};

    fn setup(n: usize) -> (Grid4, SphereTarget) {
        (Grid4::new(n, 3).unwrap(), SphereTarget::new(3).unwrap())
    }

    #[test]
    fn stability_dt_examples() {
        let (g8, _) = setup(8);
        let p = FlowParams {
            cfl_safety: 1.0,
            ..FlowParams::default()
        };
        let u0 = ScalarField::zeros(&g8);
        let dt8 = stability_dt(&g8, &u0, &p);
        assert!((dt8 - 2.78 / 4096.0).abs() < 1e-18);
        assert!((dt8 - 6.79e-4).abs() < 1e-6);
        let (g16, _) = setup(16);
        let dt16 = stability_dt(&g16, &ScalarField::zeros(&g16), &p);
        assert!((dt16 - 4.24e-5).abs() < 1e-7);
        let half = ScalarField::constant(&g8, 0.25 * 2f64.ln());
        let dt_half = stability_dt(&g8, &half, &p);
        assert!((dt_half / dt8 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn great_circle_is_stationary() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let mut p = FlowParams::default();
        p.dt = stability_dt(&g, &ScalarField::zeros(&g), &p);
        let e0 = bienergy(&g, &f);
        let mut s = FlowState::new(&g, f.clone());
        for _ in 0..20 {
            s = step(&g, &t, &s, &p).unwrap();
            let ft = rhs_projection(&g, &t, &s.f, s.u()).unwrap();
            assert!(ft.max_abs() <= 1e-9);
        }
        assert!((bienergy(&g, &s.f) - e0).abs() <= 1e-12 * e0);
        // u follows the constant-density solution e^{4u} = 2 - e^{-4t} up to O(dt²)
        let e4u = (4.0 * s.u().values[0]).exp();
        assert!((e4u - (2.0 - (-4.0 * s.t).exp())).abs() < 1e-8);
    }

    #[test]
    fn constant_map_only_decays_u() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Constant, 0).unwrap();
        let p = FlowParams {
            dt: 1e-4,
            ..FlowParams::default()
        };
        let mut s = FlowState::new(&g, f.clone());
        for _ in 0..10 {
            s = step(&g, &t, &s, &p).unwrap();
        }
        assert_eq!(s.f, f);
        assert!(s.u().values.iter().all(|u| *u == -(p.a * s.t)));
    }

    #[test]
    fn random_init_energy_decreases() {
        let (g, t) = setup(8);
        let f = generate_initial(
            &g,
            &t,
            &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
            1,
        )
        .unwrap();
        let mut p = FlowParams::default();
        let mut s = FlowState::new(&g, f);
        let e0 = bienergy(&g, &s.f);
        let mut e = e0;
        for _ in 0..10 {
            p.dt = stability_dt(&g, s.u(), &p);
            s = step(&g, &t, &s, &p).unwrap();
            let e_next = bienergy(&g, &s.f);
            assert!(e_next <= e + 1e-8 * (1.0 + e0));
            e = e_next;
        }
        assert!(s.f.sphere_defect() <= 1e-12);
    }

    #[test]
    fn oversized_step_rejected() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let mut p = FlowParams::default();
        p.dt = 2.0 * stability_dt(&g, &ScalarField::zeros(&g), &p);
        let s = FlowState::new(&g, f);
        assert!(matches!(step(&g, &t, &s, &p), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn imex_damps_linear_modes_like_backward_euler() {
        let (g, t) = setup(8);
        let eps = 1e-6;
        // a single tangential mode on top of the constant map
        let f = MapField::from_fn(&g, |x, o| {
            o[0] = eps * (x[1] + x[2]).cos();
            o[1] = 0.0;
            o[2] = 1.0;
        });
        let f = t.project_field(&f).unwrap();
        let xi4 = 4.0; // |ξ|² = 2
        for dt in [1e-3, 1e-2, 1e-1] {
            let p = FlowParams {
                dt,
                scheme: Scheme::StabilizedImex,
                route: ConformalRoute::Frozen,
                ..FlowParams::default()
            };
            let s = step_imex(&g, &t, &FlowState::new(&g, f.clone()), &p).unwrap();
            let idx = g.index([0, 0, 0, 0]);
            let ratio = s.f.components[0][idx] / f.components[0][idx];
            let z = dt * xi4;
            assert!((ratio - 1.0 / (1.0 + z)).abs() < 1e-6, "dt={dt}");
            assert!((ratio - (-z).exp()).abs() <= z * z);
        }
    }

    #[test]
    fn imex_keeps_great_circle_and_survives_large_steps() {
        let (g, t) = setup(8);
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let p = FlowParams {
            dt: 0.05,
            scheme: Scheme::StabilizedImex,
            ..FlowParams::default()
        };
        let s = step_imex(&g, &t, &FlowState::new(&g, f.clone()), &p).unwrap();
        assert!(s.f.sub(&f).max_abs() <= 1e-9);

        let f = generate_initial(
            &g,
            &t,
            &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
            4,
        )
        .unwrap();
        let mut p = FlowParams {
            scheme: Scheme::StabilizedImex,
            ..FlowParams::default()
        };
        p.dt = 10.0 * stability_dt(&g, &ScalarField::zeros(&g), &p);
        let mut s = FlowState::new(&g, f);
        for _ in 0..20 {
            s = step_imex(&g, &t, &s, &p).unwrap();
            assert!(s.last_drift < 1.0);
        }
    }
}
