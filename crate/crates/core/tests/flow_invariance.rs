use proptest::prelude::*;

use bichf::flow::{bienergy, density, rhs_projection, stability_dt, step, FlowParams, FlowState};
use bichf::init::{generate_initial, InitSpec};
use bichf::lattice::{Grid4, MapField, ScalarField};
use bichf::target::SphereTarget;

fn random(grid: &Grid4, seed: u64) -> MapField {
    let t = SphereTarget::new(grid.ambient_dim()).unwrap();
    generate_initial(
        grid,
        &t,
        &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
        seed,
    )
    .unwrap()
}

fn rotate(f: &MapField, theta: f64) -> MapField {
    let (s, c) = theta.sin_cos();
    let mut out = f.clone();
    for i in 0..f.len() {
        let (a, b) = (f.components[0][i], f.components[1][i]);
        out.components[0][i] = c * a - s * b;
        out.components[1][i] = s * a + c * b;
    }
    out
}

fn shift(grid: &Grid4, f: &MapField, by: [usize; 4]) -> MapField {
    let n = grid.n();
    let mut out = f.clone();
    for idx in 0..grid.len() {
        let m = grid.multi_index(idx);
        let src = grid.index([0, 1, 2, 3].map(|i| (m[i] + by[i]) % n));
        for a in 0..f.ambient_dim() {
            out.components[a][idx] = f.components[a][src];
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bienergy_is_invariant_under_target_rotation(seed in 0u64..1000, theta in 0.0..6.28f64) {
        let g = Grid4::new(8, 3).unwrap();
        let f = random(&g, seed);
        let e = bienergy(&g, &f);
        let er = bienergy(&g, &rotate(&f, theta));
        prop_assert!((e - er).abs() <= 1e-10 * e);
    }

    #[test]
    fn velocity_commutes_with_target_rotation(seed in 0u64..1000, theta in 0.0..6.28f64) {
        let g = Grid4::new(8, 3).unwrap();
        let t = SphereTarget::new(3).unwrap();
        let f = random(&g, seed);
        let z = ScalarField::zeros(&g);
        let v = rhs_projection(&g, &t, &f, &z).unwrap();
        let vr = rhs_projection(&g, &t, &rotate(&f, theta), &z).unwrap();
        prop_assert!(rotate(&v, theta).sub(&vr).max_abs() <= 1e-9 * (1.0 + v.max_abs()));
    }

    #[test]
    fn density_moves_with_grid_translations(seed in 0u64..1000, by in prop::array::uniform4(0usize..8)) {
        let g = Grid4::new(8, 3).unwrap();
        let f = random(&g, seed);
        let d = density(&g, &f);
        let ds = density(&g, &shift(&g, &f, by));
        for idx in 0..g.len() {
            let m = g.multi_index(idx);
            let src = g.index([0, 1, 2, 3].map(|i| (m[i] + by[i]) % 8));
            prop_assert!((ds.values[idx] - d.values[src]).abs() <= 1e-9 * (1.0 + d.values[src]));
        }
    }

    #[test]
    fn one_step_decreases_energy_and_stays_on_sphere(seed in 0u64..1000) {
        let g = Grid4::new(8, 3).unwrap();
        let t = SphereTarget::new(3).unwrap();
        let s = FlowState::new(&g, random(&g, seed));
        let p = FlowParams { dt: stability_dt(&g, s.u(), &FlowParams::default()), ..FlowParams::default() };
        let next = step(&g, &t, &s, &p).unwrap();
        prop_assert!(bienergy(&g, &next.f) < bienergy(&g, &s.f));
        prop_assert!(next.f.sphere_defect() <= 1e-12);
        prop_assert!((next.t - p.dt).abs() <= 1e-15);
    }
}

#[test]
fn ambient_dimension_does_not_change_a_circle() {
    for l in [2, 3, 5] {
        let g = Grid4::new(8, l).unwrap();
        let t = SphereTarget::new(l).unwrap();
        let f = generate_initial(&g, &t, &InitSpec::Circle(1), 0).unwrap();
        let e = bienergy(&g, &f);
        assert!((e - 0.5 * bichf::lattice::TORUS_VOLUME).abs() <= 1e-9, "L = {l}: {e}");
    }
}
