//! The stabilized IMEX scheme stays bounded at steps far beyond the
//! explicit limit, where RK4 refuses to step.

use bichf::flow::{bienergy, stability_dt, step, step_imex, FlowParams, FlowState, Scheme};
use bichf::init::{generate_initial, InitSpec};
use bichf::lattice::Grid4;
use bichf::target::SphereTarget;

fn main() -> bichf::Result<()> {
    let grid = Grid4::new(8, 3)?;
    let target = SphereTarget::new(3)?;
    let f = generate_initial(
        &grid,
        &target,
        &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
        1,
    )?;
    let mut s = FlowState::new(&grid, f);
    let limit = stability_dt(&grid, s.u(), &FlowParams::default());
    let p = FlowParams {
        dt: 10.0 * limit,
        scheme: Scheme::StabilizedImex,
        ..FlowParams::default()
    };

    match step(&grid, &target, &s, &p) {
        Ok(_) => println!("rk4 accepted dt = {:.3e}", p.dt),
        Err(e) => println!("rk4 at dt = {:.3e}: {e}", p.dt),
    }

    println!("explicit limit {limit:.3e}, imex dt {:.3e}", p.dt);
    for i in 0..=50 {
        if i % 10 == 0 {
            println!("step {i:>3}: t = {:.4e}, E = {:.6e}", s.t, bienergy(&grid, &s.f));
        }
        s = step_imex(&grid, &target, &s, &p)?;
    }
    Ok(())
}
