//! One Picard window for the coupled system: distances between successive
//! iterates, their contraction ratios and the gap to an RK4 step of the
//! same length.

use bichf::fixedpoint::{picard_iterate, NormalSource, PicardWindow};
use bichf::flow::{stability_dt, step, FlowParams, FlowState};
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
        3,
    )?;
    let s0 = FlowState::new(&grid, f);
    let t = stability_dt(&grid, s0.u(), &FlowParams::default());

    for source in [NormalSource::Explicit, NormalSource::Projected] {
        let mut p = FlowParams { dt: t, ..FlowParams::default() };
        p.picard.source = source;
        let w = PicardWindow::new(t, &p.picard)?;
        let out = picard_iterate(&grid, &target, &s0, &w, &p)?;
        let rk = step(&grid, &target, &s0, &p)?;
        println!("source = {source}, window {t:.3e}");
        for (i, d) in out.distances.iter().enumerate() {
            println!("  iteration {:>2}: distance {d:.3e}", i + 1);
        }
        println!("  ratios {:?}", out.contraction_ratios().iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>());
        println!("  max |picard - rk4| = {:.3e}", out.state.f.sub(&rk.f).max_abs());
    }
    Ok(())
}
