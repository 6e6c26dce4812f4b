//! Localizing a concentrated bubble with the windowed bienergy density.

use std::f64::consts::PI;

use bichf::diagnostics::{concentration, ConcentrationConfig};
use bichf::flow::density;
use bichf::init::{generate_initial, InitSpec};
use bichf::lattice::Grid4;
use bichf::target::SphereTarget;

fn main() -> bichf::Result<()> {
    let grid = Grid4::new(16, 5)?;
    let target = SphereTarget::new(5)?;
    let cfg = ConcentrationConfig::default();
    for lambda in [1.0, 0.5, 0.25] {
        let f = generate_initial(&grid, &target, &InitSpec::Bubble { lambda, center: [PI; 4] }, 0)?;
        let d = density(&grid, &f);
        let c = concentration(&grid, &d.values, &cfg)?;
        println!("bubble({lambda}): max density {:.3e}", d.max());
        for (r, mass) in &c.profile {
            println!("  r = {r:.4}: {mass:.6e}");
        }
        println!(
            "  argmax {:?} (index {:?}), flagged = {}",
            c.center.map(|x| (x * 1e6).round() / 1e6),
            c.center_index,
            c.flagged
        );
    }
    Ok(())
}
