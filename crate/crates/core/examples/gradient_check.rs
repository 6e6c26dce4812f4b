//! Finite differences of the bienergy against its first variation.

use bichf::flow::gradient_check;
use bichf::init::{generate_initial, InitSpec};
use bichf::lattice::{Grid4, MapField};
use bichf::target::SphereTarget;

fn main() -> bichf::Result<()> {
    let grid = Grid4::new(8, 3)?;
    let target = SphereTarget::new(3)?;
    let f = generate_initial(
        &grid,
        &target,
        &InitSpec::RandomBandlimited { mode_cap: 2, amplitude: 0.5 },
        11,
    )?;
    let v = MapField::from_fn(&grid, |x, o| {
        o[0] = (x[0] + 2.0 * x[2]).sin();
        o[1] = x[1].cos() * x[3].sin();
        o[2] = 0.3;
    });
    for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
        let (fd, analytic) = gradient_check(&grid, &f, &v, eps)?;
        println!("eps {eps:.0e}: fd {fd:.12e}, analytic {analytic:.12e}, rel {:.3e}", ((fd - analytic) / analytic).abs());
    }
    Ok(())
}
