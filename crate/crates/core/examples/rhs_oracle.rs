//! The projected bi-Laplacian and the explicit normal-term form of the
//! right-hand side converge to each other spectrally.

use bichf::flow::{rhs_explicit_b, rhs_projection};
use bichf::init::{generate_initial, InitSpec};
use bichf::lattice::{Grid4, ScalarField};
use bichf::target::SphereTarget;

fn main() -> bichf::Result<()> {
    let target = SphereTarget::new(3)?;
    for cap in [2, 4] {
        for n in [8, 16, 32] {
            let grid = Grid4::new(n, 3)?;
            let spec = InitSpec::RandomBandlimited { mode_cap: cap, amplitude: 0.5 };
            if spec.validate(&grid).is_err() {
                continue;
            }
            let f = generate_initial(&grid, &target, &spec, 7)?;
            let u = ScalarField::zeros(&grid);
            let a = rhs_projection(&grid, &target, &f, &u)?;
            let b = rhs_explicit_b(&grid, &target, &f, &u)?;
            let d = a.sub(&b);
            let rel = (grid.integrate(&d.norms_sq()) / grid.integrate(&a.norms_sq())).sqrt();
            println!("mode cap {cap}, n = {n:>2}: relative L2 difference {rel:.3e}");
        }
    }
    Ok(())
}
