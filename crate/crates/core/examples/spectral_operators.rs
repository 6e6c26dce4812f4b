//! Spectral calculus on the 4-torus: eigenvalues of a Fourier mode under
//! the Laplacian and bi-Laplacian, and the bi-Laplacian semigroup.

use bichf::lattice::{Grid4, MapField};

fn main() -> bichf::Result<()> {
    let grid = Grid4::new(16, 2)?;
    let k = [1.0, 2.0, 0.0, 3.0];
    let ksq: f64 = k.iter().map(|v| v * v).sum();
    let f = MapField::from_fn(&grid, |x, o| {
        o[0] = (k[0] * x[0] + k[1] * x[1] + k[3] * x[3]).cos();
    });

    let lap = grid.laplacian(&f);
    let bil = grid.bilaplacian(&f);
    let lap_err = lap.sub(&f.scale(-ksq)).max_abs();
    let bil_err = bil.sub(&f.scale(ksq * ksq)).max_abs();
    println!("|k|^2 = {ksq}");
    println!("max |Δf + |k|²f|   = {lap_err:.3e}");
    println!("max |Δ²f - |k|⁴f|  = {bil_err:.3e}");

    let t = 1e-3;
    let decayed = grid.bilaplacian_semigroup(&f, t);
    let expected = f.scale((-t * ksq * ksq).exp());
    println!(
        "semigroup at t = {t}: factor {:.6}, max error {:.3e}",
        (-t * ksq * ksq).exp(),
        decayed.sub(&expected).max_abs()
    );
    println!("∫f² = {:.6} (8π⁴ = {:.6})", grid.integrate(&f.norms_sq()), 8.0 * std::f64::consts::PI.powi(4));
    Ok(())
}
