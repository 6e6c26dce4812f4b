//! The coupled flow next to the plain biharmonic map flow (`u ≡ 0`) from
//! the same data.

use bichf::cli::{parse_config, run};

fn main() -> bichf::Result<()> {
    let base = "init = random_bandlimited(2, 0.5)\nseed = 2\ndt = 2e-4\nt_end = 0.02\nrecord_every = 20";
    let coupled = run(&parse_config(base)?)?;
    let plain = run(&parse_config(&format!("{base}\nmode = biharmonic"))?)?;
    println!("{:>10} {:>14} {:>14} {:>10}", "t", "E bichf", "E biharmonic", "u_max");
    for (c, p) in coupled.history.iter().zip(&plain.history) {
        println!("{:>10.3e} {:>14.6e} {:>14.6e} {:>10.3e}", c.t, c.energy, p.energy, c.u_max);
    }
    Ok(())
}
