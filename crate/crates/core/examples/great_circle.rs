//! Great circles are stationary. The map stays fixed while the conformal
//! factor follows its closed form. For `circle(k)` the density is `2k⁴`, so
//! `e^{4u} = c + (1 - c) e^{-4at}` with `c = 2bk⁴/a`.

use bichf::cli::{parse_config, run};

fn main() -> bichf::Result<()> {
    for k in [1, 2] {
        let cfg = parse_config(&format!(
            "init = circle({k})\nt_end = 0.5\ndt = 1e-3\nscheme = stabilized-imex\nrecord_every = 100"
        ))?;
        let out = run(&cfg)?;
        let r = out.history.last().unwrap();
        let e4u = (4.0 * out.final_state.u().max()).exp();
        let c = 2.0 * f64::from(k).powi(4);
        let exact = c + (1.0 - c) * (-2.0f64).exp();
        println!(
            "circle({k}): E = {:.12} -> {:.12}, e^(4u) = {e4u:.8} vs {exact:.8}, rel err {:.2e}",
            out.history[0].energy,
            r.energy,
            (e4u - exact).abs() / exact
        );
    }
    Ok(())
}
