//! The headless property suite on a configuration file, or on a short
//! random run when no file is given.

use bichf::cli::{load_config, parse_config, verify};

fn main() -> bichf::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => load_config(path.as_ref())?,
        None => parse_config("init = random_bandlimited(2, 0.5)\nseed = 1\nt_end = 0.01")?,
    };
    let report = verify(&cfg)?;
    for c in &report.checks {
        println!("{c}");
    }
    println!("{}", if report.passed() { "all checks passed" } else { "some checks failed" });
    Ok(())
}
