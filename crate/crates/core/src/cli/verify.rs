use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{Mode, RunConfig};
use super::run::{run, RunOutcome};
use crate::diagnostics::{epu_growth_check, matrix_lemma_check, volume_identity_residual};
use crate::error::Result;
use crate::flow::ConformalRoute;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
            Status::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.status, self.name, self.detail)
    }
}

#[derive(Debug)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub outcome: RunOutcome,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

pub const MATRIX_LEMMA_SAMPLES: usize = 100_000;

/// Largest `lhs / rhs` of the matrix inequality over Gaussian `(H, v)`
/// pairs, with the number of violations.
pub fn matrix_lemma_sweep(samples: usize, seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut h = [[0.0; 4]; 4];
        for row in h.iter_mut() {
            for x in row.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
        }
        let mut v = [0.0; 4];
        for x in v.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let (lhs, rhs) = matrix_lemma_check(&h, &v);
        if lhs > rhs {
            violations += 1;
        }
        worst = worst.max(lhs / rhs);
    }
    (violations, worst)
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Runs the configuration in memory and evaluates every monitored
/// property on the resulting history.
pub fn verify(config: &RunConfig) -> Result<VerifyReport> {
    let mut cfg = config.clone();
    cfg.out_dir = None;
    let out = run(&cfg)?;
    let p = cfg.effective_params();
    let h = &out.history;
    let mut checks = Vec::new();

    checks.push(check(
        "run completed",
        out.abort.is_none(),
        match &out.abort {
            None => format!("t = {:.6e} after {} steps", out.final_state.t, out.final_state.step_count),
            Some(e) => e.to_string(),
        },
    ));
    checks.push(check(
        "sphere constraint",
        out.max_sphere_defect <= 1e-12,
        format!("max ||f| - 1| after projection = {:.3e}", out.max_sphere_defect),
    ));

    let e0 = h.first().map_or(0.0, |r| r.energy);
    let worst_rise = h
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(check(
        "energy non-increasing",
        h.len() < 2 || worst_rise <= 1e-8 * (1.0 + e0),
        format!("largest increase between records = {worst_rise:.3e}"),
    ));

    checks.push(check(
        "conformal lower bound",
        out.bound_violations == 0,
        format!("{} points with e^(-4u) > e^(4at)", out.bound_violations),
    ));

    let limit = 1.5 * 4.0 * p.a * e0;
    let worst_diss = h.iter().map(|r| r.dissipation).fold(0.0, f64::max);
    checks.push(check(
        "dissipation bound",
        worst_diss <= limit,
        format!("max dissipation {worst_diss:.6e} vs 1.5*4a*E(0) = {limit:.6e}"),
    ));
    let d0 = h.first().map_or(0.0, |r| r.dissipation);
    let floor = 1e-9 * (1.0 + d0);
    let with_initial = h
        .iter()
        .all(|r| r.dissipation <= 1.5 * (d0 + 4.0 * p.a * (e0 - r.energy)) + floor);
    checks.push(check(
        "dissipation bound with initial term",
        with_initial,
        format!("dissipation(t) <= 1.5*(dissipation(0) + 4a(E(0) - E(t))), dissipation(0) = {d0:.6e}"),
    ));

    let worst_flat = h
        .iter()
        .map(|r| (r.hess2 - r.lap2).abs() / r.lap2.max(1e-300))
        .fold(0.0, f64::max);
    checks.push(check(
        "flat-torus identity",
        worst_flat <= 1e-9,
        format!("max relative |hess2 - lap2| = {worst_flat:.3e}"),
    ));

    if cfg.mode != Mode::Biharmonic && p.route == ConformalRoute::Quadrature && cfg.record_every == 1 {
        let res = volume_identity_residual(h, &p);
        checks.push(check("volume identity", res <= 1e-10, format!("max relative residual = {res:.3e}")));
    } else {
        checks.push(Check {
            name: "volume identity",
            status: Status::Skip,
            detail: "needs the quadrature route with every step recorded".into(),
        });
    }

    let epu = epu_growth_check(h, 2, &p)?;
    checks.push(check("e^pu growth (p = 2)", epu.holds, format!("margin = {:.6e}", epu.margin)));
    for q in [3, 4] {
        let r = epu_growth_check(h, q, &p)?;
        checks.push(Check {
            name: if q == 3 { "e^pu growth (p = 3)" } else { "e^pu growth (p = 4)" },
            status: Status::Info,
            detail: format!("margin = {:.6e}", r.margin),
        });
    }

    if cfg.mode == Mode::Biharmonic {
        let zero = h.iter().all(|r| r.u_min == 0.0 && r.u_max == 0.0);
        checks.push(check("biharmonic reduction", zero, "u identically zero in every record".into()));
    }

    let monotone = h.iter().all(|r| r.scale_monotone);
    let flagged = h.iter().filter(|r| r.flagged).count();
    checks.push(check(
        "concentration scale monotonicity",
        monotone,
        format!("{flagged} records flagged above epsilon1"),
    ));

    if !out.picard_distances.is_empty() {
        let bad = out
            .picard_distances
            .iter()
            .filter(|d| d.windows(2).skip(1).any(|w| !(w[1] < w[0])))
            .count();
        let worst = out
            .picard_distances
            .iter()
            .flat_map(|d| d.windows(2).skip(1).map(|w| w[1] / w[0]))
            .fold(0.0, f64::max);
        checks.push(check(
            "picard contraction",
            bad == 0,
            format!(
                "{} windows, {bad} non-contracting, worst ratio {worst:.3e}",
                out.picard_distances.len()
            ),
        ));
    }

    let (violations, worst) = matrix_lemma_sweep(MATRIX_LEMMA_SAMPLES, cfg.seed);
    checks.push(check(
        "matrix lemma",
        violations == 0,
        format!("{violations} violations in {MATRIX_LEMMA_SAMPLES} samples, max lhs/rhs = {worst:.6}"),
    ));

    Ok(VerifyReport { checks, outcome: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::parse_config;

    #[test]
    fn great_circle_suite_passes() {
        let c = parse_config("init = circle(1)\nt_end = 0.01").unwrap();
        let r = verify(&c).unwrap();
        for ch in &r.checks {
            assert_ne!(ch.status, Status::Fail, "{ch}");
        }
        assert!(r.passed());
    }

    #[test]
    fn matrix_sweep_small() {
        let (v, worst) = matrix_lemma_sweep(2000, 1);
        assert_eq!(v, 0);
        assert!(worst < 1.0 && worst > 0.1);
    }
}
