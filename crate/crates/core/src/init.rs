//! Initial maps `f₀ : T⁴ → S^{L-1}`.
//!
//! Random fields come from a ChaCha8 stream keyed by the run seed, so a
//! seed fully determines the data within a build.

use std::f64::consts::PI;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{periodic_displacement, Grid4, MapField};
use crate::target::SphereTarget;

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// The last basis vector `e_L`.
    Constant,
    /// `(cos k x₁, sin k x₁, 0, …)`.
    Circle(u32),
    /// `Π(e_L + noise)` with `max |noise| ≤ eps`.
    PerturbedConstant { eps: f64, mode_cap: usize },
    /// `Π(c + noise)` with a seed-drawn unit vector `c` and
    /// `max |noise| ≤ amplitude`.
    RandomBandlimited { mode_cap: usize, amplitude: f64 },
    /// Inverse stereographic bubble of scale `lambda` centred at `center`.
    Bubble { lambda: f64, center: [f64; 4] },
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Constant => write!(f, "constant"),
            InitSpec::Circle(k) => write!(f, "circle({k})"),
            InitSpec::PerturbedConstant { eps, mode_cap } => {
                write!(f, "perturbed_constant({eps},{mode_cap})")
            }
            InitSpec::RandomBandlimited {
                mode_cap,
                amplitude,
            } => write!(f, "random_bandlimited({mode_cap},{amplitude})"),
            InitSpec::Bubble { lambda, center } => write!(
                f,
                "bubble({lambda},({},{},{},{}))",
                center[0], center[1], center[2], center[3]
            ),
        }
    }
}

impl InitSpec {
    pub fn validate(&self, grid: &Grid4) -> Result<()> {
        let cap_ok = |cap: usize| {
            if cap >= grid.n() / 2 {
                Err(Error::InvalidParam(format!(
                    "mode_cap {cap} must be below n/2 = {}",
                    grid.n() / 2
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            InitSpec::Constant => Ok(()),
            InitSpec::Circle(k) => {
                if k as usize >= grid.n() / 2 {
                    Err(Error::InvalidParam(format!("circle wavenumber {k} is not resolved")))
                } else {
                    Ok(())
                }
            }
            InitSpec::PerturbedConstant { eps, mode_cap } => {
                cap_ok(mode_cap)?;
                if !(0.0..1.0).contains(&eps) {
                    return Err(Error::InvalidParam("eps must lie in [0, 1)".into()));
                }
                Ok(())
            }
            InitSpec::RandomBandlimited {
                mode_cap,
                amplitude,
            } => {
                cap_ok(mode_cap)?;
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(Error::InvalidParam("amplitude must lie in [0, 1)".into()));
                }
                Ok(())
            }
            InitSpec::Bubble { lambda, .. } => {
                if grid.ambient_dim() < 3 {
                    return Err(Error::InvalidParam("bubble needs L >= 3".into()));
                }
                if !(lambda > 0.0) {
                    return Err(Error::InvalidParam("bubble scale must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// Gaussian Fourier coefficients `c_k`, one per `k ∈ [-cap, cap]⁴` in
/// lexicographic order. The stream does not depend on the grid, so the same
/// seed gives the same continuum field at every resolution.
fn draw_coefficients(mode_cap: usize, rng: &mut ChaCha8Rng) -> Vec<([isize; 4], Complex64)> {
    let cap = mode_cap as isize;
    let mut out = Vec::with_capacity((2 * mode_cap + 1).pow(4));
    for a in -cap..=cap {
        for b in -cap..=cap {
            for c in -cap..=cap {
                for d in -cap..=cap {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    out.push(([a, b, c, d], Complex64::new(re, im)));
                }
            }
        }
    }
    out
}

/// `Re Σ c_k e^{ik·x}` sampled on the grid, together with `Σ |c_k|`, an upper
/// bound of its maximum that does not depend on the grid.
pub fn bandlimited_noise(grid: &Grid4, mode_cap: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = grid.n() as isize;
    let coeffs = draw_coefficients(mode_cap, rng);
    let mut hat = vec![Complex64::default(); grid.len()];
    let scale = grid.len() as f64;
    let wrap = |k: isize| k.rem_euclid(n) as usize;
    let mut bound = 0.0;
    for (k, c) in &coeffs {
        let idx = grid.index([wrap(k[0]), wrap(k[1]), wrap(k[2]), wrap(k[3])]);
        hat[idx] += c * scale;
        bound += c.norm();
    }
    (grid.inverse_real(hat), bound)
}

/// Vector noise with `max |g| ≤ max_norm`, scaled by the coefficient bound.
fn noise_field(grid: &Grid4, mode_cap: usize, max_norm: f64, rng: &mut ChaCha8Rng) -> MapField {
    let mut components = Vec::with_capacity(grid.ambient_dim());
    let mut bound_sq = 0.0;
    for _ in 0..grid.ambient_dim() {
        let (v, b) = bandlimited_noise(grid, mode_cap, rng);
        components.push(v);
        bound_sq += b * b;
    }
    let g = MapField { components };
    if bound_sq > 0.0 {
        g.scale(max_norm / bound_sq.sqrt())
    } else {
        g
    }
}

pub fn generate_initial(
    grid: &Grid4,
    target: &SphereTarget,
    spec: &InitSpec,
    seed: u64,
) -> Result<MapField> {
    spec.validate(grid)?;
    let l = grid.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = match *spec {
        InitSpec::Constant => MapField::from_fn(grid, |_, o| {
            o.fill(0.0);
            o[l - 1] = 1.0;
        }),
        InitSpec::Circle(k) => {
            let k = k as f64;
            MapField::from_fn(grid, |x, o| {
                o.fill(0.0);
                o[0] = (k * x[0]).cos();
                o[1] = (k * x[0]).sin();
            })
        }
        InitSpec::PerturbedConstant { eps, mode_cap } => {
            let base = MapField::from_fn(grid, |_, o| {
                o.fill(0.0);
                o[l - 1] = 1.0;
            });
            base.axpy(1.0, &noise_field(grid, mode_cap, eps, &mut rng))
        }
        InitSpec::RandomBandlimited {
            mode_cap,
            amplitude,
        } => {
            let mut c: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter_mut().for_each(|v| *v /= r);
            let base = MapField::from_fn(grid, |_, o| o.copy_from_slice(&c));
            base.axpy(1.0, &noise_field(grid, mode_cap, amplitude, &mut rng))
        }
        InitSpec::Bubble { lambda, center } => MapField::from_fn(grid, |x, o| {
            let d: Vec<f64> = x
                .iter()
                .zip(&center)
                .map(|(a, c)| periodic_displacement(*a, *c))
                .collect();
            // scale grows away from the centre so the other zeros of
            // (sin d₁, sin d₂) carry less density
            let spread: f64 = d.iter().map(|di| (di / 2.0).sin().powi(2)).sum();
            let scale = lambda * (1.0 + spread);
            let w = [d[0].sin() / scale, d[1].sin() / scale];
            let w2 = w[0] * w[0] + w[1] * w[1];
            o.fill(0.0);
            o[0] = 2.0 * w[0] / (w2 + 1.0);
            o[1] = 2.0 * w[1] / (w2 + 1.0);
            o[2] = (w2 - 1.0) / (w2 + 1.0);
        }),
    };
    target.project_field(&raw)
}

/// Parses the textual form used in configuration files, e.g.
/// `circle(2)` or `bubble(0.25,(3.14,3.14,3.14,3.14))`.
pub fn parse_init(text: &str) -> std::result::Result<InitSpec, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (name, args) = match s.find('(') {
        Some(p) if s.ends_with(')') => (&s[..p], &s[p + 1..s.len() - 1]),
        Some(_) => return Err(format!("unbalanced parentheses in '{text}'")),
        None => (s.as_str(), ""),
    };
    let nums = |a: &str| -> std::result::Result<Vec<f64>, String> {
        a.split(',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.trim_matches(|c| c == '(' || c == ')')
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{t}'"))
            })
            .collect()
    };
    let as_cap = |v: f64| -> std::result::Result<usize, String> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(format!("mode cap must be a non-negative integer, got {v}"))
        }
    };
    let v = nums(args)?;
    match (name, v.len()) {
        ("constant", 0) => Ok(InitSpec::Constant),
        ("circle", 1) => {
            let k = v[0];
            if k >= 1.0 && k.fract() == 0.0 {
                Ok(InitSpec::Circle(k as u32))
            } else {
                Err(format!("circle wavenumber must be a positive integer, got {k}"))
            }
        }
        ("perturbed_constant", 2) => Ok(InitSpec::PerturbedConstant {
            eps: v[0],
            mode_cap: as_cap(v[1])?,
        }),
        ("random_bandlimited", 2) => Ok(InitSpec::RandomBandlimited {
            mode_cap: as_cap(v[0])?,
            amplitude: v[1],
        }),
        ("bubble", 1) => Ok(InitSpec::Bubble {
            lambda: v[0],
            center: [PI; 4],
        }),
        ("bubble", 5) => Ok(InitSpec::Bubble {
            lambda: v[0],
            center: [v[1], v[2], v[3], v[4]],
        }),
        _ => Err(format!("unknown initial data '{text}'")),
    }
}
