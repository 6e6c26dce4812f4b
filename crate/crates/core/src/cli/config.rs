//! `key = value` run configuration with optional `[section]` headers.
//!
//! ```text
//! mode = bichf            # bichf | biharmonic | picard
//! init = circle(1)
//! seed = 7
//!
//! [grid]
//! n = 8
//! L = 3
//!
//! [flow]
//! a = 1
//! b = 1
//! dt = auto               # or a number
//! t_end = 0.1
//! scheme = explicit-rk4   # explicit-rk4 | stabilized-imex | picard
//! cfl_safety = 0.5
//! route = quadrature      # quadrature | ode
//!
//! [picard]
//! max_iter = 30
//! tol = 1e-5
//! inner_steps = 16
//! norm_weight = 1
//! retry_cap = 6
//! max_window = 1e-2
//! source = explicit       # explicit | projected
//!
//! [diag]
//! radii = pi/8, pi/4, pi/2
//! stride = 2
//! epsilon1 = 0.1
//! ```
//!
//! Keys of `run`, `grid`, `flow` and `diag` may also appear before any
//! section header. `#` starts a comment.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use crate::diagnostics::ConcentrationConfig;
use crate::error::{Error, Result};
use crate::fixedpoint::NormalSource;
use crate::flow::{ConformalRoute, FlowParams, Scheme};
use crate::init::{parse_init, InitSpec};
use crate::lattice::Grid4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The coupled flow.
    Bichf,
    /// `u ≡ 0`: plain biharmonic map flow for comparison.
    Biharmonic,
    /// The coupled flow stepped by windowed Picard iteration.
    Picard,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bichf" => Ok(Mode::Bichf),
            "biharmonic" => Ok(Mode::Biharmonic),
            "picard" => Ok(Mode::Picard),
            _ => Err(format!("unknown mode '{s}'")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Bichf => "bichf",
            Mode::Biharmonic => "biharmonic",
            Mode::Picard => "picard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// `stability_dt` of the current state, every step.
    Auto,
}

impl std::fmt::Display for DtPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DtPolicy::Fixed(dt) => write!(f, "{dt}"),
            DtPolicy::Auto => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub l: usize,
    pub params: FlowParams,
    pub dt: DtPolicy,
    pub mode: Mode,
    pub init: InitSpec,
    pub record_every: u64,
    /// Zero disables periodic snapshots; the final state is always saved.
    pub snapshot_every: u64,
    /// `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub diag: ConcentrationConfig,
    pub extended_diag: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 8,
            l: 3,
            params: FlowParams {
                t_end: 0.1,
                ..FlowParams::default()
            },
            dt: DtPolicy::Auto,
            mode: Mode::Bichf,
            init: InitSpec::Circle(1),
            record_every: 1,
            snapshot_every: 0,
            out_dir: None,
            seed: 0,
            diag: ConcentrationConfig::default(),
            extended_diag: false,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid4> {
        Grid4::new(self.n, self.l)
    }

    /// Flow parameters with the mode applied: biharmonic freezes `u`,
    /// picard selects the fixed-point stepper.
    pub fn effective_params(&self) -> FlowParams {
        let mut p = self.params.clone();
        match self.mode {
            Mode::Biharmonic => p.route = ConformalRoute::Frozen,
            Mode::Picard => p.scheme = Scheme::Picard,
            Mode::Bichf => {}
        }
        if let DtPolicy::Fixed(dt) = self.dt {
            p.dt = dt;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |e: Error| match e {
            Error::InvalidParam(m) => Error::ConfigInvalid(m),
            other => Error::ConfigInvalid(other.to_string()),
        };
        let grid = self.grid().map_err(invalid)?;
        let mut p = self.effective_params();
        if self.dt == DtPolicy::Auto {
            p.dt = p.picard.max_window.min(p.t_end);
        }
        p.validate().map_err(invalid)?;
        if p.scheme == Scheme::Picard && p.dt > p.picard.max_window {
            return Err(Error::ConfigInvalid(format!(
                "dt {} exceeds picard max_window {}",
                p.dt, p.picard.max_window
            )));
        }
        self.init.validate(&grid).map_err(invalid)?;
        self.diag.validate().map_err(invalid)?;
        if self.record_every == 0 {
            return Err(Error::ConfigInvalid("record_every must be positive".into()));
        }
        Ok(())
    }

    /// The configuration in the textual form accepted by [`parse_config`].
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let radii: Vec<String> = self.diag.radii.iter().map(|r| format!("{r:e}")).collect();
        let mut s = format!(
            "mode = {}\ninit = {}\nseed = {}\nrecord_every = {}\nsnapshot_every = {}\nextended_diag = {}\n",
            self.mode, self.init, self.seed, self.record_every, self.snapshot_every, self.extended_diag
        );
        if let Some(d) = &self.out_dir {
            s.push_str(&format!("out_dir = {}\n", d.display()));
        }
        s.push_str(&format!("\n[grid]\nn = {}\nL = {}\n", self.n, self.l));
        s.push_str(&format!(
            "\n[flow]\na = {:e}\nb = {:e}\ndt = {}\nt_end = {:e}\nscheme = {}\ncfl_safety = {:e}\nroute = {}\n",
            p.a,
            p.b,
            self.dt,
            p.t_end,
            p.scheme,
            p.cfl_safety,
            match p.route {
                ConformalRoute::Quadrature => "quadrature",
                ConformalRoute::Ode => "ode",
                ConformalRoute::Frozen => "frozen",
            }
        ));
        let q = &p.picard;
        s.push_str(&format!(
            "\n[picard]\nmax_iter = {}\ntol = {:e}\ninner_steps = {}\nnorm_weight = {:e}\nretry_cap = {}\nmax_window = {:e}\nsource = {}\n",
            q.max_iter, q.tol, q.inner_steps, q.norm_weight, q.retry_cap, q.max_window, q.source
        ));
        s.push_str(&format!("\n[diag]\nradii = {}\n", radii.join(", ")));
        if let Some(st) = self.diag.stride {
            s.push_str(&format!("stride = {st}\n"));
        }
        s.push_str(&format!("epsilon1 = {:e}\n", self.diag.epsilon1));
        s
    }
}

const SECTIONS: [(&str, &[&str]); 5] = [
    (
        "run",
        &["mode", "init", "seed", "out_dir", "record_every", "snapshot_every", "extended_diag"],
    ),
    ("grid", &["n", "L"]),
    ("flow", &["a", "b", "dt", "t_end", "scheme", "cfl_safety", "route"]),
    (
        "picard",
        &["max_iter", "tol", "inner_steps", "norm_weight", "retry_cap", "max_window", "source"],
    ),
    ("diag", &["radii", "stride", "epsilon1"]),
];

fn section_keys(name: &str) -> Option<&'static [&'static str]> {
    SECTIONS.iter().find(|(s, _)| *s == name).map(|(_, k)| *k)
}

/// Section of a key written before any header.
fn top_level_section(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .filter(|(s, _)| *s != "picard")
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

/// Reals with an optional `pi` factor: `0.5`, `pi`, `pi/8`, `2*pi`, `3pi/4`.
pub fn parse_real(text: &str) -> std::result::Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("bad number '{text}'");
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let coef = s[..pos].trim_end_matches('*');
    let coef = if coef.is_empty() {
        1.0
    } else {
        coef.parse::<f64>().map_err(|_| bad())?
    };
    let rest = &s[pos + 2..];
    let div = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / div)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<&'static str> = None;
    let mut seen: HashSet<(&'static str, String)> = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::ConfigParse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            let (s, _) = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| err(format!("unknown section [{name}]")))?;
            section = Some(s);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = match section {
            Some(s) => {
                if !section_keys(s).is_some_and(|k| k.contains(&key)) {
                    return Err(err(format!("unknown key '{key}' in [{s}]")));
                }
                s
            }
            None => top_level_section(key).ok_or_else(|| err(format!("unknown key '{key}'")))?,
        };
        if !seen.insert((sec, key.to_string())) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        apply(&mut cfg, sec, key, value).map_err(err)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn apply(cfg: &mut RunConfig, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
        v.parse::<T>().map_err(|_| format!("bad value '{v}'"))
    }
    let p = &mut cfg.params;
    match (section, key) {
        ("run", "mode") => cfg.mode = v.parse()?,
        ("run", "init") => cfg.init = parse_init(v)?,
        ("run", "seed") => cfg.seed = num(v)?,
        ("run", "out_dir") => cfg.out_dir = Some(PathBuf::from(v)),
        ("run", "record_every") => cfg.record_every = num(v)?,
        ("run", "snapshot_every") => cfg.snapshot_every = num(v)?,
        ("run", "extended_diag") => cfg.extended_diag = num(v)?,
        ("grid", "n") => cfg.n = num(v)?,
        ("grid", "L") => cfg.l = num(v)?,
        ("flow", "a") => p.a = parse_real(v)?,
        ("flow", "b") => p.b = parse_real(v)?,
        ("flow", "dt") => {
            cfg.dt = if v == "auto" {
                DtPolicy::Auto
            } else {
                DtPolicy::Fixed(parse_real(v)?)
            }
        }
        ("flow", "t_end") => p.t_end = parse_real(v)?,
        ("flow", "scheme") => p.scheme = v.parse()?,
        ("flow", "cfl_safety") => p.cfl_safety = parse_real(v)?,
        ("flow", "route") => {
            p.route = match v {
                "quadrature" => ConformalRoute::Quadrature,
                "ode" => ConformalRoute::Ode,
                "frozen" => ConformalRoute::Frozen,
                _ => return Err(format!("unknown route '{v}'")),
            }
        }
        ("picard", "max_iter") => p.picard.max_iter = num(v)?,
        ("picard", "tol") => p.picard.tol = parse_real(v)?,
        ("picard", "inner_steps") => p.picard.inner_steps = num(v)?,
        ("picard", "norm_weight") => p.picard.norm_weight = parse_real(v)?,
        ("picard", "retry_cap") => p.picard.retry_cap = num(v)?,
        ("picard", "max_window") => p.picard.max_window = parse_real(v)?,
        ("picard", "source") => p.picard.source = v.parse::<NormalSource>()?,
        ("diag", "radii") => {
            cfg.diag.radii = v
                .split(',')
                .map(parse_real)
                .collect::<std::result::Result<_, _>>()?
        }
        ("diag", "stride") => cfg.diag.stride = Some(num(v)?),
        ("diag", "epsilon1") => cfg.diag.epsilon1 = parse_real(v)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}
