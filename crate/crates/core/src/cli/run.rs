use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::config::{DtPolicy, RunConfig};
use crate::diagnostics::{observe, DiagRecord};
use crate::error::{Error, Result};
use crate::fixedpoint;
use crate::flow::{advance, stability_dt, ConformalRoute, ConformalState, FlowParams, FlowState, Scheme};
use crate::init::generate_initial;
use crate::lattice::snapshot::Snapshot;
use crate::lattice::{Grid4, MapField, ScalarField};
use crate::target::SphereTarget;

/// Per-step bookkeeping kept alongside the records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: f64,
    pub dt: f64,
    pub drift: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub history: Vec<DiagRecord>,
    pub final_state: FlowState,
    pub steps: Vec<StepInfo>,
    /// Distance sequences of every Picard window.
    pub picard_distances: Vec<Vec<f64>>,
    /// Largest `||f| - 1|` after reprojection over all steps.
    pub max_sphere_defect: f64,
    /// Grid points, over all steps, where `e^{-4u} > e^{4at}`.
    pub bound_violations: u64,
    /// Largest `max e^{-4u} · n⁴` seen (effective explicit stiffness).
    pub max_stiffness: f64,
    pub wall_time: Duration,
    /// Set when the run stopped early.
    pub abort: Option<Error>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.abort.as_ref().map_or(0, exit_code)
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParse { .. } | Error::ConfigInvalid(_) | Error::InvalidParam(_) => 2,
        Error::NonContractionCap { .. } => 4,
        Error::Io(_) | Error::Snapshot(_) => 1,
        _ => 3,
    }
}

/// Snapshot layout: the `L` components of `f`, the accumulator `I`, then `u`.
pub fn state_snapshot(grid: &Grid4, state: &FlowState) -> Snapshot {
    let mut components = state.f.components.clone();
    components.push(state.conformal.accumulator_value().values);
    components.push(state.conformal.u.values.clone());
    Snapshot {
        n: grid.n(),
        l: grid.ambient_dim(),
        t: state.t,
        components,
    }
}

/// Rebuilds a state from a snapshot; `u` is recomputed from the accumulator.
pub fn state_from_snapshot(
    grid: &Grid4,
    snap: &Snapshot,
    params: &FlowParams,
    step_count: u64,
) -> Result<FlowState> {
    let l = grid.ambient_dim();
    if snap.n != grid.n() || snap.l != l || snap.components.len() != l + 2 {
        return Err(Error::Snapshot(format!(
            "snapshot has n={} L={} with {} components, config expects n={} L={} with {}",
            snap.n,
            snap.l,
            snap.components.len(),
            grid.n(),
            l,
            l + 2
        )));
    }
    let f = MapField {
        components: snap.components[..l].to_vec(),
    };
    let acc = ScalarField {
        values: snap.components[l].clone(),
    };
    let conformal = if params.route == ConformalRoute::Frozen {
        let mut c = ConformalState::new(grid);
        c.t = snap.t;
        c
    } else {
        ConformalState::from_accumulator(acc, snap.t, params)
    };
    Ok(FlowState::from_parts(f, conformal, step_count))
}

struct Sink {
    dir: PathBuf,
    diag: BufWriter<File>,
    ext: Option<BufWriter<File>>,
    picard: Option<BufWriter<File>>,
}

impl Sink {
    fn open(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir.join("snapshots"))?;
        let mut diag = BufWriter::new(File::create(dir.join("diag.csv"))?);
        writeln!(diag, "{}", DiagRecord::csv_header())?;
        let ext = if cfg.extended_diag {
            let mut w = BufWriter::new(File::create(dir.join("diag_ext.csv"))?);
            writeln!(w, "{}", DiagRecord::ext_csv_header())?;
            Some(w)
        } else {
            None
        };
        let picard = if cfg.effective_params().scheme == Scheme::Picard {
            let mut w = BufWriter::new(File::create(dir.join("picard.csv"))?);
            writeln!(w, "step,window,iteration,distance")?;
            Some(w)
        } else {
            None
        };
        std::fs::write(dir.join("config.txt"), cfg.to_text())?;
        Ok(Self {
            dir: dir.to_path_buf(),
            diag,
            ext,
            picard,
        })
    }

    fn record(&mut self, r: &DiagRecord) -> Result<()> {
        writeln!(self.diag, "{}", r.csv_row())?;
        if let Some(w) = &mut self.ext {
            writeln!(w, "{}", r.ext_csv_row())?;
        }
        Ok(())
    }

    fn picard(&mut self, step: u64, windows: &[Vec<f64>]) -> Result<()> {
        if let Some(w) = &mut self.picard {
            for (k, d) in windows.iter().enumerate() {
                for (i, v) in d.iter().enumerate() {
                    writeln!(w, "{step},{k},{},{v:.16e}", i + 1)?;
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self, grid: &Grid4, state: &FlowState, name: &str) -> Result<()> {
        state_snapshot(grid, state).save(&self.dir.join("snapshots").join(name))
    }

    fn flush(&mut self) -> Result<()> {
        self.diag.flush()?;
        if let Some(w) = &mut self.ext {
            w.flush()?;
        }
        if let Some(w) = &mut self.picard {
            w.flush()?;
        }
        Ok(())
    }
}

/// Runs the configured mode from the configured initial data.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let target = SphereTarget::new(config.l)?;
    let f0 = generate_initial(&grid, &target, &config.init, config.seed)?;
    drive(config, &grid, &target, FlowState::new(&grid, f0))
}

/// Continues a run from a snapshot written by [`run`].
pub fn resume(snapshot: &Path, config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let target = SphereTarget::new(config.l)?;
    let snap = Snapshot::load(snapshot)?;
    let params = config.effective_params();
    let step_count = snapshot_step(snapshot).unwrap_or(match config.dt {
        DtPolicy::Fixed(dt) => (snap.t / dt).round() as u64,
        DtPolicy::Auto => 0,
    });
    let state = state_from_snapshot(&grid, &snap, &params, step_count)?;
    target.check_field(&state.f)?;
    drive(config, &grid, &target, state)
}

/// Step index encoded in a snapshot file name such as `step_000120.bin`.
fn snapshot_step(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.rsplit('_').next()?;
    digits.parse().ok()
}

fn drive(config: &RunConfig, grid: &Grid4, target: &SphereTarget, mut state: FlowState) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut params = config.effective_params();
    let mut sink = match &config.out_dir {
        Some(d) => Some(Sink::open(d, config)?),
        None => None,
    };
    let mut out = RunOutcome {
        config: config.clone(),
        history: Vec::new(),
        final_state: state.clone(),
        steps: Vec::new(),
        picard_distances: Vec::new(),
        max_sphere_defect: state.f.sphere_defect(),
        bound_violations: 0,
        max_stiffness: 0.0,
        wall_time: Duration::ZERO,
        abort: None,
    };

    let t_end = params.t_end;
    let mut recorded_last = false;
    if state.step_count % config.record_every == 0 {
        emit(grid, target, &state, config, &mut out, sink.as_mut())?;
        recorded_last = true;
    }
    let result: Result<()> = (|| {
        loop {
            let remaining = t_end - state.t;
            let base = match config.dt {
                DtPolicy::Fixed(dt) => dt,
                DtPolicy::Auto => {
                    let dt = stability_dt(grid, state.u(), &params);
                    if params.scheme == Scheme::Picard {
                        dt.min(params.picard.max_window)
                    } else {
                        dt
                    }
                }
            };
            if remaining <= 1e-9 * base {
                break;
            }
            params.dt = if remaining < base * (1.0 + 1e-9) { remaining } else { base };
            out.max_stiffness = out.max_stiffness.max(
                grid.bilaplacian_symbol_bound() * state.u().values.iter().map(|u| (-4.0 * u).exp()).fold(0.0, f64::max),
            );
            let next = if params.scheme == Scheme::Picard {
                let (s, hist) = fixedpoint::advance_with_history(grid, target, &state, &params)?;
                if let Some(k) = sink.as_mut() {
                    k.picard(s.step_count, &hist)?;
                }
                out.picard_distances.extend(hist);
                s
            } else {
                advance(grid, target, &state, &params)?
            };
            state = next;
            out.steps.push(StepInfo {
                t: state.t,
                dt: params.dt,
                drift: state.last_drift,
            });
            out.max_sphere_defect = out.max_sphere_defect.max(state.f.sphere_defect());
            let bound = (4.0 * params.a * state.t).exp();
            out.bound_violations += state
                .u()
                .values
                .iter()
                .filter(|u| (-4.0 * **u).exp() > bound)
                .count() as u64;
            recorded_last = false;
            if state.step_count % config.record_every == 0 {
                emit(grid, target, &state, config, &mut out, sink.as_mut())?;
                recorded_last = true;
            }
            if config.snapshot_every > 0 && state.step_count % config.snapshot_every == 0 {
                if let Some(k) = &sink {
                    k.snapshot(grid, &state, &format!("step_{:06}.bin", state.step_count))?;
                }
            }
        }
        if !recorded_last {
            emit(grid, target, &state, config, &mut out, sink.as_mut())?;
        }
        Ok(())
    })();

    out.final_state = state.clone();
    out.wall_time = start.elapsed();
    match result {
        Ok(()) => {}
        Err(e @ (Error::Io(_) | Error::Snapshot(_))) => return Err(e),
        Err(e) => out.abort = Some(e),
    }
    if let Some(k) = &mut sink {
        let name = if out.abort.is_some() {
            format!("abort_{:06}.bin", state.step_count)
        } else {
            format!("final_{:06}.bin", state.step_count)
        };
        k.snapshot(grid, &state, &name)?;
        k.flush()?;
        write_summary(&k.dir, &out)?;
    }
    Ok(out)
}

fn emit(
    grid: &Grid4,
    target: &SphereTarget,
    state: &FlowState,
    config: &RunConfig,
    out: &mut RunOutcome,
    sink: Option<&mut Sink>,
) -> Result<()> {
    let r = observe(grid, target, state, &config.diag)?;
    let values = [r.energy, r.dissipation, r.volume, r.u_min, r.u_max, r.concentration];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "diagnostics", t: state.t });
    }
    if let Some(s) = sink {
        s.record(&r)?;
    }
    out.history.push(r);
    Ok(())
}

fn write_summary(dir: &Path, out: &RunOutcome) -> Result<()> {
    let c = &out.config;
    let p = c.effective_params();
    let max_conc = out.history.iter().map(|r| r.concentration).fold(0.0, f64::max);
    let min_energy = out.history.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    let flagged = out.history.iter().filter(|r| r.flagged).count();
    let max_ratio = out
        .picard_distances
        .iter()
        .flat_map(|d| d.windows(2).skip(1).map(|w| w[1] / w[0]))
        .fold(0.0, f64::max);
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("status", match &out.abort {
        None => "completed".into(),
        Some(e) => format!("aborted: {e}"),
    });
    kv("exit_code", out.exit_code().to_string());
    kv("mode", c.mode.to_string());
    kv("scheme", p.scheme.to_string());
    kv("init", c.init.to_string());
    kv("seed", c.seed.to_string());
    kv("n", c.n.to_string());
    kv("L", c.l.to_string());
    kv("a", p.a.to_string());
    kv("b", p.b.to_string());
    kv("dt", c.dt.to_string());
    kv("t_end", p.t_end.to_string());
    kv("t_final", out.final_state.t.to_string());
    kv("steps", out.final_state.step_count.to_string());
    kv("records", out.history.len().to_string());
    kv("max_concentration", format!("{max_conc:.16e}"));
    kv("min_energy", format!("{min_energy:.16e}"));
    kv("flagged_records", flagged.to_string());
    kv("max_sphere_defect", format!("{:.3e}", out.max_sphere_defect));
    kv("bound_violations", out.bound_violations.to_string());
    kv("max_stiffness", format!("{:.16e}", out.max_stiffness));
    if !out.picard_distances.is_empty() {
        kv("picard_windows", out.picard_distances.len().to_string());
        kv("picard_max_contraction_ratio", format!("{max_ratio:.6e}"));
    }
    kv("wall_time_s", format!("{:.3}", out.wall_time.as_secs_f64()));
    std::fs::write(dir.join("summary.txt"), s)?;
    Ok(())
}
