use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bichf::cli::{self, exit_code, Mode};
use bichf::flow::ConformalRoute;

#[derive(Parser)]
#[command(name = "bichf", version, about = "Bi-conformal heat flow on the flat 4-torus")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration to t_end.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Run a configuration in memory and print PASS/FAIL per property.
    Verify { config: PathBuf },
    /// Continue from a snapshot.
    Resume {
        snapshot: PathBuf,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match execute(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cmd: Command) -> bichf::Result<i32> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            t_end,
            mode,
        } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = t_end {
                cfg.params.t_end = t;
            }
            if let Some(m) = mode {
                cfg.mode = m.parse::<Mode>().map_err(bichf::Error::ConfigInvalid)?;
                if cfg.mode != Mode::Biharmonic && cfg.params.route == ConformalRoute::Frozen {
                    cfg.params.route = ConformalRoute::Quadrature;
                }
            }
            if cfg.out_dir.is_none() {
                cfg.out_dir = Some(PathBuf::from("bichf-out"));
            }
            cfg.validate()?;
            report(cli::run(&cfg)?)
        }
        Command::Verify { config } => {
            let cfg = cli::load_config(&config)?;
            let report = cli::verify(&cfg)?;
            for c in &report.checks {
                println!("{c}");
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Resume {
            snapshot,
            config,
            out,
        } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if cfg.out_dir.is_none() {
                cfg.out_dir = Some(PathBuf::from("bichf-out"));
            }
            report(cli::resume(&snapshot, &cfg)?)
        }
    }
}

fn report(out: cli::RunOutcome) -> bichf::Result<i32> {
    let dir = out.config.out_dir.as_ref().map(|d| d.display().to_string()).unwrap_or_default();
    match &out.abort {
        None => println!(
            "completed t = {:.6e} in {} steps, {} records, output in {dir}",
            out.final_state.t,
            out.final_state.step_count,
            out.history.len()
        ),
        Some(e) => eprintln!("aborted at t = {:.6e}: {e}; snapshot in {dir}/snapshots", out.final_state.t),
    }
    Ok(out.exit_code())
}
