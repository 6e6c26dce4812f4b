//! Run orchestration: configuration, the stepping driver with its output
//! files, restarts from snapshots and the headless property suite.
//!
//! A run directory holds `diag.csv`, `summary.txt`, `config.txt`,
//! `snapshots/*.bin` and, when enabled, `diag_ext.csv` and `picard.csv`.

mod config;
mod run;
mod verify;

pub use config::{load_config, parse_config, parse_real, DtPolicy, Mode, RunConfig};
pub use run::{exit_code, resume, run, state_from_snapshot, state_snapshot, RunOutcome, StepInfo};
pub use verify::{matrix_lemma_sweep, verify, Check, Status, VerifyReport, MATRIX_LEMMA_SAMPLES};
