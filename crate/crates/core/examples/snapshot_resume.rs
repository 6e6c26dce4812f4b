//! Stop a run at a snapshot and resume it; the resumed records agree with
//! the uninterrupted run.

use bichf::cli::{parse_config, resume, run};

fn main() -> bichf::Result<()> {
    let dir = std::env::temp_dir().join(format!("bichf-resume-{}", std::process::id()));
    let text = "init = random_bandlimited(2, 0.5)\nseed = 5\ndt = 2e-4\nsnapshot_every = 20";

    let mut full = parse_config(&format!("{text}\nt_end = 0.012"))?;
    full.out_dir = Some(dir.join("full"));
    let whole = run(&full)?;

    let mut head = parse_config(&format!("{text}\nt_end = 0.008"))?;
    head.out_dir = Some(dir.join("head"));
    run(&head)?;

    let snap = dir.join("head/snapshots/step_000040.bin");
    let mut tail = full.clone();
    tail.out_dir = Some(dir.join("tail"));
    let resumed = resume(&snap, &tail)?;

    let worst = resumed
        .history
        .iter()
        .filter_map(|r| {
            whole
                .history
                .iter()
                .find(|w| (w.t - r.t).abs() < 1e-12)
                .map(|w| ((w.energy - r.energy) / w.energy).abs())
        })
        .fold(0.0, f64::max);
    println!(
        "resumed from {} at t = {:.4e}; {} records compared, max relative energy gap {worst:.3e}",
        snap.display(),
        resumed.history[0].t,
        resumed.history.len()
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
