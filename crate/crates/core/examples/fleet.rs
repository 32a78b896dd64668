//! Stage I alone across the bundled ten-scenario battery.
//!
//! cargo run --release --example fleet [scenario_dir]

use std::path::PathBuf;

use hev_seqopt::pipeline::{load_scenario_dir, run_fleet};

fn main() -> hev_seqopt::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/fleet")));
    let summary = run_fleet(&load_scenario_dir(&dir)?)?;
    for e in &summary.entries {
        match (e.saving_percent, &e.error) {
            (Some(s), _) => println!("{:<12} {:>7.2} %", e.scenario, s),
            (None, Some(err)) => println!("{:<12} failed: {err}", e.scenario),
            _ => unreachable!(),
        }
    }
    if let (Some(mean), Some(min), Some(max)) = (summary.mean_saving, summary.min_saving, summary.max_saving) {
        println!("mean {mean:.2} %  min {min:.2} %  max {max:.2} %  ({} ok, {} failed)", summary.succeeded, summary.failed);
    }
    Ok(())
}
