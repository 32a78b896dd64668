//! Baseline and the three cumulative stages on the bundled urban scenario.
//!
//! cargo run --release --example pipeline [scenario.json]

use std::path::PathBuf;

use hev_seqopt::pipeline::{run_pipeline, Scenario};

fn main() -> hev_seqopt::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/urban_600s.json")));
    let scenario = Scenario::load(&path)?;
    let report = run_pipeline(&scenario)?;
    println!(
        "{:<9} {:>12} {:>8} {:>8} {:>8} {:>10} {:>10} {:>7} {:>7} {:>6}",
        "config", "E_eq [kJ]", "fuel g", "dSOC %", "save %", "trac kJ", "A/C kJ", "trip s", "T_cab", "viol"
    );
    for c in &report.configurations {
        println!(
            "{:<9} {:>12.1} {:>8.2} {:>8.3} {:>8.2} {:>10.1} {:>10.1} {:>7.1} {:>7.2} {:>6.0}",
            c.name,
            c.energy.equivalent_energy / 1e3,
            c.energy.fuel_grams,
            c.energy.delta_soc,
            c.saving_percent,
            c.energy.breakdown.traction_energy / 1e3,
            c.energy.breakdown.ac_energy / 1e3,
            c.trip_time,
            c.comfort.mean_t_cab.unwrap_or(f64::NAN),
            c.comfort.bound_violation_seconds,
        );
        eprintln!(
            "  runtime: speed {:?} ac {:?} split {:?}",
            c.runtime.speed, c.runtime.ac, c.runtime.split
        );
    }
    Ok(())
}
