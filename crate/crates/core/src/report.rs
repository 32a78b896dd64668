//! Stage report export: pretty JSON or long-format CSV.

use std::io::{Read, Write};

use crate::error::Result;
use crate::pipeline::StageReport;

/// Metric names of the CSV export, in row order per configuration.
pub const METRICS: [&str; 9] = [
    "equivalent_energy_j",
    "fuel_g",
    "delta_soc_pct",
    "saving_pct",
    "traction_energy_j",
    "ac_energy_j",
    "trip_time_s",
    "mean_t_cab_c",
    "bound_violation_s",
];

pub fn write_json<W: Write>(report: &StageReport, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report)?;
    writeln!(writer).map_err(serde_json::Error::io)?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<StageReport> {
    Ok(serde_json::from_reader(reader)?)
}

/// Rows `configuration,metric,value`.
pub fn write_csv<W: Write>(report: &StageReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["configuration", "metric", "value"])?;
    for c in &report.configurations {
        let values = [
            c.energy.equivalent_energy,
            c.energy.fuel_grams,
            c.energy.delta_soc,
            c.saving_percent,
            c.energy.breakdown.traction_energy,
            c.energy.breakdown.ac_energy,
            c.trip_time,
            c.comfort.mean_t_cab.unwrap_or(f64::NAN),
            c.comfort.bound_violation_seconds,
        ];
        for (m, v) in METRICS.iter().zip(values) {
            w.write_record([c.name.as_str(), m, &v.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
