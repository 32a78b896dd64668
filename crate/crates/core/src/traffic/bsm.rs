use std::io::{Read, Write};

use super::BsmRecord;
use crate::error::Result;

#[derive(serde::Serialize, serde::Deserialize)]
struct Row {
    time: f64,
    vehicle_id: u32,
    position: f64,
    speed: f64,
}

/// Write BSM records as CSV with columns `time,vehicle_id,position,speed`.
pub fn write_bsm_csv<W: Write>(writer: W, records: &[BsmRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(Row {
            time: r.time,
            vehicle_id: r.vehicle_id,
            position: r.position,
            speed: r.speed,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_bsm_csv<R: Read>(reader: R) -> Result<Vec<BsmRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row?;
        out.push(BsmRecord {
            vehicle_id: row.vehicle_id,
            time: row.time,
            position: row.position,
            speed: row.speed,
        });
    }
    Ok(out)
}
