//! Eco-cooling against a constant setpoint on a synthetic stop-and-go trace.
//!
//! cargo run --release --example eco_cooling

use hev_seqopt::ac_mpc::{run_ac_on_speeds, AcMode, PilotingConfig, SchedulingConfig};
use hev_seqopt::thermal::{Ambient, AmbientProfile, ThermalPlantParams, ThermalState};

fn main() -> hev_seqopt::Result<()> {
    // 60 s stopped, 120 s at 18 m/s, repeated.
    let speeds: Vec<f64> = (0..600).map(|t| if t % 180 < 60 { 0.0 } else { 18.0 }).collect();
    let amb = AmbientProfile::constant(Ambient {
        t_amb: 35.0,
        solar_load: 900.0,
    });
    let init = ThermalState {
        t_cab: 40.0,
        t_int: 40.0,
        t_shell: 38.0,
        t_evap: 10.0,
    };
    let plant = ThermalPlantParams::default();
    let sched = SchedulingConfig::default();
    let pilot = PilotingConfig::default();

    let mut base = None;
    for mode in [AcMode::ConstantSetpoint, AcMode::EcoCool] {
        let run = run_ac_on_speeds(&speeds, &init, &amb, &plant, &sched, &pilot, mode)?;
        let e = run.energy();
        let mean = run.mean_cabin_after(80.0).unwrap_or(f64::NAN);
        print!("{mode:?}: {:.1} kJ, mean T_cab after 80 s {:.2} °C", e / 1e3, mean);
        match base {
            None => {
                println!();
                base = Some(e);
            }
            Some(b) => println!(", {:.1} % less A/C energy", (b - e) / b * 100.0),
        }
    }
    Ok(())
}
