//! Open-loop pull-down of a hot-soaked cabin at full blower and the coldest
//! evaporator setpoint, at rest and at 20 m/s.
//!
//! cargo run --example cabin_cooldown

use hev_seqopt::thermal::{
    ac_efficiency, ac_electrical_power, thermal_step, AcCommand, Ambient, ThermalPlantParams, ThermalState, T_SP_MIN,
    W_BL_MAX,
};

fn main() {
    let plant = ThermalPlantParams::default();
    let amb = Ambient {
        t_amb: 35.0,
        solar_load: 900.0,
    };
    let cmd = AcCommand {
        w_bl: W_BL_MAX,
        t_evap_sp: T_SP_MIN,
    };
    for v in [0.0, 20.0] {
        let mut s = ThermalState {
            t_cab: 40.0,
            t_int: 40.0,
            t_shell: 38.0,
            t_evap: 10.0,
        };
        let mut energy = 0.0;
        let mut reached = None;
        for k in 1..=300 {
            energy += ac_electrical_power(cmd.w_bl, &amb, s.t_evap, v, &plant);
            s = thermal_step(&s, &cmd, &amb, &plant, 1.0);
            if reached.is_none() && s.t_cab <= 26.5 {
                reached = Some(k);
            }
        }
        println!(
            "v = {v:>4.1} m/s (η_AC {:.2}): 26.5 °C after {:?} s, T_cab(300 s) = {:.2} °C, {:.1} kJ",
            ac_efficiency(v),
            reached,
            s.t_cab,
            energy / 1e3
        );
    }
}
