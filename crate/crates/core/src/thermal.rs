//! Cabin thermal plant: a four-node lumped network (cabin air, interior mass,
//! body shell, evaporator) with surrogate compressor and blower power and the
//! speed-dependent A/C efficiency factor.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const W_BL_MIN: f64 = 0.05;
pub const W_BL_MAX: f64 = 0.15;
pub const T_SP_MIN: f64 = 3.0;
pub const T_SP_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_cab: f64,
    pub t_int: f64,
    pub t_shell: f64,
    pub t_evap: f64,
}

impl ThermalState {
    pub fn uniform(t: f64) -> Self {
        Self {
            t_cab: t,
            t_int: t,
            t_shell: t,
            t_evap: t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t_cab, self.t_int, self.t_shell, self.t_evap];
        if all.iter().any(|t| !t.is_finite()) || self.t_evap < -10.0 {
            return Err(Error::invalid("thermal state must be finite with T_evap >= -10 C"));
        }
        Ok(())
    }
}

/// Blower mass flow (kg/s) and evaporator setpoint (°C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcCommand {
    pub w_bl: f64,
    pub t_evap_sp: f64,
}

impl AcCommand {
    pub fn within_bounds(&self) -> bool {
        (W_BL_MIN..=W_BL_MAX).contains(&self.w_bl) && (T_SP_MIN..=T_SP_MAX).contains(&self.t_evap_sp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ambient {
    pub t_amb: f64,
    pub solar_load: f64,
}

/// Piecewise-linear ambient conditions over time, held constant past the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientProfile {
    pub time: Vec<f64>,
    pub conditions: Vec<Ambient>,
}

impl AmbientProfile {
    pub fn constant(amb: Ambient) -> Self {
        Self {
            time: vec![0.0],
            conditions: vec![amb],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time.is_empty() || self.time.len() != self.conditions.len() {
            return Err(Error::invalid("ambient profile needs matching, non-empty columns"));
        }
        if self.time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("ambient profile times must be strictly increasing"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Ambient {
        let i = self.time.partition_point(|&x| x <= t);
        if i == 0 {
            return self.conditions[0];
        }
        if i == self.time.len() {
            return self.conditions[i - 1];
        }
        let (t0, t1) = (self.time[i - 1], self.time[i]);
        let (a, b) = (self.conditions[i - 1], self.conditions[i]);
        let f = (t - t0) / (t1 - t0);
        Ambient {
            t_amb: a.t_amb + f * (b.t_amb - a.t_amb),
            solar_load: a.solar_load + f * (b.solar_load - a.solar_load),
        }
    }

    /// CSV with columns `time,T_amb,solar_load`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time: f64,
            #[serde(rename = "T_amb")]
            t_amb: f64,
            solar_load: f64,
        }
        let mut r = csv::Reader::from_reader(reader);
        let mut p = AmbientProfile {
            time: Vec::new(),
            conditions: Vec::new(),
        };
        for row in r.deserialize::<Row>() {
            let row = row?;
            p.time.push(row.time);
            p.conditions.push(Ambient {
                t_amb: row.t_amb,
                solar_load: row.solar_load,
            });
        }
        p.validate()?;
        Ok(p)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "T_amb", "solar_load"])?;
        for (t, a) in self.time.iter().zip(&self.conditions) {
            w.write_record(&[t.to_string(), a.t_amb.to_string(), a.solar_load.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalPlantParams {
    /// Heat capacities, J/K.
    pub c_cab: f64,
    pub c_int: f64,
    pub c_shell: f64,
    /// Conductances, W/K.
    pub g_cab_int: f64,
    pub g_cab_shell: f64,
    pub g_shell_amb: f64,
    /// Evaporator time constant, s.
    pub tau_evap: f64,
    /// Air specific heat, J/(kg K).
    pub c_p: f64,
    /// Compressor surrogate `c1·W·ΔT·(1 + c2·ΔT)`.
    pub comp_c1: f64,
    pub comp_c2: f64,
    /// Blower surrogate `b0 + b1·W³`.
    pub blower_b0: f64,
    pub blower_b1: f64,
}

impl Default for ThermalPlantParams {
    fn default() -> Self {
        Self {
            c_cab: 10_000.0,
            c_int: 80_000.0,
            c_shell: 50_000.0,
            g_cab_int: 100.0,
            g_cab_shell: 160.0,
            g_shell_amb: 150.0,
            tau_evap: 30.0,
            c_p: 1005.0,
            comp_c1: 120.0,
            comp_c2: 0.01,
            blower_b0: 20.0,
            blower_b1: 8.0e4,
        }
    }
}

impl ThermalPlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.c_cab,
            self.c_int,
            self.c_shell,
            self.g_cab_int,
            self.g_cab_shell,
            self.g_shell_amb,
            self.tau_evap,
            self.c_p,
            self.comp_c1,
            self.blower_b1,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) || self.comp_c2 < 0.0 || self.blower_b0 < 0.0 {
            return Err(Error::invalid("thermal plant parameters must be positive"));
        }
        Ok(())
    }

    /// Total sensible heat stored in the cabin, interior and shell nodes, J.
    pub fn stored_energy(&self, s: &ThermalState) -> f64 {
        self.c_cab * s.t_cab + self.c_int * s.t_int + self.c_shell * s.t_shell
    }
}

/// Explicit-Euler step of the lumped network.
pub fn thermal_step(
    s: &ThermalState,
    cmd: &AcCommand,
    amb: &Ambient,
    params: &ThermalPlantParams,
    dt: f64,
) -> ThermalState {
    let p = params;
    let vent = cmd.w_bl * p.c_p * (s.t_evap - s.t_cab);
    let q_cab_int = p.g_cab_int * (s.t_int - s.t_cab);
    let q_cab_shell = p.g_cab_shell * (s.t_shell - s.t_cab);
    let q_shell_amb = p.g_shell_amb * (amb.t_amb - s.t_shell);
    ThermalState {
        t_cab: s.t_cab + dt / p.c_cab * (vent + q_cab_int + q_cab_shell),
        t_int: s.t_int + dt / p.c_int * (amb.solar_load - q_cab_int),
        t_shell: s.t_shell + dt / p.c_shell * (q_shell_amb - q_cab_shell),
        t_evap: s.t_evap + dt / p.tau_evap * (cmd.t_evap_sp - s.t_evap),
    }
}

/// Compressor power, W. Zero without a temperature lift.
pub fn compressor_power(w_bl: f64, t_amb: f64, t_evap: f64, params: &ThermalPlantParams) -> f64 {
    let lift = t_amb - t_evap;
    if lift <= 0.0 {
        return 0.0;
    }
    params.comp_c1 * w_bl * lift * (1.0 + params.comp_c2 * lift)
}

pub fn blower_power(w_bl: f64, params: &ThermalPlantParams) -> f64 {
    params.blower_b0 + params.blower_b1 * w_bl.powi(3)
}

/// Compressor efficiency gain with vehicle speed: 1.0 at rest, 1.3 from 25 m/s.
pub fn ac_efficiency(v: f64) -> f64 {
    1.0 + 0.3 * (v.clamp(0.0, 25.0) / 25.0)
}

/// Electrical A/C draw `P_comp/η_AC + P_bl`, W.
pub fn ac_electrical_power(w_bl: f64, amb: &Ambient, t_evap: f64, v: f64, params: &ThermalPlantParams) -> f64 {
    compressor_power(w_bl, amb.t_amb, t_evap, params) / ac_efficiency(v) + blower_power(w_bl, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hot() -> Ambient {
        Ambient {
            t_amb: 35.0,
            solar_load: 900.0,
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = ThermalPlantParams::default();
        let s = ThermalState::uniform(30.0);
        let cmd = AcCommand {
            w_bl: W_BL_MIN,
            t_evap_sp: 30.0,
        };
        let amb = Ambient {
            t_amb: 30.0,
            solar_load: 0.0,
        };
        assert_eq!(thermal_step(&s, &cmd, &amb, &p, 1.0), s);
    }

    #[test]
    fn evaporator_first_order_step() {
        let p = ThermalPlantParams::default();
        let s = ThermalState {
            t_evap: 10.0,
            ..ThermalState::uniform(30.0)
        };
        let cmd = AcCommand {
            w_bl: 0.1,
            t_evap_sp: 4.0,
        };
        let next = thermal_step(&s, &cmd, &hot(), &p, 1.0);
        assert!((next.t_evap - 9.8).abs() < 1e-12);
    }

    #[test]
    fn vent_cools_hot_cabin() {
        let p = ThermalPlantParams::default();
        let s = ThermalState {
            t_cab: 40.0,
            t_int: 40.0,
            t_shell: 40.0,
            t_evap: 5.0,
        };
        let cmd = AcCommand {
            w_bl: W_BL_MAX,
            t_evap_sp: 3.0,
        };
        assert!(thermal_step(&s, &cmd, &hot(), &p, 1.0).t_cab < 40.0);
    }

    #[test]
    fn surrogate_power_examples() {
        let p = ThermalPlantParams::default();
        assert_eq!(compressor_power(0.1, 20.0, 20.0, &p), 0.0);
        assert!((compressor_power(0.1, 35.0, 5.0, &p) - 468.0).abs() < 1e-9);
        assert_eq!(compressor_power(0.2, 35.0, 5.0, &p), 2.0 * compressor_power(0.1, 35.0, 5.0, &p));
        assert!((blower_power(0.05, &p) - 30.0).abs() < 1e-9);
        assert!((blower_power(0.15, &p) - 290.0).abs() < 1e-9);
    }

    #[test]
    fn efficiency_anchors() {
        assert_eq!(ac_efficiency(0.0), 1.0);
        assert_eq!(ac_efficiency(25.0), 1.3);
        assert!((ac_efficiency(12.5) - 1.15).abs() < 1e-12);
        assert_eq!(ac_efficiency(40.0), 1.3);
    }

    #[test]
    fn max_cooling_pulls_cabin_down_in_about_80_s() {
        let p = ThermalPlantParams::default();
        let mut s = ThermalState {
            t_cab: 40.0,
            t_int: 40.0,
            t_shell: 38.0,
            t_evap: 10.0,
        };
        let cmd = AcCommand {
            w_bl: W_BL_MAX,
            t_evap_sp: T_SP_MIN,
        };
        let mut reached = None;
        for k in 1..=300 {
            s = thermal_step(&s, &cmd, &hot(), &p, 1.0);
            if s.t_cab <= 26.5 && reached.is_none() {
                reached = Some(k);
            }
        }
        let k = reached.expect("cabin reaches 26.5 C");
        assert!((50..=120).contains(&k), "cool-down took {k} s");
    }

    #[test]
    fn ambient_profile_interpolates_and_holds() {
        let prof = AmbientProfile {
            time: vec![0.0, 100.0],
            conditions: vec![
                Ambient {
                    t_amb: 30.0,
                    solar_load: 0.0,
                },
                Ambient {
                    t_amb: 40.0,
                    solar_load: 1000.0,
                },
            ],
        };
        assert_eq!(prof.at(-5.0).t_amb, 30.0);
        assert_eq!(prof.at(50.0).t_amb, 35.0);
        assert_eq!(prof.at(500.0).solar_load, 1000.0);
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        assert_eq!(AmbientProfile::read_csv(buf.as_slice()).unwrap(), prof);
    }
}
