//! Longitudinal traction power, the switching SOC power-balance model, the
//! engine fuel map and equivalent-energy accounting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub c_r: f64,
    pub c_d: f64,
    pub a_f: f64,
    pub rho_air: f64,
    pub eta_trac: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            c_r: 0.009,
            c_d: 0.28,
            a_f: 2.2,
            rho_air: 1.2,
            eta_trac: 0.9,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.mass, self.c_r, self.c_d, self.a_f, self.rho_air, self.eta_trac];
        if positive.iter().any(|x| !(*x > 0.0)) || self.eta_trac > 1.0 {
            return Err(Error::invalid("vehicle parameters must be positive with 0 < eta_trac <= 1"));
        }
        Ok(())
    }
}

/// Power demanded at the driveline input, W. Propulsion divides the wheel
/// power by the driveline efficiency, regeneration multiplies it.
pub fn traction_power(v: f64, a: f64, p: &VehicleParams) -> f64 {
    let f_roll = p.c_r * p.mass * GRAVITY;
    let f_aero = 0.5 * p.rho_air * p.a_f * p.c_d * v * v;
    let wheel = v * (f_roll + f_aero + p.mass * a);
    if wheel >= 0.0 {
        wheel / p.eta_trac
    } else {
        wheel * p.eta_trac
    }
}

/// One-second battery SOC update with an A/C-on and an A/C-off branch.
/// SOC in percent, powers in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SocModel {
    pub xi: [f64; 9],
    pub soc_min: f64,
    pub soc_max: f64,
    pub dt: f64,
}

impl Default for SocModel {
    fn default() -> Self {
        Self {
            xi: [
                -4.74e-5, -4.11e-10, 6.17e-9, -3.8e-5, 8.63e-9, -0.03, -4.46e-5, -4.84e-10, -0.01,
            ],
            soc_min: 30.0,
            soc_max: 90.0,
            dt: 1.0,
        }
    }
}

impl SocModel {
    pub fn validate(&self) -> Result<()> {
        if self.dt != 1.0 {
            return Err(Error::invalid("the SOC model is identified for a 1 s step"));
        }
        if !(self.soc_min < self.soc_max) || self.xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("SOC model needs soc_min < soc_max and finite coefficients"));
        }
        Ok(())
    }

    /// Unclamped SOC after one step.
    pub fn next_raw(&self, soc: f64, p_mg: f64, p_ac: f64, ac_on: bool) -> f64 {
        let x = &self.xi;
        if ac_on {
            soc + x[0] * p_mg + x[1] * p_mg * p_mg + x[2] * p_mg * p_ac + x[3] * p_ac + x[4] * p_ac * p_ac + x[5]
        } else {
            soc + x[6] * p_mg + x[7] * p_mg * p_mg + x[8]
        }
    }

    pub fn contains(&self, soc: f64) -> bool {
        self.soc_min <= soc && soc <= self.soc_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocUpdate {
    pub soc: f64,
    /// The raw update left `[soc_min, soc_max]` and was clamped.
    pub saturated: bool,
}

pub fn soc_step(soc: f64, p_mg: f64, p_ac: f64, ac_on: bool, model: &SocModel) -> SocUpdate {
    let raw = model.next_raw(soc, p_mg, p_ac, ac_on);
    let clamped = raw.clamp(model.soc_min, model.soc_max);
    SocUpdate {
        soc: clamped,
        saturated: clamped != raw,
    }
}

/// Motor/generator power covering what the engine does not, W.
pub fn mg_power(p_trac: f64, p_eng: f64) -> f64 {
    p_trac - p_eng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    Off = 1,
    On = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub mode: EngineMode,
    /// rad/s
    pub omega_eng: f64,
    pub p_eng: f64,
    /// g/s
    pub w_f: f64,
}

impl EngineState {
    pub fn off() -> Self {
        Self {
            mode: EngineMode::Off,
            omega_eng: 0.0,
            p_eng: 0.0,
            w_f: 0.0,
        }
    }

    pub fn on(p_eng: f64, map: &FuelMap) -> Result<Self> {
        Ok(Self {
            mode: EngineMode::On,
            omega_eng: map.omega_at(p_eng)?,
            p_eng,
            w_f: fuel_rate(EngineMode::On, p_eng, map)?,
        })
    }
}

/// Fuel rate along the engine's optimal operating line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelMap {
    /// Engine power grid, W, strictly increasing.
    pub power: Vec<f64>,
    /// Optimal engine speed at each grid power, rad/s.
    pub omega: Vec<f64>,
    /// Fuel rate at each grid power, g/s.
    pub fuel: Vec<f64>,
}

impl Default for FuelMap {
    fn default() -> Self {
        Self::willans(350.0, 1.0 / 0.36, 42_500.0, 60_000.0, 1_000.0, 1000.0, 4000.0)
    }
}

impl FuelMap {
    /// Affine fuel line `(k0 + k1·P)/lhv` sampled every `step` W on `[0, p_max]`,
    /// with engine speed rising linearly from `rpm_lo` to `rpm_hi`.
    pub fn willans(k0: f64, k1: f64, lhv: f64, p_max: f64, step: f64, rpm_lo: f64, rpm_hi: f64) -> Self {
        let n = (p_max / step).round() as usize;
        let rad = std::f64::consts::PI / 30.0;
        let mut map = FuelMap {
            power: Vec::with_capacity(n + 1),
            omega: Vec::with_capacity(n + 1),
            fuel: Vec::with_capacity(n + 1),
        };
        for i in 0..=n {
            let p = i as f64 * step;
            map.power.push(p);
            map.omega.push((rpm_lo + (rpm_hi - rpm_lo) * i as f64 / n as f64) * rad);
            map.fuel.push((k0 + k1 * p) / lhv);
        }
        map
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.power.len();
        if n < 2 || self.omega.len() != n || self.fuel.len() != n {
            return Err(Error::invalid("fuel map needs at least two points and equal-length columns"));
        }
        if self.power.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("fuel map power grid must be strictly increasing"));
        }
        if self.fuel.windows(2).any(|w| w[1] < w[0]) || !(self.fuel[0] > 0.0) {
            return Err(Error::invalid("fuel rate must be positive and nondecreasing in power"));
        }
        Ok(())
    }

    pub fn p_min(&self) -> f64 {
        self.power[0]
    }

    pub fn p_max(&self) -> f64 {
        self.power[self.power.len() - 1]
    }

    fn interp(&self, column: &[f64], p: f64) -> Result<f64> {
        if !(self.p_min() <= p && p <= self.p_max()) {
            return Err(Error::OutOfMapDomain {
                power: p,
                min: self.p_min(),
                max: self.p_max(),
            });
        }
        let i = self.power.partition_point(|&x| x <= p).saturating_sub(1).min(self.power.len() - 2);
        let (p0, p1) = (self.power[i], self.power[i + 1]);
        Ok(column[i] + (p - p0) / (p1 - p0) * (column[i + 1] - column[i]))
    }

    pub fn omega_at(&self, p: f64) -> Result<f64> {
        self.interp(&self.omega, p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: FuelMap = serde_json::from_str(&text)?;
        map.validate()?;
        Ok(map)
    }
}

/// Fuel rate, g/s. Zero with the engine off.
pub fn fuel_rate(mode: EngineMode, p_eng: f64, map: &FuelMap) -> Result<f64> {
    match mode {
        EngineMode::Off => Ok(0.0),
        EngineMode::On => map.interp(&map.fuel, p_eng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    /// Fuel lower heating value, J/g.
    pub lhv: f64,
    /// Usable pack energy over 0–100 % SOC, J.
    pub battery_energy: f64,
    /// Joules of fuel charged per joule of battery energy.
    pub s_eq: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            lhv: 42_500.0,
            battery_energy: 4.68e6,
            s_eq: 2.4,
        }
    }
}

/// Fuel energy plus the fuel-equivalent of the net SOC drop, J.
/// `delta_soc` is `soc_end − soc_start` in percent.
pub fn equivalent_energy(fuel_grams: f64, delta_soc: f64, cfg: &EnergyConfig) -> f64 {
    fuel_grams * cfg.lhv + (-delta_soc) / 100.0 * cfg.battery_energy * cfg.s_eq
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub fuel_energy: f64,
    pub soc_correction: f64,
    pub soc_start: f64,
    pub soc_end: f64,
    /// Positive traction energy at the driveline input, J.
    pub traction_energy: f64,
    /// Recovered (negative traction) energy, J, as a positive number.
    pub regen_energy: f64,
    /// A/C electrical energy, J.
    pub ac_energy: f64,
    pub engine_on_seconds: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub fuel_grams: f64,
    pub delta_soc: f64,
    pub equivalent_energy: f64,
    pub breakdown: EnergyBreakdown,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traction_power_examples() {
        let p = VehicleParams::default();
        assert_eq!(traction_power(0.0, 3.0, &p), 0.0);

        let f_r: f64 = 0.009 * 1500.0 * 9.81;
        let f_a: f64 = 0.5 * 1.2 * 2.2 * 0.28 * 400.0;
        assert!((f_r - 132.435).abs() < 1e-9);
        assert!((f_a - 147.84).abs() < 1e-9);
        let expected = 20.0 * (f_r + f_a) / 0.9;
        assert!((traction_power(20.0, 0.0, &p) - expected).abs() < 1e-9);
        assert!((expected - 6227.0).abs() < 2.0);

        let wheel = 10.0 * (f_r + 0.5 * 1.2 * 2.2 * 0.28 * 100.0 + 1500.0 * -1.5);
        assert!(wheel < 0.0);
        assert!((traction_power(10.0, -1.5, &p) - wheel * 0.9).abs() < 1e-9);
    }

    #[test]
    fn soc_examples() {
        let m = SocModel::default();
        assert_eq!(soc_step(60.0, 0.0, 0.0, false, &m).soc, 60.0 + -0.01);
        assert!((soc_step(60.0, 0.0, 0.0, false, &m).soc - 59.99).abs() < 1e-12);
        assert!((soc_step(60.0, 0.0, 0.0, true, &m).soc - 59.97).abs() < 1e-12);
        assert!((soc_step(60.0, 1e4, 0.0, false, &m).soc - 59.4956).abs() < 1e-12);
    }

    #[test]
    fn soc_saturates_with_flag() {
        let m = SocModel::default();
        let up = soc_step(89.99, -5e4, 0.0, false, &m);
        assert_eq!(up.soc, 90.0);
        assert!(up.saturated);
        let down = soc_step(30.0, 0.0, 0.0, false, &m);
        assert_eq!(down.soc, 30.0);
        assert!(down.saturated);
        assert!(!soc_step(60.0, 0.0, 0.0, false, &m).saturated);
    }

    #[test]
    fn mg_balance() {
        assert_eq!(mg_power(5000.0, 0.0), 5000.0);
        assert_eq!(mg_power(5000.0, 8000.0), -3000.0);
        assert_eq!(mg_power(-2000.0, 0.0), -2000.0);
    }

    #[test]
    fn fuel_map_interpolation() {
        let map = FuelMap::default();
        map.validate().unwrap();
        assert_eq!(fuel_rate(EngineMode::Off, 12_345.0, &map).unwrap(), 0.0);
        assert_eq!(fuel_rate(EngineMode::On, 7_000.0, &map).unwrap(), map.fuel[7]);
        let mid = fuel_rate(EngineMode::On, 7_500.0, &map).unwrap();
        assert!((mid - 0.5 * (map.fuel[7] + map.fuel[8])).abs() < 1e-15);
        assert!(fuel_rate(EngineMode::On, 0.0, &map).unwrap() > 0.0);
        assert!(matches!(
            fuel_rate(EngineMode::On, 60_001.0, &map),
            Err(Error::OutOfMapDomain { .. })
        ));
        assert!(matches!(
            fuel_rate(EngineMode::On, -1.0, &map),
            Err(Error::OutOfMapDomain { .. })
        ));
        let rpm_top = map.omega_at(60_000.0).unwrap() * 30.0 / std::f64::consts::PI;
        assert!((rpm_top - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn equivalent_energy_examples() {
        let cfg = EnergyConfig::default();
        assert!((equivalent_energy(100.0, 0.0, &cfg) - 4.25e6).abs() < 1e-6);
        assert!((equivalent_energy(0.0, -5.0, &cfg) - 0.5616e6).abs() < 1e-6);
        let fuel = 3.0;
        let gain = fuel * cfg.lhv * 100.0 / (cfg.battery_energy * cfg.s_eq);
        assert!(equivalent_energy(fuel, gain, &cfg).abs() < 1e-6);
    }
}
