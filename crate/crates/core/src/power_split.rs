//! Stage III: engine on/off and battery power per second.
//!
//! `dp_optimize` runs backward value iteration on an SOC grid with the value
//! function interpolated linearly between nodes, then rolls forward from the
//! exact initial SOC choosing the argmin control at every visited state.
//! `rule_based` is the charge-sustaining load-leveling baseline.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{
    equivalent_energy, fuel_rate, soc_step, EnergyBreakdown, EnergyConfig, EnergyReport, EngineMode, FuelMap,
    SocModel,
};

/// Vehicle-model handles shared by both controllers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Powertrain {
    pub soc_model: SocModel,
    pub fuel_map: FuelMap,
    pub energy: EnergyConfig,
}

impl Powertrain {
    pub fn validate(&self) -> Result<()> {
        self.soc_model.validate()?;
        self.fuel_map.validate()
    }
}

/// Input series, one entry per second.
#[derive(Debug, Clone, Copy)]
pub struct PowerDemand<'a> {
    pub p_trac: &'a [f64],
    pub p_ac: &'a [f64],
    pub ac_on: &'a [bool],
}

impl PowerDemand<'_> {
    pub fn len(&self) -> usize {
        self.p_trac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_trac.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.p_ac.len() != self.len() || self.ac_on.len() != self.len() {
            return Err(Error::invalid("traction, A/C power and A/C flag series differ in length"));
        }
        if self.p_trac.iter().chain(self.p_ac).any(|p| !p.is_finite()) {
            return Err(Error::invalid("power series contain non-finite values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    pub soc_grid: Vec<f64>,
    pub pbat_grid: Vec<f64>,
    /// Φ weight, J per %² of terminal shortfall.
    pub terminal_weight: f64,
    /// Terminal reference; `None` uses the initial SOC.
    pub soc_target: Option<f64>,
    /// Forbid any terminal shortfall instead of penalizing it.
    pub hard_terminal: bool,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            soc_grid: (0..=240).map(|i| 30.0 + 0.25 * i as f64).collect(),
            pbat_grid: (0..21).map(|i| -25_000.0 + 2_500.0 * i as f64).collect(),
            terminal_weight: 1e6,
            soc_target: None,
            hard_terminal: false,
        }
    }
}

impl DpConfig {
    pub fn validate(&self, model: &SocModel) -> Result<()> {
        let increasing = |g: &[f64]| g.len() >= 2 && g.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.soc_grid) || self.pbat_grid.is_empty() || !self.pbat_grid.windows(2).all(|w| w[1] > w[0])
        {
            return Err(Error::invalid("DP grids must be strictly increasing (SOC grid needs two nodes)"));
        }
        if self.soc_grid[0] < model.soc_min || self.soc_grid[self.soc_grid.len() - 1] > model.soc_max {
            return Err(Error::invalid("SOC grid leaves the admissible SOC range"));
        }
        if !(self.terminal_weight >= 0.0) {
            return Err(Error::invalid("terminal_weight must be non-negative"));
        }
        Ok(())
    }

    fn terminal_cost(&self, soc: f64, target: f64) -> f64 {
        let short = target - soc;
        if self.hard_terminal {
            if short > 1e-9 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            self.terminal_weight * short.max(0.0).powi(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub mode: EngineMode,
    pub p_bat: f64,
    pub p_eng: f64,
    pub p_mg: f64,
    /// g/s
    pub w_f: f64,
    /// SOC at the end of the step, %.
    pub soc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSplitSchedule {
    pub soc0: f64,
    pub steps: Vec<ScheduleStep>,
}

impl PowerSplitSchedule {
    pub fn soc_final(&self) -> f64 {
        self.steps.last().map_or(self.soc0, |s| s.soc)
    }

    pub fn fuel_grams(&self) -> f64 {
        self.steps.iter().map(|s| s.w_f).sum()
    }

    /// CSV columns `time,mode,P_bat,P_eng,W_f,soc`; mode is 1 (off) or 2 (on).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "mode", "P_bat", "P_eng", "W_f", "soc"])?;
        for (k, s) in self.steps.iter().enumerate() {
            w.write_record(&[
                k.to_string(),
                (s.mode as u8).to_string(),
                s.p_bat.to_string(),
                s.p_eng.to_string(),
                s.w_f.to_string(),
                s.soc.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Read one numeric column, by header name, from a CSV.
pub fn read_series_csv<R: Read>(reader: R, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(reader);
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::invalid(format!("CSV has no `{column}` column")))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = rec.get(idx).unwrap_or("");
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad `{column}` value {field:?}")))?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Control {
    mode: EngineMode,
    p_bat: f64,
    p_eng: f64,
    p_mg: f64,
    w_f: f64,
    /// Fuel energy over the step, J.
    cost: f64,
}

/// Admissible controls at one step, Off first then On by ascending `P_bat`.
fn stage_controls(p_trac: f64, p_ac: f64, cfg: &DpConfig, pt: &Powertrain) -> Vec<Control> {
    let (lo, hi) = (cfg.pbat_grid[0], cfg.pbat_grid[cfg.pbat_grid.len() - 1]);
    let mut out = Vec::with_capacity(cfg.pbat_grid.len() + 1);
    let off_bat = p_trac + p_ac;
    if (lo..=hi).contains(&off_bat) {
        out.push(Control {
            mode: EngineMode::Off,
            p_bat: off_bat,
            p_eng: 0.0,
            p_mg: p_trac,
            w_f: 0.0,
            cost: 0.0,
        });
    }
    for &p_bat in &cfg.pbat_grid {
        let p_mg = p_bat - p_ac;
        let p_eng = p_trac - p_mg;
        if !(p_eng > 0.0 && p_eng >= pt.fuel_map.p_min() && p_eng <= pt.fuel_map.p_max()) {
            continue;
        }
        let w_f = fuel_rate(EngineMode::On, p_eng, &pt.fuel_map).expect("checked map domain");
        out.push(Control {
            mode: EngineMode::On,
            p_bat,
            p_eng,
            p_mg,
            w_f,
            cost: w_f * pt.soc_model.dt * pt.energy.lhv,
        });
    }
    out
}

/// Linear interpolation of node values; infinite if a used neighbour is.
pub fn interpolate(grid: &[f64], values: &[f64], s: f64) -> f64 {
    let n = grid.len();
    if !(grid[0] <= s && s <= grid[n - 1]) {
        return f64::INFINITY;
    }
    let i = grid.partition_point(|&g| g <= s) - 1;
    if s == grid[i] {
        return values[i];
    }
    let (v0, v1) = (values[i], values[i + 1]);
    if !(v0.is_finite() && v1.is_finite()) {
        return f64::INFINITY;
    }
    let w = (s - grid[i]) / (grid[i + 1] - grid[i]);
    (1.0 - w) * v0 + w * v1
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub schedule: PowerSplitSchedule,
    /// Value-function prediction of the optimal cost from `soc0`, J.
    pub optimal_cost: f64,
    /// `values[k][j]`: cost-to-go from grid node `j` at step `k`, `k = 0..=K`.
    pub values: Vec<Vec<f64>>,
    pub soc_target: f64,
}

struct Stage<'a> {
    controls: Vec<Control>,
    p_ac: f64,
    ac_on: bool,
    model: &'a SocModel,
}

impl Stage<'_> {
    /// Best `(q, control index, next soc)` from `soc` against `next_values`.
    fn best(&self, soc: f64, grid: &[f64], next_values: &[f64]) -> Option<(f64, usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (i, c) in self.controls.iter().enumerate() {
            let s1 = self.model.next_raw(soc, c.p_mg, self.p_ac, self.ac_on);
            if !self.model.contains(s1) {
                continue;
            }
            let q = c.cost + interpolate(grid, next_values, s1);
            if q.is_finite() && best.is_none_or(|b| q < b.0) {
                best = Some((q, i, s1));
            }
        }
        best
    }
}

/// Fuel-optimal power split by dynamic programming over SOC.
pub fn dp_optimize(demand: PowerDemand, soc0: f64, cfg: &DpConfig, pt: &Powertrain) -> Result<DpSolution> {
    demand.validate()?;
    pt.validate()?;
    cfg.validate(&pt.soc_model)?;
    if !pt.soc_model.contains(soc0) {
        return Err(Error::invalid(format!("initial SOC {soc0} outside the admissible range")));
    }
    let k_len = demand.len();
    let grid = &cfg.soc_grid;
    let target = cfg.soc_target.unwrap_or(soc0);
    let stages: Vec<Stage> = (0..k_len)
        .map(|k| Stage {
            controls: stage_controls(demand.p_trac[k], demand.p_ac[k], cfg, pt),
            p_ac: demand.p_ac[k],
            ac_on: demand.ac_on[k],
            model: &pt.soc_model,
        })
        .collect();

    let mut values = vec![Vec::new(); k_len + 1];
    values[k_len] = grid.iter().map(|&s| cfg.terminal_cost(s, target)).collect();
    for k in (0..k_len).rev() {
        let next = &values[k + 1];
        let stage = &stages[k];
        values[k] = grid
            .par_iter()
            .map(|&s| stage.best(s, grid, next).map_or(f64::INFINITY, |b| b.0))
            .collect();
    }

    let mut soc = soc0;
    let mut steps = Vec::with_capacity(k_len);
    let mut optimal_cost = f64::NAN;
    for (k, stage) in stages.iter().enumerate() {
        let Some((q, i, s1)) = stage.best(soc, grid, &values[k + 1]) else {
            return Err(Error::InfeasibleInstance { step: k });
        };
        if k == 0 {
            optimal_cost = q;
        }
        let c = stage.controls[i];
        steps.push(ScheduleStep {
            mode: c.mode,
            p_bat: c.p_bat,
            p_eng: c.p_eng,
            p_mg: c.p_mg,
            w_f: c.w_f,
            soc: s1,
        });
        soc = s1;
    }
    if k_len == 0 {
        optimal_cost = cfg.terminal_cost(soc0, target);
        if !optimal_cost.is_finite() {
            return Err(Error::InfeasibleInstance { step: 0 });
        }
    }
    Ok(DpSolution {
        schedule: PowerSplitSchedule { soc0, steps },
        optimal_cost,
        values,
        soc_target: target,
    })
}

impl DpSolution {
    /// Fuel energy of the schedule plus the terminal cost it actually incurs, J.
    pub fn realized_cost(&self, cfg: &DpConfig, pt: &Powertrain) -> f64 {
        self.schedule.fuel_grams() * pt.soc_model.dt * pt.energy.lhv
            + cfg.terminal_cost(self.schedule.soc_final(), self.soc_target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleBasedConfig {
    pub soc_high: f64,
    pub soc_low: f64,
    pub p_eng_level: f64,
    pub engine_on_power_threshold: f64,
    pub p_bat_discharge_max: f64,
    pub p_bat_charge_max: f64,
}

impl Default for RuleBasedConfig {
    fn default() -> Self {
        Self {
            soc_high: 62.0,
            soc_low: 58.0,
            p_eng_level: 12_000.0,
            engine_on_power_threshold: 10_000.0,
            p_bat_discharge_max: 25_000.0,
            p_bat_charge_max: 25_000.0,
        }
    }
}

impl RuleBasedConfig {
    pub fn validate(&self, model: &SocModel) -> Result<()> {
        if !(model.soc_min <= self.soc_low && self.soc_low < self.soc_high && self.soc_high <= model.soc_max) {
            return Err(Error::invalid("rule-based SOC band must satisfy soc_min <= low < high <= soc_max"));
        }
        if !(self.p_eng_level > 0.0 && self.p_bat_discharge_max > 0.0 && self.p_bat_charge_max > 0.0) {
            return Err(Error::invalid("rule-based power levels must be positive"));
        }
        Ok(())
    }
}

/// Hysteresis load-leveling: the engine runs at `p_eng_level` while on and the
/// battery absorbs the difference, within its power limits.
pub fn rule_based(demand: PowerDemand, soc0: f64, cfg: &RuleBasedConfig, pt: &Powertrain) -> Result<PowerSplitSchedule> {
    demand.validate()?;
    pt.validate()?;
    cfg.validate(&pt.soc_model)?;
    let map_max = pt.fuel_map.p_max();
    let mut soc = soc0.clamp(pt.soc_model.soc_min, pt.soc_model.soc_max);
    let mut engine_on = false;
    let mut steps = Vec::with_capacity(demand.len());
    for k in 0..demand.len() {
        let (p_trac, p_ac) = (demand.p_trac[k], demand.p_ac[k]);
        if soc < cfg.soc_low || p_trac > cfg.engine_on_power_threshold {
            engine_on = true;
        } else if soc > cfg.soc_high && p_trac <= cfg.engine_on_power_threshold {
            engine_on = false;
        }
        // Engine power keeping the battery within its discharge/charge limits.
        let need = p_trac + p_ac - cfg.p_bat_discharge_max;
        let allow = p_trac + p_ac + cfg.p_bat_charge_max;
        let mut p_eng = if engine_on {
            cfg.p_eng_level.max(need).min(allow)
        } else {
            need.max(0.0)
        };
        p_eng = p_eng.min(map_max);
        if p_eng <= 0.0 {
            p_eng = 0.0;
        }
        let mode = if p_eng > 0.0 { EngineMode::On } else { EngineMode::Off };
        let p_mg = p_trac - p_eng;
        let w_f = fuel_rate(mode, p_eng, &pt.fuel_map)?;
        soc = soc_step(soc, p_mg, p_ac, demand.ac_on[k], &pt.soc_model).soc;
        steps.push(ScheduleStep {
            mode,
            p_bat: p_mg + p_ac,
            p_eng,
            p_mg,
            w_f,
            soc,
        });
    }
    Ok(PowerSplitSchedule { soc0, steps })
}

fn inconsistent(step: usize, reason: impl Into<String>) -> Error {
    Error::InconsistentSchedule {
        step,
        reason: reason.into(),
    }
}

/// Replay a schedule through the SOC model and fuel map and account for it.
pub fn simulate_schedule(schedule: &PowerSplitSchedule, demand: PowerDemand, pt: &Powertrain) -> Result<EnergyReport> {
    demand.validate()?;
    if schedule.steps.len() != demand.len() {
        return Err(inconsistent(
            schedule.steps.len().min(demand.len()),
            format!("schedule has {} steps for {} inputs", schedule.steps.len(), demand.len()),
        ));
    }
    let dt = pt.soc_model.dt;
    let mut soc = schedule.soc0;
    let mut fuel = 0.0;
    let mut b = EnergyBreakdown {
        soc_start: schedule.soc0,
        ..EnergyBreakdown::default()
    };
    for (k, s) in schedule.steps.iter().enumerate() {
        let (p_trac, p_ac) = (demand.p_trac[k], demand.p_ac[k]);
        let tol = 1e-6 * p_trac.abs().max(p_ac.abs()).max(1.0);
        match s.mode {
            EngineMode::Off if s.p_eng != 0.0 || s.w_f != 0.0 => {
                return Err(inconsistent(k, "engine off with nonzero power or fuel"));
            }
            EngineMode::On if !(s.p_eng > 0.0) => return Err(inconsistent(k, "engine on without positive power")),
            _ => {}
        }
        if (s.p_eng + s.p_mg - p_trac).abs() > tol {
            return Err(inconsistent(k, "P_eng + P_mg differs from P_trac"));
        }
        if (s.p_bat - (s.p_mg + p_ac)).abs() > tol {
            return Err(inconsistent(k, "P_bat differs from P_mg + P_ac"));
        }
        let w_f = fuel_rate(s.mode, s.p_eng, &pt.fuel_map)?;
        if (w_f - s.w_f).abs() > 1e-12 * w_f.max(1.0) {
            return Err(inconsistent(k, "recorded fuel rate differs from the fuel map"));
        }
        soc = soc_step(soc, s.p_mg, p_ac, demand.ac_on[k], &pt.soc_model).soc;
        if (soc - s.soc).abs() > 1e-9 {
            return Err(inconsistent(k, format!("recorded SOC {} differs from replayed {}", s.soc, soc)));
        }
        fuel += w_f * dt;
        if p_trac >= 0.0 {
            b.traction_energy += p_trac * dt;
        } else {
            b.regen_energy -= p_trac * dt;
        }
        if demand.ac_on[k] {
            b.ac_energy += p_ac * dt;
        }
        if s.mode == EngineMode::On {
            b.engine_on_seconds += dt;
        }
    }
    b.duration = demand.len() as f64 * dt;
    b.soc_end = soc;
    let delta_soc = soc - schedule.soc0;
    b.fuel_energy = fuel * pt.energy.lhv;
    b.soc_correction = equivalent_energy(0.0, delta_soc, &pt.energy);
    Ok(EnergyReport {
        fuel_grams: fuel,
        delta_soc,
        equivalent_energy: equivalent_energy(fuel, delta_soc, &pt.energy),
        breakdown: b,
    })
}
