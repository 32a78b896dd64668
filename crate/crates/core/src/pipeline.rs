//! The sequential pipeline: speed trace, then A/C load on that trace, then
//! the power split on both, for the baseline and each cumulative stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ac_mpc::{run_ac_controller, AcLoadTrajectory, AcMode, PilotingConfig, SchedulingConfig};
use crate::error::{Error, Result};
use crate::power_split::{dp_optimize, rule_based, simulate_schedule, DpConfig, PowerDemand, Powertrain, RuleBasedConfig};
use crate::sim::{simulate_corridor, traction_series, BackgroundSpec, Corridor, Driver, EgoSpec, EgoTrace, SimConfig};
use crate::speed_planner::KinematicLimits;
use crate::thermal::{Ambient, AmbientProfile, ThermalPlantParams, ThermalState};
use crate::traffic::QueueKinematics;
use crate::vehicle::{EnergyReport, FuelMap, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub speed: bool,
    pub eco_cool: bool,
    pub dp: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            speed: true,
            eco_cool: true,
            dp: true,
        }
    }
}

impl StageToggles {
    pub const NONE: Self = Self {
        speed: false,
        eco_cool: false,
        dp: false,
    };

    /// Parse a comma-separated subset of `speed,ac,dp`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut t = Self::NONE;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "speed" => t.speed = true,
                "ac" => t.eco_cool = true,
                "dp" => t.dp = true,
                other => return Err(Error::invalid(format!("unknown stage `{other}` (expected speed, ac, dp)"))),
            }
        }
        Ok(t)
    }
}

fn default_soc0() -> f64 {
    60.0
}

fn default_regen_limit() -> f64 {
    15_000.0
}

fn default_cooldown() -> f64 {
    80.0
}

fn default_ambient() -> Ambient {
    Ambient {
        t_amb: 35.0,
        solar_load: 900.0,
    }
}

fn default_cabin() -> ThermalState {
    ThermalState {
        t_cab: 40.0,
        t_int: 40.0,
        t_shell: 38.0,
        t_evap: 10.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub corridor: Corridor,
    #[serde(default)]
    pub background: BackgroundSpec,
    pub ego: EgoSpec,
    #[serde(default = "default_ambient")]
    pub ambient: Ambient,
    /// CSV `time,T_amb,solar_load` overriding `ambient`, relative to the scenario file.
    #[serde(default)]
    pub ambient_file: Option<PathBuf>,
    #[serde(default = "default_cabin")]
    pub initial_cabin: ThermalState,
    #[serde(default = "default_soc0")]
    pub soc0: f64,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub powertrain: Powertrain,
    /// JSON fuel map overriding `powertrain.fuel_map`, relative to the scenario file.
    #[serde(default)]
    pub fuel_map_file: Option<PathBuf>,
    #[serde(default)]
    pub thermal: ThermalPlantParams,
    #[serde(default)]
    pub scheduling: SchedulingConfig,
    #[serde(default)]
    pub piloting: PilotingConfig,
    #[serde(default)]
    pub dp: DpConfig,
    #[serde(default)]
    pub rule_based: RuleBasedConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub planner: KinematicLimits,
    #[serde(default)]
    pub queue: QueueKinematics,
    #[serde(default)]
    pub stages: StageToggles,
    /// Regenerative braking power limit, W; the rest goes to friction brakes.
    #[serde(default = "default_regen_limit")]
    pub regen_limit: f64,
    /// Seconds excluded from comfort statistics while the cabin cools down.
    #[serde(default = "default_cooldown")]
    pub cooldown_exclusion: f64,
    #[serde(skip)]
    ambient_profile: Option<AmbientProfile>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        Ok(s)
    }

    /// Load a scenario and the files it references.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = &s.fuel_map_file {
            s.powertrain.fuel_map = FuelMap::load(&dir.join(f))?;
        }
        if let Some(f) = &s.ambient_file {
            let p = dir.join(f);
            let file = std::fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
            s.ambient_profile = Some(AmbientProfile::read_csv(file)?);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn ambient_profile(&self) -> AmbientProfile {
        self.ambient_profile
            .clone()
            .unwrap_or_else(|| AmbientProfile::constant(self.ambient))
    }

    pub fn validate(&self) -> Result<()> {
        self.corridor.validate()?;
        self.vehicle.validate()?;
        self.powertrain.validate()?;
        self.thermal.validate()?;
        self.scheduling.validate()?;
        self.piloting.validate()?;
        self.dp.validate(&self.powertrain.soc_model)?;
        self.rule_based.validate(&self.powertrain.soc_model)?;
        self.planner.validate()?;
        self.initial_cabin.validate()?;
        self.ambient_profile().validate()?;
        if !self.powertrain.soc_model.contains(self.soc0) {
            return Err(Error::invalid("soc0 outside the admissible SOC range"));
        }
        if !(self.ego.entry_speed >= 0.0 && self.regen_limit >= 0.0) {
            return Err(Error::invalid("ego entry speed and regen limit must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComfortStats {
    /// Mean cabin temperature after the cool-down window, °C; `None` for
    /// trips that end inside the window.
    pub mean_t_cab: Option<f64>,
    /// Seconds after cool-down with the cabin outside `[T_cab_LL, T_cab_UL]`.
    pub bound_violation_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageRuntime {
    pub speed: Duration,
    pub ac: Duration,
    pub split: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationReport {
    pub name: String,
    /// Stages actually applied after scenario toggles.
    pub stages: StageToggles,
    pub energy: EnergyReport,
    /// Equivalent-energy saving against the baseline configuration, %.
    pub saving_percent: f64,
    pub trip_time: f64,
    pub comfort: ComfortStats,
    /// Wall-clock time per stage; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime: StageRuntime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub scenario: String,
    pub configurations: Vec<ConfigurationReport>,
}

impl StageReport {
    pub fn get(&self, name: &str) -> Option<&ConfigurationReport> {
        self.configurations.iter().find(|c| c.name == name)
    }
}

/// Names of the four cumulative configurations.
pub const CONFIGURATIONS: [&str; 4] = ["baseline", "I", "I-II", "I-III"];

fn requested(name: &str, t: StageToggles) -> StageToggles {
    match name {
        "baseline" => StageToggles::NONE,
        "I" => StageToggles {
            speed: t.speed,
            ..StageToggles::NONE
        },
        "I-II" => StageToggles { dp: false, ..t },
        _ => t,
    }
}

struct Evaluated {
    trace: EgoTrace,
    ac: AcLoadTrajectory,
    energy: EnergyReport,
    runtime: StageRuntime,
}

struct Runner<'a> {
    s: &'a Scenario,
    arrivals: Vec<crate::sim::Arrival>,
    traces: BTreeMap<bool, (EgoTrace, Duration)>,
    ac: BTreeMap<(bool, bool), (AcLoadTrajectory, Duration)>,
}

impl Runner<'_> {
    fn trace(&mut self, eco: bool) -> Result<(EgoTrace, Duration)> {
        if let Some(t) = self.traces.get(&eco) {
            return Ok(t.clone());
        }
        let start = Instant::now();
        let driver = if eco {
            Driver::Eco {
                limits: self.s.planner,
                queue: self.s.queue,
            }
        } else {
            Driver::Idm
        };
        let trace = simulate_corridor(&self.s.corridor, &self.arrivals, &self.s.ego, &driver, &self.s.sim)
            .map_err(Error::in_stage("speed"))?;
        let out = (trace, start.elapsed());
        self.traces.insert(eco, out.clone());
        Ok(out)
    }

    fn ac(&mut self, speed: bool, eco: bool) -> Result<(AcLoadTrajectory, Duration)> {
        if let Some(a) = self.ac.get(&(speed, eco)) {
            return Ok(a.clone());
        }
        let (trace, _) = self.trace(speed)?;
        let start = Instant::now();
        let mode = if eco { AcMode::EcoCool } else { AcMode::ConstantSetpoint };
        let s = self.s;
        let ac = run_ac_controller(
            &trace.trajectory,
            &s.initial_cabin,
            &s.ambient_profile(),
            &s.thermal,
            &s.scheduling,
            &s.piloting,
            mode,
        )
        .map_err(Error::in_stage("ac"))?;
        let out = (ac, start.elapsed());
        self.ac.insert((speed, eco), out.clone());
        Ok(out)
    }

    fn evaluate(&mut self, t: StageToggles) -> Result<Evaluated> {
        let (trace, speed_time) = self.trace(t.speed)?;
        let (ac, ac_time) = self.ac(t.speed, t.eco_cool)?;
        let s = self.s;
        let start = Instant::now();
        let p_trac = traction_series(&trace.trajectory, &s.vehicle, s.regen_limit);
        let p_ac = ac.power();
        let ac_on = vec![true; p_ac.len()];
        let demand = PowerDemand {
            p_trac: &p_trac,
            p_ac: &p_ac,
            ac_on: &ac_on,
        };
        let schedule = if t.dp {
            dp_optimize(demand, s.soc0, &s.dp, &s.powertrain).map(|d| d.schedule)
        } else {
            rule_based(demand, s.soc0, &s.rule_based, &s.powertrain)
        }
        .map_err(Error::in_stage("power-split"))?;
        let energy = simulate_schedule(&schedule, demand, &s.powertrain).map_err(Error::in_stage("power-split"))?;
        Ok(Evaluated {
            trace,
            ac,
            energy,
            runtime: StageRuntime {
                speed: speed_time,
                ac: ac_time,
                split: start.elapsed(),
            },
        })
    }
}

fn comfort(ac: &AcLoadTrajectory, s: &Scenario) -> ComfortStats {
    let after: Vec<f64> = ac
        .steps
        .iter()
        .filter(|st| st.time >= s.cooldown_exclusion)
        .map(|st| st.t_cab)
        .collect();
    let cfg = &s.scheduling;
    ComfortStats {
        mean_t_cab: ac.mean_cabin_after(s.cooldown_exclusion),
        bound_violation_seconds: after
            .iter()
            .filter(|t| **t > cfg.t_cab_ul || **t < cfg.t_cab_ll)
            .count() as f64,
    }
}

fn run_configurations(s: &Scenario, names: &[&str]) -> Result<StageReport> {
    s.validate()?;
    let mut runner = Runner {
        s,
        arrivals: s.background.arrivals(),
        traces: BTreeMap::new(),
        ac: BTreeMap::new(),
    };
    let mut cache: BTreeMap<StageToggles, (EnergyReport, f64, ComfortStats, StageRuntime)> = BTreeMap::new();
    let mut configurations = Vec::with_capacity(names.len());
    for &name in names {
        let eff = requested(name, s.stages);
        let entry = match cache.get(&eff) {
            Some(e) => *e,
            None => {
                let ev = runner.evaluate(eff)?;
                let e = (ev.energy, ev.trace.trip_time(), comfort(&ev.ac, s), ev.runtime);
                cache.insert(eff, e);
                e
            }
        };
        configurations.push(ConfigurationReport {
            name: name.to_string(),
            stages: eff,
            energy: entry.0,
            saving_percent: 0.0,
            trip_time: entry.1,
            comfort: entry.2,
            runtime: entry.3,
        });
    }
    let base = configurations
        .iter()
        .find(|c| c.name == "baseline")
        .map(|c| c.energy.equivalent_energy);
    if let Some(base) = base {
        for c in &mut configurations {
            c.saving_percent = (base - c.energy.equivalent_energy) / base * 100.0;
        }
    }
    Ok(StageReport {
        scenario: s.name.clone(),
        configurations,
    })
}

/// Baseline plus the three cumulative stage configurations.
pub fn run_pipeline(s: &Scenario) -> Result<StageReport> {
    run_configurations(s, &CONFIGURATIONS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEntry {
    pub scenario: String,
    pub saving_percent: Option<f64>,
    pub baseline_energy: Option<f64>,
    pub optimized_energy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub entries: Vec<FleetEntry>,
    pub mean_saving: Option<f64>,
    pub max_saving: Option<f64>,
    pub min_saving: Option<f64>,
    pub succeeded: usize,
    pub failed: usize,
}

/// Speed optimization alone (constant setpoint, rule-based split) on every
/// scenario; failures are recorded per entry.
pub fn run_fleet(scenarios: &[Scenario]) -> Result<FleetSummary> {
    if scenarios.is_empty() {
        return Err(Error::invalid("fleet needs at least one scenario"));
    }
    let entries: Vec<FleetEntry> = scenarios
        .par_iter()
        .map(|s| {
            let mut s1 = s.clone();
            s1.stages = StageToggles {
                speed: true,
                ..StageToggles::NONE
            };
            match run_configurations(&s1, &["baseline", "I"]) {
                Ok(r) => {
                    let i = r.get("I").expect("configuration I requested");
                    FleetEntry {
                        scenario: s.name.clone(),
                        saving_percent: Some(i.saving_percent),
                        baseline_energy: r.get("baseline").map(|b| b.energy.equivalent_energy),
                        optimized_energy: Some(i.energy.equivalent_energy),
                        error: None,
                    }
                }
                Err(e) => FleetEntry {
                    scenario: s.name.clone(),
                    saving_percent: None,
                    baseline_energy: None,
                    optimized_energy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let savings: Vec<f64> = entries.iter().filter_map(|e| e.saving_percent).collect();
    let n = savings.len();
    Ok(FleetSummary {
        mean_saving: (n > 0).then(|| savings.iter().sum::<f64>() / n as f64),
        max_saving: savings.iter().copied().reduce(f64::max),
        min_saving: savings.iter().copied().reduce(f64::min),
        succeeded: n,
        failed: entries.len() - n,
        entries,
    })
}

/// Load every `*.json` scenario in `dir`, in file-name order.
pub fn load_scenario_dir(dir: &Path) -> Result<Vec<Scenario>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Scenario::load(p)).collect()
}
