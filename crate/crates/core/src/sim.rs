//! Single-lane corridor microsimulation used to produce ego speed traces.
//!
//! Background vehicles and the baseline ego follow the intelligent driver
//! model; a red signal acts as a standing obstacle at the stop bar once a
//! vehicle can stop for it comfortably. The eco ego plans an approach to each
//! intersection when it comes within communication range, following the plan
//! unless a leader or a red light gets closer than the IDM desired gap.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speed_planner::{plan_trajectory, KinematicLimits, SpeedPlan, StrategyKind, Trajectory, PLAN_DT};
use crate::traffic::{green_window, predict_queue, BsmRecord, GreenWindow, Intersection, QueueKinematics};
use crate::vehicle::{traction_power, VehicleParams};

/// Speed-error feedback while following a plan, 1/s.
const PLAN_TRACKING_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub accel: f64,
    pub comfort_decel: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub delta: f64,
    /// Hard floor on any commanded acceleration, m/s² (positive number).
    pub max_decel: f64,
    /// Drivers stop for red only if it needs at most this deceleration.
    pub red_stop_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            accel: 1.5,
            comfort_decel: 2.0,
            time_headway: 1.5,
            min_gap: 2.0,
            delta: 4.0,
            max_decel: 6.0,
            red_stop_decel: 3.0,
        }
    }
}

impl IdmParams {
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        self.min_gap + (v * self.time_headway + v * dv / (2.0 * (self.accel * self.comfort_decel).sqrt())).max(0.0)
    }

    /// IDM acceleration toward `v_des` behind an obstacle `(gap, speed)`.
    pub fn accel(&self, v: f64, v_des: f64, obstacle: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v / v_des).powf(self.delta);
        let interact = obstacle.map_or(0.0, |(gap, v_lead)| {
            let s = self.desired_gap(v, v - v_lead) / gap.max(0.01);
            s * s
        });
        (self.accel * (free - interact)).max(-self.max_decel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub length: f64,
    pub speed_limit: f64,
    pub intersections: Vec<Intersection>,
}

impl Corridor {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.speed_limit > 0.0) {
            return Err(Error::invalid("corridor length and speed limit must be positive"));
        }
        for x in &self.intersections {
            x.validate()?;
            if x.stop_bar_position >= self.length {
                return Err(Error::invalid(format!("intersection {} lies past the corridor end", x.id)));
            }
        }
        if self
            .intersections
            .windows(2)
            .any(|w| w[1].stop_bar_position <= w[0].stop_bar_position)
        {
            return Err(Error::invalid("intersections must be ordered by stop bar position"));
        }
        Ok(())
    }

    /// Index of the first intersection whose stop bar is strictly ahead of `x`.
    pub fn next_intersection(&self, x: f64) -> Option<usize> {
        self.intersections.iter().position(|i| i.stop_bar_position > x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub speed: f64,
}

/// Background traffic: exponential headways at `rate` on `[start, end)`
/// with uniform entry speeds, plus explicitly scripted arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundSpec {
    pub seed: u64,
    pub rate: f64,
    pub start: f64,
    pub end: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub scripted: Vec<Arrival>,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            rate: 0.0,
            start: 0.0,
            end: 0.0,
            speed_min: 10.0,
            speed_max: 14.0,
            scripted: Vec::new(),
        }
    }
}

impl BackgroundSpec {
    pub fn arrivals(&self) -> Vec<Arrival> {
        let mut out = self.scripted.clone();
        if self.rate > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut t = self.start;
            loop {
                let u: f64 = rng.random();
                t += -(1.0 - u).ln() / self.rate;
                if t >= self.end {
                    break;
                }
                let s: f64 = rng.random();
                out.push(Arrival {
                    time: t,
                    speed: self.speed_min + s * (self.speed_max - self.speed_min),
                });
            }
        }
        out.sort_by(|a, b| a.time.total_cmp(&b.time));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub vehicle_id: u32,
    pub entry_time: f64,
    pub entry_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    /// Longest ego trip before the run is abandoned, s.
    pub max_duration: f64,
    pub comm_range: f64,
    pub idm: IdmParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: PLAN_DT,
            max_duration: 1800.0,
            comm_range: 400.0,
            idm: IdmParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    Idm,
    Eco {
        limits: KinematicLimits,
        queue: QueueKinematics,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    pub intersection: u32,
    pub time: f64,
    pub window: Option<GreenWindow>,
    /// `None` when planning failed and the ego fell back to IDM.
    pub strategy: Option<StrategyKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoTrace {
    /// Ego speed from actual entry, sampled at the simulation step.
    pub trajectory: Trajectory,
    pub entry_time: f64,
    pub plans: Vec<PlanRecord>,
}

impl EgoTrace {
    pub fn trip_time(&self) -> f64 {
        self.trajectory.duration()
    }
}

struct Vehicle {
    id: u32,
    x: f64,
    v: f64,
    v_des: f64,
    ego: bool,
    /// Intersection index this vehicle has committed to stopping at.
    red_commit: Option<usize>,
}

struct EcoState {
    planned_through: Option<usize>,
    active: Option<(usize, SpeedPlan)>,
}

/// Red-light obstacle `(gap, 0)` for a vehicle at `x`, if it applies.
fn red_obstacle(
    corridor: &Corridor,
    veh: &mut Vehicle,
    t: f64,
    idm: &IdmParams,
    only_if_arriving_in_red: bool,
) -> Option<(f64, f64)> {
    let j = corridor.next_intersection(veh.x)?;
    let inter = &corridor.intersections[j];
    let d = inter.stop_bar_position - veh.x;
    if inter.signal.is_green(t) {
        veh.red_commit = None;
        return None;
    }
    if only_if_arriving_in_red && veh.red_commit != Some(j) {
        let eta = t + d / veh.v.max(0.5);
        if inter.signal.is_green(eta) {
            return None;
        }
    }
    if veh.red_commit != Some(j) {
        let need = veh.v * veh.v / (2.0 * d.max(1e-3));
        if need > idm.red_stop_decel {
            return None;
        }
        veh.red_commit = Some(j);
    }
    Some((d, 0.0))
}

fn bsm_snapshot(vehicles: &[Vehicle], from: f64, to: f64, t: f64) -> Vec<BsmRecord> {
    vehicles
        .iter()
        .filter(|v| !v.ego && v.x > from && v.x <= to)
        .map(|v| BsmRecord {
            vehicle_id: v.id,
            time: t,
            position: v.x,
            speed: v.v,
        })
        .collect()
}

/// Simulate the corridor until the ego leaves it.
pub fn simulate_corridor(
    corridor: &Corridor,
    arrivals: &[Arrival],
    ego: &EgoSpec,
    driver: &Driver,
    cfg: &SimConfig,
) -> Result<EgoTrace> {
    corridor.validate()?;
    if !(cfg.dt > 0.0 && cfg.max_duration > 0.0) {
        return Err(Error::invalid("simulation dt and max_duration must be positive"));
    }
    let dt = cfg.dt;
    let idm = &cfg.idm;
    let v_lim = corridor.speed_limit;

    // Pending entries in time order; the ego is inserted among the background.
    let mut pending: Vec<(f64, u32, f64, bool)> = arrivals
        .iter()
        .enumerate()
        .map(|(i, a)| (a.time, ego.vehicle_id.wrapping_add(1 + i as u32), a.speed, false))
        .collect();
    pending.push((ego.entry_time, ego.vehicle_id, ego.entry_speed, true));
    pending.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));
    let mut pending = pending.into_iter().peekable();

    let mut vehicles: Vec<Vehicle> = Vec::new();
    let mut eco = EcoState {
        planned_through: None,
        active: None,
    };
    let mut plans = Vec::new();
    let mut ego_speeds: Vec<f64> = Vec::new();
    let mut ego_entry = None;

    let mut step = 0u64;
    loop {
        let t = step as f64 * dt;
        if let Some(t_in) = ego_entry {
            if t - t_in > cfg.max_duration {
                return Err(Error::invalid(format!(
                    "ego did not leave the corridor within {} s",
                    cfg.max_duration
                )));
            }
        } else if t > ego.entry_time + cfg.max_duration {
            return Err(Error::invalid("ego could not enter the corridor"));
        }

        // Entries wait until the entrance is clear.
        while let Some(&(t_arr, id, speed, is_ego)) = pending.peek() {
            if t_arr > t + 1e-9 {
                break;
            }
            let (v_in, clear) = match vehicles.last() {
                Some(last) => {
                    let v_in = speed.min(last.v.max(0.0) + 2.0);
                    (v_in, last.x >= idm.desired_gap(v_in, v_in - last.v) + 5.0)
                }
                None => (speed, true),
            };
            if !clear {
                break;
            }
            pending.next();
            vehicles.push(Vehicle {
                id,
                x: 0.0,
                v: v_in,
                v_des: if is_ego { v_lim } else { speed.clamp(1.0, v_lim) },
                ego: is_ego,
                red_commit: None,
            });
            if is_ego {
                ego_entry = Some(t);
                ego_speeds.push(v_in);
            }
        }

        // Accelerations from the state at t.
        let mut accels = vec![0.0; vehicles.len()];
        for i in 0..vehicles.len() {
            let leader = (i > 0).then(|| (vehicles[i - 1].x - vehicles[i].x, vehicles[i - 1].v));
            let is_eco_ego = vehicles[i].ego && matches!(driver, Driver::Eco { .. });
            let red = red_obstacle(corridor, &mut vehicles[i], t, idm, is_eco_ego);
            let nearest = match (leader, red) {
                (Some(l), Some(r)) => Some(if l.0 <= r.0 { l } else { r }),
                (l, r) => l.or(r),
            };
            let veh = &vehicles[i];
            let a_idm = idm.accel(veh.v, veh.v_des, nearest);

            accels[i] = match driver {
                Driver::Eco { limits, queue } if veh.ego => {
                    let j = corridor.next_intersection(veh.x);
                    if let Some(j) = j {
                        let inter = &corridor.intersections[j];
                        let d = inter.stop_bar_position - veh.x;
                        let due = eco.planned_through.is_none_or(|p| p < j);
                        if due && d <= cfg.comm_range {
                            eco.planned_through = Some(j);
                            let bsms = bsm_snapshot(&vehicles, veh.x, inter.stop_bar_position, t);
                            let forecast = predict_queue(inter, &bsms, t, queue);
                            let window = green_window(&forecast, &inter.signal, t);
                            let h = inter.saturation_headway();
                            match plan_trajectory(&window, veh.v, d, v_lim, h, t, limits) {
                                Ok(plan) => {
                                    plans.push(PlanRecord {
                                        intersection: inter.id,
                                        time: t,
                                        window: Some(window),
                                        strategy: Some(plan.strategy),
                                    });
                                    eco.active = Some((j, plan));
                                }
                                Err(_) => {
                                    plans.push(PlanRecord {
                                        intersection: inter.id,
                                        time: t,
                                        window: Some(window),
                                        strategy: None,
                                    });
                                    eco.active = None;
                                }
                            }
                        }
                    }
                    match &eco.active {
                        Some((k, plan)) if Some(*k) == j => {
                            // Plan feed-forward with proportional correction, plus the
                            // IDM interaction term so leaders and red lights still push back.
                            let a_ff = (plan.speed_at(t + dt) - plan.speed_at(t)) / dt;
                            let a_track = a_ff + PLAN_TRACKING_GAIN * (plan.speed_at(t) - veh.v);
                            let a_interaction = a_idm - idm.accel(veh.v, veh.v_des, None);
                            (a_track + a_interaction).clamp(-idm.max_decel, limits.a_max)
                        }
                        _ => {
                            eco.active = None;
                            a_idm
                        }
                    }
                }
                _ => a_idm,
            };
        }

        // Integrate; positions use the trapezoid rule like `Trajectory`.
        for (veh, a) in vehicles.iter_mut().zip(&accels) {
            let v1 = (veh.v + a * dt).max(0.0);
            veh.x += 0.5 * dt * (veh.v + v1);
            veh.v = v1;
        }
        // No overtaking in a single lane.
        for i in 1..vehicles.len() {
            let limit = vehicles[i - 1].x - 0.5;
            if vehicles[i].x > limit {
                vehicles[i].x = limit;
                vehicles[i].v = vehicles[i].v.min(vehicles[i - 1].v);
            }
        }

        if let Some(e) = vehicles.iter().find(|v| v.ego) {
            ego_speeds.push(e.v);
            if e.x >= corridor.length {
                break;
            }
        }
        vehicles.retain(|v| v.x < corridor.length || v.ego);
        step += 1;
    }

    let entry_time = ego_entry.expect("ego entered");
    Ok(EgoTrace {
        trajectory: Trajectory::from_speeds(dt, ego_speeds, 0.0),
        entry_time,
        plans,
    })
}

/// Per-second driveline power: the mean over each second of the interval
/// powers at midpoint speed, with braking beyond `regen_limit` left to the
/// friction brakes.
pub fn traction_series(traj: &Trajectory, veh: &VehicleParams, regen_limit: f64) -> Vec<f64> {
    let per = (1.0 / traj.dt).round().max(1.0) as usize;
    if traj.len() < 2 {
        return Vec::new();
    }
    let intervals = traj.len() - 1;
    (0..intervals.div_ceil(per))
        .map(|k| {
            let lo = k * per;
            let hi = ((k + 1) * per).min(intervals);
            let sum: f64 = (lo..hi)
                .map(|i| {
                    let (v0, v1) = (traj.speed[i], traj.speed[i + 1]);
                    traction_power(0.5 * (v0 + v1), (v1 - v0) / traj.dt, veh).max(-regen_limit)
                })
                .sum();
            sum / (hi - lo) as f64
        })
        .collect()
}
