//! Stage I: eco-driving speed trajectory to the next stop bar.
//!
//! The approach profile is a three-segment trigonometric curve: a cosine blend
//! from the initial speed up to the average speed `v_p` (reached at `t_p`), a
//! second cosine quarter-period that flattens the acceleration to zero at
//! `t_q`, and a constant cruise until arrival.
//!
//! Segment boundaries follow from continuity: `t_p = π/(2m)` zeroes the first
//! cosine, `t_q = t_p + π/(2n)` brings the second one to its extremum. `n` is
//! then the root of the distance condition (the profile must cover `d_stop`
//! in `t_arr`), taking the larger root so the cruise segment starts as early
//! as possible.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::GreenWindow;

/// Sample period of planned trajectories, s.
pub const PLAN_DT: f64 = 0.1;

/// Minimum cruise speed as a fraction of the speed limit.
pub const MIN_CRUISE_FRACTION: f64 = 0.7;

/// Stop strategies halt this far ahead of the stop bar, m.
pub const STOP_BAR_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicLimits {
    pub a_max: f64,
    /// Maximum deceleration as a negative acceleration, m/s².
    pub a_min: f64,
    pub jerk_max: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            a_max: 2.5,
            a_min: -3.0,
            jerk_max: 2.0,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_max > 0.0 && self.a_min < 0.0 && self.jerk_max > 0.0) {
            return Err(Error::invalid("kinematic limits need a_max > 0, a_min < 0, jerk_max > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub v0: f64,
    pub d_stop: f64,
    pub t_arr: f64,
    pub h: f64,
    pub m: f64,
    pub n: f64,
    pub t_p: f64,
    pub t_q: f64,
}

impl ProfileParams {
    /// Parameters before calibration: only the boundary conditions are set.
    pub fn uncalibrated(v0: f64, d_stop: f64, t_arr: f64, h: f64) -> Self {
        Self {
            v0,
            d_stop,
            t_arr,
            h,
            m: 1.0,
            n: 1.0,
            t_p: 0.0,
            t_q: 0.0,
        }
    }

    pub fn calibrated(v0: f64, d_stop: f64, t_arr: f64, h: f64, limits: &KinematicLimits) -> Result<Self> {
        let mut p = Self::uncalibrated(v0, d_stop, t_arr, h);
        let (m, n, t_p, t_q) = calibrate_mn(&p, limits.a_max, limits.a_min, limits.jerk_max)?;
        p.m = m;
        p.n = n;
        p.t_p = t_p;
        p.t_q = t_q;
        Ok(p)
    }

    /// Average speed `d_stop / t_arr`.
    pub fn v_p(&self) -> f64 {
        self.d_stop / self.t_arr
    }

    /// Speed change amplitude `v_p − v0`.
    pub fn v_r(&self) -> f64 {
        self.v_p() - self.v0
    }

    pub fn cruise_speed(&self) -> f64 {
        self.v_p() + self.v_r() * self.m / self.n
    }
}

/// Speed of the trigonometric profile at `t` seconds after planning.
pub fn trig_speed(t: f64, p: &ProfileParams) -> Result<f64> {
    if !(0.0..=p.t_arr).contains(&t) {
        return Err(Error::OutOfDomain { t, t_end: p.t_arr });
    }
    let v_p = p.v_p();
    let v_r = p.v_r();
    let v = if t < p.t_p {
        // v_p − v_r·cos(m t), written so that t = 0 returns v0 exactly.
        p.v0 + v_r * (1.0 - (p.m * t).cos())
    } else if t < p.t_q {
        v_p - v_r * (p.m / p.n) * (p.n * (t + PI / (2.0 * p.n) - p.t_p)).cos()
    } else {
        v_p + v_r * p.m / p.n
    };
    Ok(v)
}

/// Choose `(m, n, t_p, t_q)` for the boundary conditions in `p`.
///
/// `m` is the largest value keeping the first-segment peak acceleration
/// `|v_r|·m` within the acceleration (or deceleration) limit and the initial
/// jerk `|v_r|·m²` within `jerk_max`. `n` then solves the distance condition
/// `n²/m² − n·(t_arr − t_p) + (π/2 − 1) = 0`.
pub fn calibrate_mn(p: &ProfileParams, a_max: f64, a_min: f64, jerk_max: f64) -> Result<(f64, f64, f64, f64)> {
    if !(a_max > 0.0 && a_min < 0.0 && jerk_max > 0.0) {
        return Err(Error::invalid("calibration needs a_max > 0, a_min < 0, jerk_max > 0"));
    }
    if !(p.d_stop > 0.0 && p.t_arr > 0.0 && p.v0 >= 0.0) {
        return Err(Error::invalid("profile needs d_stop > 0, t_arr > 0, v0 >= 0"));
    }
    let v_r = p.v_r();
    let amp = v_r.abs();
    if amp < 1e-12 {
        return Ok((1.0, 1.0, 0.0, 0.0));
    }
    let accel_limit = if v_r > 0.0 { a_max } else { -a_min };
    let m = (accel_limit / amp).min((jerk_max / amp).sqrt());
    let t_p = FRAC_PI_2 / m;
    let rest = p.t_arr - t_p;
    if rest <= 0.0 {
        return Err(Error::InfeasibleProfile(format!(
            "first segment ({t_p:.3} s) does not fit in t_arr = {:.3} s",
            p.t_arr
        )));
    }
    let disc = rest * rest - 4.0 * (FRAC_PI_2 - 1.0) / (m * m);
    if disc < 0.0 {
        return Err(Error::InfeasibleProfile(format!(
            "no cruise segment reconciles d_stop = {:.2} m with t_arr = {:.2} s",
            p.d_stop, p.t_arr
        )));
    }
    let n = (rest + disc.sqrt()) * m * m / 2.0;
    let t_q = t_p + FRAC_PI_2 / n;
    if t_q > p.t_arr + 1e-9 {
        return Err(Error::InfeasibleProfile(format!(
            "second segment ends at {t_q:.3} s, after arrival at {:.3} s",
            p.t_arr
        )));
    }
    let cruise = p.v_p() + v_r * m / n;
    if cruise < 0.0 {
        return Err(Error::InfeasibleProfile(format!("negative cruise speed {cruise:.3} m/s")));
    }
    Ok((m, n, t_p, t_q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SlowDown,
    SpeedUp,
    Cruise,
    Stop,
}

/// Pick the approach strategy for arriving inside `window`.
///
/// Candidate constant speeds must stay within `[0.7·speed_limit, speed_limit]`;
/// when none lands inside the window the vehicle stops.
pub fn select_strategy(window: &GreenWindow, v0: f64, d_stop: f64, speed_limit: f64, t_now: f64) -> StrategyKind {
    let v_min = MIN_CRUISE_FRACTION * speed_limit;
    let eps = 1e-9;
    if window.latest <= t_now || window.earliest > window.latest {
        return StrategyKind::Stop;
    }
    if v0 > 0.0 && v0 >= v_min - eps && v0 <= speed_limit + eps && window.contains(t_now + d_stop / v0) {
        return StrategyKind::Cruise;
    }
    let v_lo = d_stop / (window.latest - t_now);
    let v_hi = if window.earliest > t_now {
        d_stop / (window.earliest - t_now)
    } else {
        f64::INFINITY
    };

    let up_lo = v_lo.max(v0).max(v_min);
    let up_hi = v_hi.min(speed_limit);
    if up_lo <= up_hi + eps && up_hi > v0 {
        return StrategyKind::SpeedUp;
    }
    let down_lo = v_lo.max(v_min);
    let down_hi = v_hi.min(v0).min(speed_limit);
    if down_lo <= down_hi + eps {
        return StrategyKind::SlowDown;
    }
    StrategyKind::Stop
}

/// Uniformly sampled speed trace with derived position and acceleration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub speed: Vec<f64>,
    pub position: Vec<f64>,
    pub accel: Vec<f64>,
}

impl Trajectory {
    /// Build from speed samples; position starts at `x0` and is the cumulative
    /// trapezoidal integral, acceleration the forward difference (last = 0).
    pub fn from_speeds(dt: f64, speed: Vec<f64>, x0: f64) -> Self {
        let mut position = Vec::with_capacity(speed.len());
        let mut accel = Vec::with_capacity(speed.len());
        let mut x = x0;
        for (i, &v) in speed.iter().enumerate() {
            if i > 0 {
                x += 0.5 * dt * (speed[i - 1] + v);
            }
            position.push(x);
            accel.push(speed.get(i + 1).map_or(0.0, |next| (next - v) / dt));
        }
        Self {
            dt,
            speed,
            position,
            accel,
        }
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len().saturating_sub(1) as f64
    }

    pub fn distance(&self) -> f64 {
        match (self.position.first(), self.position.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Time (relative to the first sample) at which `position` reaches `x`,
    /// interpolated linearly between samples.
    pub fn time_at_position(&self, x: f64) -> Option<f64> {
        let i = self.position.iter().position(|&p| p >= x)?;
        if i == 0 {
            return Some(0.0);
        }
        let (p0, p1) = (self.position[i - 1], self.position[i]);
        let frac = if p1 > p0 { (x - p0) / (p1 - p0) } else { 1.0 };
        Some(self.dt * ((i - 1) as f64 + frac))
    }

    /// Mean speed over each whole `period` (e.g. 1 s), plus a trailing partial period.
    pub fn resample_mean_speed(&self, period: f64) -> Vec<f64> {
        let per = (period / self.dt).round().max(1.0) as usize;
        if self.len() < 2 {
            return self.speed.clone();
        }
        let intervals = self.len() - 1;
        (0..intervals.div_ceil(per))
            .map(|k| {
                let lo = k * per;
                let hi = ((k + 1) * per).min(intervals);
                let sum: f64 = (lo..hi).map(|i| 0.5 * (self.speed[i] + self.speed[i + 1])).sum();
                sum / (hi - lo) as f64
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.speed.len();
        if self.position.len() != n || self.accel.len() != n {
            return Err(Error::invalid("trajectory sequences differ in length"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("trajectory dt must be positive"));
        }
        if self.speed.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("trajectory contains a negative or NaN speed"));
        }
        Ok(())
    }

    /// CSV with columns `time,speed,position,accel`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "speed", "position", "accel"])?;
        for i in 0..self.len() {
            w.write_record(&[
                (i as f64 * self.dt).to_string(),
                self.speed[i].to_string(),
                self.position[i].to_string(),
                self.accel[i].to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time: f64,
            speed: f64,
            position: f64,
            accel: f64,
        }
        let mut r = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut t = Trajectory {
            dt: PLAN_DT,
            speed: Vec::new(),
            position: Vec::new(),
            accel: Vec::new(),
        };
        for row in r.deserialize::<Row>() {
            let row = row?;
            times.push(row.time);
            t.speed.push(row.speed);
            t.position.push(row.position);
            t.accel.push(row.accel);
        }
        if times.len() >= 2 {
            t.dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        }
        t.validate()?;
        Ok(t)
    }
}

/// A planned approach: chosen strategy, sampled trajectory, and arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedPlan {
    pub strategy: StrategyKind,
    pub trajectory: Trajectory,
    /// Absolute time at which the trajectory reaches the stop bar.
    pub arrival_time: f64,
    /// Trigonometric profile parameters, when the plan is a single profile.
    pub profile: Option<ProfileParams>,
    /// Absolute planning start time.
    pub t_start: f64,
}

impl SpeedPlan {
    /// Planned speed at absolute time `t`; past the end the last speed holds.
    pub fn speed_at(&self, t: f64) -> f64 {
        let rel = (t - self.t_start).max(0.0);
        if let Some(p) = &self.profile {
            if rel <= p.t_arr {
                return trig_speed(rel, p).unwrap_or(0.0).max(0.0);
            }
            return p.cruise_speed();
        }
        let tr = &self.trajectory;
        let x = rel / tr.dt;
        let i = x.floor() as usize;
        if i + 1 >= tr.len() {
            return tr.speed.last().copied().unwrap_or(0.0);
        }
        let frac = x - i as f64;
        tr.speed[i] + frac * (tr.speed[i + 1] - tr.speed[i])
    }
}

fn sample_profile(p: &ProfileParams) -> Result<Trajectory> {
    let steps = (p.t_arr / PLAN_DT).round() as usize;
    let speeds = (0..=steps)
        .map(|k| trig_speed((k as f64 * PLAN_DT).min(p.t_arr), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::from_speeds(PLAN_DT, speeds, 0.0))
}

/// Search arrival times on the sample grid in `[t_lo, t_hi]` (relative) for
/// the earliest profile whose cruise speed stays in `[v_min, v_max]`.
#[allow(clippy::too_many_arguments)]
fn search_profile(
    v0: f64,
    d_stop: f64,
    h: f64,
    t_lo: f64,
    t_hi: f64,
    v_min: f64,
    v_max: f64,
    limits: &KinematicLimits,
) -> Option<ProfileParams> {
    let k_lo = (t_lo / PLAN_DT - 1e-9).ceil().max(1.0) as usize;
    let k_hi = (t_hi / PLAN_DT + 1e-9).floor() as usize;
    (k_lo..=k_hi).find_map(|k| {
        let t_arr = k as f64 * PLAN_DT;
        let p = ProfileParams::calibrated(v0, d_stop, t_arr, h, limits).ok()?;
        let c = p.cruise_speed();
        (c >= v_min - 1e-9 && c <= v_max + 1e-9).then_some(p)
    })
}

fn plan_cruise(v0: f64, d_stop: f64, t_now: f64, arrive: &GreenWindow, v_min: f64, v_max: f64) -> Option<SpeedPlan> {
    let exact = d_stop / (v0 * PLAN_DT);
    for steps in [exact.floor(), exact.ceil()] {
        if steps < 1.0 {
            continue;
        }
        let v = d_stop / (steps * PLAN_DT);
        let arrival = t_now + steps * PLAN_DT;
        if v < v_min - 1e-9 || v > v_max + 1e-9 || !arrive.contains(arrival) {
            continue;
        }
        let traj = Trajectory::from_speeds(PLAN_DT, vec![v; steps as usize + 1], 0.0);
        return Some(SpeedPlan {
            strategy: StrategyKind::Cruise,
            trajectory: traj,
            arrival_time: arrival,
            profile: None,
            t_start: t_now,
        });
    }
    None
}

/// Come to rest `STOP_BAR_MARGIN` short of the stop bar with raised-cosine
/// speed changes, idle until the window opens, then launch to the minimum
/// cruise speed.
fn plan_stop(
    window: &GreenWindow,
    v0: f64,
    d_stop: f64,
    speed_limit: f64,
    t_now: f64,
    limits: &KinematicLimits,
) -> Result<SpeedPlan> {
    let d_brake = d_stop - STOP_BAR_MARGIN;
    if d_brake <= 0.0 && v0 > 0.0 {
        return Err(Error::InfeasibleProfile(format!(
            "stop bar {d_stop:.2} m ahead leaves no room to stop"
        )));
    }
    let v_target = MIN_CRUISE_FRACTION * speed_limit;
    // Raised-cosine change of `dv`: rate limited by peak accel and jerk.
    let omega = |dv: f64, a: f64| (2.0 * a / dv).min((2.0 * limits.jerk_max / dv).sqrt());
    let brake_len = |va: f64| {
        if va > 0.0 {
            va * PI / (2.0 * omega(va, -limits.a_min))
        } else {
            0.0
        }
    };
    let accel_len = |va: f64| {
        if va > v0 {
            0.5 * (v0 + va) * PI / omega(va - v0, limits.a_max)
        } else {
            0.0
        }
    };
    let fits = |va: f64| accel_len(va) + brake_len(va) <= d_brake;

    // Speed up toward the minimum cruise speed when slower than it and there
    // is room, then decelerate to rest. Too close for that: one deceleration
    // across the whole distance.
    let phases = if v0 > 0.0 && !fits(v0) {
        let w = v0 * PI / (2.0 * d_brake);
        let peak_decel = v0 * w / 2.0;
        if peak_decel > -limits.a_min + 1e-9 {
            return Err(Error::InfeasibleProfile(format!(
                "stopping from {v0:.2} m/s within {d_brake:.2} m needs {peak_decel:.2} m/s²"
            )));
        }
        (v0, 0.0, 0.0, w)
    } else if d_brake <= 0.0 {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let va = if v0 >= v_target || fits(v_target) {
            v0.max(v_target)
        } else {
            let (mut lo, mut hi) = (v0, v_target);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if fits(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let t_acc = if va > v0 { PI / omega(va - v0, limits.a_max) } else { 0.0 };
        // Brake over the remaining distance, after just enough cruising to be
        // at rest when the window opens (never harder than the comfort limit).
        let d_rem = d_brake - accel_len(va);
        let (t_cruise, w) = if va > 0.0 {
            let gentle = t_acc + 2.0 * d_rem / va;
            let cruise_max = (d_rem - brake_len(va)).max(0.0) / va;
            let c = (gentle - (window.earliest - t_now)).clamp(0.0, cruise_max);
            (c, va * PI / (2.0 * (d_rem - va * c)))
        } else {
            (0.0, 0.0)
        };
        (va, t_acc, t_cruise, w)
    };
    let (va, t_acc, t_cruise, omega_stop) = phases;
    let t_brake = t_acc + t_cruise;
    let t_stopped = if va > 0.0 { t_brake + PI / omega_stop } else { 0.0 };

    let launch_at = (window.earliest - t_now).max(t_stopped);
    let omega_launch = omega(v_target, limits.a_max);
    let launch_len = PI / omega_launch;

    let speed_fn = |t: f64| -> f64 {
        if t < t_acc {
            v0 + 0.5 * (va - v0) * (1.0 - (PI * t / t_acc).cos())
        } else if t < t_brake {
            va
        } else if t < t_stopped {
            0.5 * va * (1.0 + (omega_stop * (t - t_brake)).cos())
        } else if t < launch_at {
            0.0
        } else if t < launch_at + launch_len {
            0.5 * v_target * (1.0 - (omega_launch * (t - launch_at)).cos())
        } else {
            v_target
        }
    };

    let mut speeds = Vec::new();
    let mut x = 0.0;
    let mut prev = v0;
    let mut k = 0usize;
    loop {
        let v = if k == 0 { v0 } else { speed_fn(k as f64 * PLAN_DT) };
        if k > 0 {
            x += 0.5 * PLAN_DT * (prev + v);
        }
        speeds.push(v);
        prev = v;
        if x >= d_stop {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            return Err(Error::InfeasibleProfile("stop profile never reaches the stop bar".into()));
        }
    }
    let traj = Trajectory::from_speeds(PLAN_DT, speeds, 0.0);
    let arrival = t_now + traj.time_at_position(d_stop).unwrap_or(traj.duration());
    Ok(SpeedPlan {
        strategy: StrategyKind::Stop,
        trajectory: traj,
        arrival_time: arrival,
        profile: None,
        t_start: t_now,
    })
}

/// Plan the approach from `d_stop` meters upstream to pass within `window`.
///
/// The vehicle targets arrival no earlier than `earliest + h` (one saturation
/// headway behind the departing queue) and no later than `latest`.
pub fn plan_trajectory(
    window: &GreenWindow,
    v0: f64,
    d_stop: f64,
    speed_limit: f64,
    h: f64,
    t_now: f64,
    limits: &KinematicLimits,
) -> Result<SpeedPlan> {
    limits.validate()?;
    if !(d_stop > 0.0 && speed_limit > 0.0 && v0 >= 0.0) {
        return Err(Error::invalid("planning needs d_stop > 0, speed_limit > 0, v0 >= 0"));
    }
    let arrive = GreenWindow {
        earliest: window.earliest + h,
        latest: window.latest,
    };
    let v_min = MIN_CRUISE_FRACTION * speed_limit;
    let strategy = select_strategy(&arrive, v0, d_stop, speed_limit, t_now);

    if strategy == StrategyKind::Cruise {
        if let Some(plan) = plan_cruise(v0, d_stop, t_now, &arrive, v_min, speed_limit) {
            return Ok(plan);
        }
    }
    if strategy != StrategyKind::Stop {
        let t_lo = if strategy == StrategyKind::SpeedUp {
            (arrive.earliest - t_now).max(d_stop / speed_limit)
        } else {
            arrive.earliest - t_now
        };
        let t_hi = arrive.latest - t_now;
        if let Some(p) = search_profile(v0, d_stop, h, t_lo.max(0.0), t_hi, v_min, speed_limit, limits) {
            let kind = if p.v_r() > 0.0 {
                StrategyKind::SpeedUp
            } else if p.v_r() < 0.0 {
                StrategyKind::SlowDown
            } else {
                StrategyKind::Cruise
            };
            let trajectory = sample_profile(&p)?;
            return Ok(SpeedPlan {
                strategy: kind,
                trajectory,
                arrival_time: t_now + p.t_arr,
                profile: Some(p),
                t_start: t_now,
            });
        }
    }
    plan_stop(window, v0, d_stop, speed_limit, t_now, limits)
}
