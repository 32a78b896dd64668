//! Signalized-corridor traffic: signal timing, connected-vehicle BSM records,
//! shockwave-based queue forecasting and the green window derived from it.
//!
//! Queue dynamics use kinematic-wave (LWR) interface speeds over a triangular
//! fundamental diagram. Each queued vehicle is given a constant-deceleration
//! stop and a constant-acceleration launch; the wave fronts `w0..w3` are then
//! fitted through those per-vehicle stop/launch/departure events.

mod bsm;

pub use bsm::{read_bsm_csv, write_bsm_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-time signal plan. Green phases are `[k·cycle + green_start,
/// k·cycle + green_start + green_duration]` for every integer `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub cycle_length: f64,
    pub green_start: f64,
    pub green_duration: f64,
}

impl SignalTiming {
    pub fn new(cycle_length: f64, green_start: f64, green_duration: f64) -> Result<Self> {
        let s = Self {
            cycle_length,
            green_start,
            green_duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cycle_length > 0.0) {
            return Err(Error::invalid("cycle_length must be positive"));
        }
        if !(0.0 <= self.green_start && self.green_start < self.cycle_length) {
            return Err(Error::invalid("green_start must lie in [0, cycle_length)"));
        }
        if !(self.green_duration > 0.0 && self.green_duration <= self.cycle_length) {
            return Err(Error::invalid("green_duration must lie in (0, cycle_length]"));
        }
        Ok(())
    }

    /// Index of the last green starting at or before `t`. Times within
    /// rounding of a green start count as that start.
    fn phase_index(&self, t: f64) -> f64 {
        let x = (t - self.green_start) / self.cycle_length;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r
        } else {
            x.floor()
        }
    }

    /// The green phase containing `t` (closed interval), or the next one.
    pub fn green_at_or_after(&self, t: f64) -> (f64, f64) {
        let k = self.phase_index(t);
        let start = k * self.cycle_length + self.green_start;
        let end = start + self.green_duration;
        if t <= end {
            (start, end)
        } else {
            (start + self.cycle_length, end + self.cycle_length)
        }
    }

    /// The first green phase starting strictly after the one containing `t`.
    pub fn following_green(&self, t: f64) -> (f64, f64) {
        let start = (self.phase_index(t) + 1.0) * self.cycle_length + self.green_start;
        (start, start + self.green_duration)
    }

    pub fn is_green(&self, t: f64) -> bool {
        let start = self.phase_index(t) * self.cycle_length + self.green_start;
        t < start + self.green_duration
    }
}

/// A signalized intersection with its triangular fundamental diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: u32,
    pub stop_bar_position: f64,
    pub signal: SignalTiming,
    pub saturation_flow: f64,
    pub jam_density: f64,
    pub free_flow_speed: f64,
}

impl Intersection {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        if !(self.stop_bar_position >= 0.0) {
            return Err(Error::invalid("stop_bar_position must be non-negative"));
        }
        if !(self.saturation_flow > 0.0 && self.jam_density > 0.0 && self.free_flow_speed > 0.0) {
            return Err(Error::invalid(
                "saturation_flow, jam_density and free_flow_speed must be positive",
            ));
        }
        if self.saturation_flow / self.free_flow_speed >= self.jam_density {
            return Err(Error::invalid("critical density must be below jam density"));
        }
        Ok(())
    }

    /// Saturation headway `1 / saturation_flow`, seconds.
    pub fn saturation_headway(&self) -> f64 {
        1.0 / self.saturation_flow
    }

    /// Spacing of stopped vehicles `1 / jam_density`, meters.
    pub fn jam_spacing(&self) -> f64 {
        1.0 / self.jam_density
    }

    pub fn critical_density(&self) -> f64 {
        self.saturation_flow / self.free_flow_speed
    }
}

/// Basic safety message: one position/speed report from a connected vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmRecord {
    pub vehicle_id: u32,
    pub time: f64,
    pub position: f64,
    pub speed: f64,
}

/// Stop and launch kinematics applied to each queued vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueKinematics {
    /// Constant stopping deceleration, m/s² (positive number).
    pub decel: f64,
    /// Constant launch acceleration, m/s².
    pub accel: f64,
    /// Launch reaction delay per queue position, s.
    pub launch_reaction: f64,
    /// Prediction sample period, s.
    pub sample_period: f64,
    /// Speeds at or below this are treated as stopped, m/s.
    pub stopped_speed: f64,
}

impl Default for QueueKinematics {
    fn default() -> Self {
        Self {
            decel: 2.5,
            accel: 2.0,
            launch_reaction: 1.0,
            sample_period: 0.1,
            stopped_speed: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueForecast {
    pub t0: f64,
    /// Maximum queue reached (the tail vehicle stops).
    pub t1: f64,
    /// The tail vehicle launches.
    pub t2: f64,
    /// The last approaching vehicle crosses the stop bar; the queue is clear.
    pub t3: f64,
    pub q_max: f64,
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenWindow {
    pub earliest: f64,
    pub latest: f64,
}

impl GreenWindow {
    pub fn contains(&self, t: f64) -> bool {
        self.earliest <= t && t <= self.latest
    }

    pub fn width(&self) -> f64 {
        self.latest - self.earliest
    }
}

/// Speed of the interface between traffic states `a` and `b`.
pub fn shockwave_speed(flow_a: f64, density_a: f64, flow_b: f64, density_b: f64) -> Result<f64> {
    let dk = density_b - density_a;
    if dk == 0.0 {
        return Err(Error::DegenerateShockwave { density: density_a });
    }
    Ok((flow_b - flow_a) / dk)
}

/// Time to cover `distance` from rest at constant `accel`, capped at `v_max`.
pub(crate) fn launch_travel_time(distance: f64, accel: f64, v_max: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let d_acc = v_max * v_max / (2.0 * accel);
    if distance <= d_acc {
        (2.0 * distance / accel).sqrt()
    } else {
        v_max / accel + (distance - d_acc) / v_max
    }
}

/// Time for a vehicle cruising at `speed` to come to rest exactly `distance`
/// ahead, braking at `decel` (harder if the distance is too short).
fn stopping_time(distance: f64, speed: f64, decel: f64) -> f64 {
    if distance <= 0.0 || speed <= 0.0 {
        return 0.0;
    }
    let brake_dist = speed * speed / (2.0 * decel);
    if distance >= brake_dist {
        (distance - brake_dist) / speed + speed / decel
    } else {
        2.0 * distance / speed
    }
}

/// Per-vehicle outcome of the queue projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedVehicle {
    pub vehicle_id: u32,
    pub queued: bool,
    pub stop_position: f64,
    pub stop_time: f64,
    pub launch_time: f64,
    pub crossing_time: f64,
    /// Start of the green phase that discharges this vehicle (NaN if not queued).
    pub serving_green: f64,
}

/// Project every approaching vehicle to its stop-bar crossing.
///
/// `bsms` are the latest records of the vehicles between the planning vehicle
/// and the stop bar. A vehicle stops iff it would reach the stop bar in red,
/// or less than one saturation headway behind a queued vehicle. Catching up
/// with a vehicle that passes freely, it follows one headway back (and stops
/// only if that pushes it into red).
pub fn project_vehicles(
    intersection: &Intersection,
    bsms: &[BsmRecord],
    t0: f64,
    kin: &QueueKinematics,
) -> Vec<ProjectedVehicle> {
    let x_bar = intersection.stop_bar_position;
    let spacing = intersection.jam_spacing();
    let headway = intersection.saturation_headway();
    let v_f = intersection.free_flow_speed;

    let mut ahead: Vec<&BsmRecord> = bsms.iter().filter(|b| b.position <= x_bar).collect();
    ahead.sort_by(|a, b| {
        b.position
            .total_cmp(&a.position)
            .then(a.vehicle_id.cmp(&b.vehicle_id))
    });

    let mut out = Vec::with_capacity(ahead.len());
    let mut queue_len = 0usize;
    // Queue positions already discharged by earlier greens.
    let mut served = 0usize;
    let mut last_stop_pos = f64::NAN;
    let mut serving_green = f64::NAN;
    let mut prev_cross = f64::NEG_INFINITY;
    let mut prev_launch = f64::NEG_INFINITY;
    let mut prev_queued = false;

    for rec in ahead {
        let stopped = rec.speed <= kin.stopped_speed;
        let t_free = if stopped {
            f64::INFINITY
        } else {
            t0 + (x_bar - rec.position) / rec.speed
        };
        // Behind a moving vehicle it closes up to one headway and follows.
        let blocked = t_free < prev_cross + headway;
        let follow = t_free.max(prev_cross + headway);
        let joins_queue = stopped || (blocked && prev_queued) || !intersection.signal.is_green(follow);

        if !joins_queue {
            let crossing = follow;
            prev_cross = crossing;
            prev_queued = false;
            out.push(ProjectedVehicle {
                vehicle_id: rec.vehicle_id,
                queued: false,
                stop_position: f64::NAN,
                stop_time: f64::NAN,
                launch_time: f64::NAN,
                crossing_time: crossing,
                serving_green: f64::NAN,
            });
            continue;
        }

        let stop_at = |target: f64| {
            if stopped {
                (rec.position, t0)
            } else {
                let pos = target.max(rec.position);
                (pos, t0 + stopping_time(pos - rec.position, rec.speed, kin.decel))
            }
        };
        let (mut stop_position, mut stop_time) = stop_at(if queue_len == 0 {
            x_bar
        } else {
            last_stop_pos - spacing
        });
        if queue_len > 0 && prev_cross <= stop_time {
            // The queue ahead has discharged before this vehicle stops.
            queue_len = 0;
            served = 0;
            prev_launch = f64::NEG_INFINITY;
            (stop_position, stop_time) = stop_at(x_bar);
        }
        if queue_len == 0 {
            serving_green = intersection.signal.green_at_or_after(stop_time).0;
        }
        let mut travel = launch_travel_time(x_bar - stop_position, kin.accel, v_f);
        // No overtaking: nobody launches before the vehicle ahead has.
        let launch_at = |g: f64, idx: usize| {
            (g + (idx + 1) as f64 * kin.launch_reaction)
                .max(stop_time)
                .max(t0)
                .max(prev_launch + kin.launch_reaction)
        };
        // Nor crosses less than one headway behind it.
        let cross_at = |launch: f64, travel: f64| (launch + travel).max(prev_cross + headway);
        let mut launch_time = launch_at(serving_green, queue_len - served);
        let mut crossing_time = cross_at(launch_time, travel);
        let (_, g_end) = intersection.signal.green_at_or_after(serving_green);
        if crossing_time > g_end {
            // Misses this green; waits at its stop position for the next one.
            served = queue_len;
            serving_green = intersection.signal.following_green(serving_green).0;
            launch_time = launch_at(serving_green, 0);
            crossing_time = cross_at(launch_time, travel);
            let (_, g_end) = intersection.signal.green_at_or_after(serving_green);
            if crossing_time > g_end {
                // Too far back to clear within any one green: it rolls up to
                // the stop bar and leaves as the head of the following green.
                serving_green = intersection.signal.following_green(serving_green).0;
                stop_position = x_bar;
                travel = 0.0;
                launch_time = launch_at(serving_green, 0);
                crossing_time = cross_at(launch_time, travel);
            }
        }

        queue_len += 1;
        last_stop_pos = stop_position;
        prev_cross = crossing_time;
        prev_launch = launch_time;
        prev_queued = true;
        out.push(ProjectedVehicle {
            vehicle_id: rec.vehicle_id,
            queued: true,
            stop_position,
            stop_time,
            launch_time,
            crossing_time,
            serving_green,
        });
    }
    out
}

/// Forecast the queue the planning vehicle will meet at `intersection`.
pub fn predict_queue(
    intersection: &Intersection,
    bsms: &[BsmRecord],
    t0: f64,
    kin: &QueueKinematics,
) -> QueueForecast {
    let x_bar = intersection.stop_bar_position;
    let k_jam = intersection.jam_density;
    let headway = intersection.saturation_headway();
    let signal = &intersection.signal;

    let projected = project_vehicles(intersection, bsms, t0, kin);
    let queued: Vec<&ProjectedVehicle> = projected.iter().filter(|p| p.queued).collect();

    // Arrival state of the still-moving approach for the LWR queuing wave.
    let moving: Vec<&BsmRecord> = bsms
        .iter()
        .filter(|b| b.position <= x_bar && b.speed > kin.stopped_speed)
        .collect();
    let n_stopped_now = bsms
        .iter()
        .filter(|b| b.position <= x_bar && b.speed <= kin.stopped_speed)
        .count();
    let discharge = shockwave_speed(0.0, k_jam, intersection.saturation_flow, intersection.critical_density())
        .unwrap_or(0.0);

    let w0 = if !moving.is_empty() && n_stopped_now > 0 {
        let x_min = moving.iter().map(|b| b.position).fold(f64::INFINITY, f64::min);
        let k_a = (moving.len() as f64 / (x_bar - x_min).max(intersection.jam_spacing())).min(k_jam * 0.999);
        let v_mean = moving.iter().map(|b| b.speed).sum::<f64>() / moving.len() as f64;
        shockwave_speed(k_a * v_mean, k_a, 0.0, k_jam).unwrap_or(0.0)
    } else {
        0.0
    };

    if projected.is_empty() {
        let (g_start, g_end) = signal.green_at_or_after(t0);
        let t3 = if g_start <= t0 && t0 + headway <= g_end {
            t0
        } else if g_start <= t0 {
            signal.following_green(t0).0
        } else {
            g_start
        };
        return QueueForecast {
            t0,
            t1: t0,
            t2: t0,
            t3,
            q_max: 0.0,
            w0,
            w1: w0,
            w2: discharge,
            w3: intersection.free_flow_speed,
        };
    }

    let t3 = projected
        .iter()
        .map(|p| p.crossing_time)
        .fold(t0, f64::max);

    let Some(last) = queued.last() else {
        return QueueForecast {
            t0,
            t1: t0,
            t2: t0,
            t3,
            q_max: 0.0,
            w0,
            w1: w0,
            w2: discharge,
            w3: intersection.free_flow_speed,
        };
    };

    let serving_green = last.serving_green;
    let t2 = last.launch_time;
    let t1 = last.stop_time.max(t0).min(t2);
    let q_max = x_bar - last.stop_position + intersection.jam_spacing();

    let tail_now = bsms
        .iter()
        .filter(|b| b.position <= x_bar && b.speed <= kin.stopped_speed)
        .map(|b| b.position)
        .fold(x_bar, f64::min);
    let w1 = if t1 > t0 {
        (last.stop_position - tail_now).min(0.0) / (t1 - t0)
    } else {
        w0
    };
    let w2 = if t2 > serving_green && last.stop_position < x_bar {
        (last.stop_position - x_bar) / (t2 - serving_green)
    } else {
        discharge
    };
    let w3 = if last.crossing_time > t2 && last.stop_position < x_bar {
        (x_bar - last.stop_position) / (last.crossing_time - t2)
    } else {
        intersection.free_flow_speed
    };

    QueueForecast {
        t0,
        t1,
        t2,
        t3,
        q_max,
        w0,
        w1,
        w2,
        w3,
    }
}

/// Passage interval for the planning vehicle: from queue clearance `t3` to the
/// end of the green phase serving it. A `t3` past the end of its green rolls
/// over to the next cycle's green.
pub fn green_window(forecast: &QueueForecast, signal: &SignalTiming, t0: f64) -> GreenWindow {
    let t3 = forecast.t3.max(t0);
    let (start, end) = signal.green_at_or_after(t3);
    GreenWindow {
        earliest: t3.max(start),
        latest: end,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intersection(signal: SignalTiming) -> Intersection {
        Intersection {
            id: 1,
            stop_bar_position: 500.0,
            signal,
            saturation_flow: 0.5,
            jam_density: 0.15,
            free_flow_speed: 15.0,
        }
    }

    #[test]
    fn lwr_interface_speeds() {
        let w = shockwave_speed(0.5, 0.02, 0.0, 0.15).unwrap();
        assert!((w - (-0.5 / 0.13)).abs() < 1e-12);
        assert!((w + 3.846).abs() < 1e-3);

        let w = shockwave_speed(0.0, 0.15, 0.5, 0.06).unwrap();
        assert!((w + 5.556).abs() < 1e-3);

        assert!(matches!(
            shockwave_speed(0.5, 0.02, 0.26, 0.02),
            Err(Error::DegenerateShockwave { .. })
        ));
    }

    #[test]
    fn signal_phase_arithmetic() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        assert_eq!(s.green_at_or_after(112.0), (100.0, 130.0));
        assert_eq!(s.green_at_or_after(131.0), (190.0, 220.0));
        assert_eq!(s.green_at_or_after(5.0), (10.0, 40.0));
        assert!(s.is_green(100.0));
        assert!(!s.is_green(130.0));
        assert!(!s.is_green(150.0));
        assert_eq!(s.following_green(112.0), (190.0, 220.0));
        assert!(SignalTiming::new(90.0, 90.0, 30.0).is_err());
        assert!(SignalTiming::new(90.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn window_clamps_inside_green() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let f = QueueForecast {
            t0: 95.0,
            t1: 95.0,
            t2: 101.0,
            t3: 112.0,
            q_max: 20.0,
            w0: 0.0,
            w1: 0.0,
            w2: 0.0,
            w3: 0.0,
        };
        let w = green_window(&f, &s, 95.0);
        assert_eq!((w.earliest, w.latest), (112.0, 130.0));
    }

    #[test]
    fn window_rolls_to_next_cycle() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let f = QueueForecast {
            t0: 95.0,
            t1: 95.0,
            t2: 120.0,
            t3: 131.0,
            q_max: 80.0,
            w0: 0.0,
            w1: 0.0,
            w2: 0.0,
            w3: 0.0,
        };
        let w = green_window(&f, &s, 95.0);
        assert_eq!((w.earliest, w.latest), (190.0, 220.0));
    }

    #[test]
    fn empty_queue_during_green() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let x = intersection(s);
        let f = predict_queue(&x, &[], 105.0, &QueueKinematics::default());
        assert_eq!(f.t3, 105.0);
        assert_eq!(f.q_max, 0.0);
        let w = green_window(&f, &s, 105.0);
        assert_eq!((w.earliest, w.latest), (105.0, 130.0));
    }

    #[test]
    fn empty_queue_during_red_waits_for_green() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let x = intersection(s);
        let f = predict_queue(&x, &[], 150.0, &QueueKinematics::default());
        assert_eq!(f.t3, 190.0);
        // Green but fewer than h seconds left.
        let f = predict_queue(&x, &[], 129.0, &QueueKinematics::default());
        assert_eq!(f.t3, 190.0);
    }

    #[test]
    fn single_stopped_vehicle_at_stop_bar() {
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let x = intersection(s);
        let kin = QueueKinematics::default();
        let bsm = BsmRecord {
            vehicle_id: 7,
            time: 60.0,
            position: 500.0,
            speed: 0.0,
        };
        let f = predict_queue(&x, &[bsm], 60.0, &kin);
        assert!((f.t3 - (100.0 + kin.launch_reaction)).abs() < 1e-6);
        assert!((f.q_max - x.jam_spacing()).abs() < 1e-6);
        assert!(f.t0 <= f.t1 && f.t1 <= f.t2 && f.t2 <= f.t3);
    }

    #[test]
    fn late_arrival_waits_for_its_own_green() {
        // Green [100, 130]; the second vehicle stops in the following red.
        let s = SignalTiming::new(90.0, 10.0, 30.0).unwrap();
        let x = intersection(s);
        let kin = QueueKinematics::default();
        let bsms = [
            BsmRecord {
                vehicle_id: 1,
                time: 50.0,
                position: 500.0,
                speed: 0.0,
            },
            BsmRecord {
                vehicle_id: 2,
                time: 50.0,
                position: 0.0,
                speed: 5.0,
            },
        ];
        let p = project_vehicles(&x, &bsms, 50.0, &kin);
        assert!((p[0].crossing_time - 101.0).abs() < 1e-9);
        assert!(p[1].queued);
        assert_eq!(p[1].stop_position, 500.0);
        assert_eq!(p[1].serving_green, 190.0);
        assert!(p[1].crossing_time >= 190.0);
    }

    #[test]
    fn queue_longer_than_green_spills_to_next_cycle() {
        // Green [100, 105]: the third vehicle cannot launch and clear in time.
        let s = SignalTiming::new(90.0, 10.0, 5.0).unwrap();
        let x = intersection(s);
        let kin = QueueKinematics::default();
        let bsms: Vec<BsmRecord> = (0..3)
            .map(|i| BsmRecord {
                vehicle_id: i,
                time: 50.0,
                position: 500.0 - i as f64 * x.jam_spacing(),
                speed: 0.0,
            })
            .collect();
        let p = project_vehicles(&x, &bsms, 50.0, &kin);
        assert!(p[1].crossing_time <= 105.0);
        assert_eq!(p[2].serving_green, 190.0);
        assert!((p[2].launch_time - 191.0).abs() < 1e-9);
        let f = predict_queue(&x, &bsms, 50.0, &kin);
        assert!(f.t3 > 190.0);
    }

    #[test]
    fn free_vehicle_in_green_does_not_queue() {
        let s = SignalTiming::new(90.0, 0.0, 60.0).unwrap();
        let x = intersection(s);
        let bsm = BsmRecord {
            vehicle_id: 1,
            time: 0.0,
            position: 400.0,
            speed: 10.0,
        };
        let f = predict_queue(&x, &[bsm], 0.0, &QueueKinematics::default());
        assert_eq!(f.q_max, 0.0);
        assert!((f.t3 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn queuing_waves_point_upstream() {
        let s = SignalTiming::new(90.0, 50.0, 30.0).unwrap();
        let x = intersection(s);
        let bsms = [
            BsmRecord { vehicle_id: 1, time: 10.0, position: 499.0, speed: 0.0 },
            BsmRecord { vehicle_id: 2, time: 10.0, position: 380.0, speed: 12.0 },
            BsmRecord { vehicle_id: 3, time: 10.0, position: 300.0, speed: 13.0 },
        ];
        let f = predict_queue(&x, &bsms, 10.0, &QueueKinematics::default());
        assert!(f.w0 <= 0.0 && f.w1 <= 0.0);
        assert!(f.w2 <= 0.0 && f.w3 >= 0.0);
        assert!(f.t0 <= f.t1 && f.t1 <= f.t2 && f.t2 <= f.t3);
        assert!((f.q_max - 3.0 * x.jam_spacing()).abs() < 1.0 + 1e-9);
    }
}
