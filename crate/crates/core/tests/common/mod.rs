#![allow(dead_code)]

use std::path::PathBuf;

use hev_seqopt::traffic::{BsmRecord, Intersection, QueueKinematics, SignalTiming};

pub fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn green_by_hand(sig: &SignalTiming, t: f64) -> bool {
    (t - sig.green_start).rem_euclid(sig.cycle_length) < sig.green_duration
}

/// `(start, end)` of the green containing `t` (closed), else the next one.
fn green_span(sig: &SignalTiming, t: f64) -> (f64, f64) {
    let phase = (t - sig.green_start).rem_euclid(sig.cycle_length);
    let start = if phase <= sig.green_duration { t - phase } else { t - phase + sig.cycle_length };
    (start, start + sig.green_duration)
}

/// Time-stepped motion of one vehicle to rest at `target`: cruise, then brake
/// at `decel` (harder if there is not enough room). Returns `(position, time)`.
fn step_to_rest(x0: f64, v0: f64, target: f64, decel: f64, dt: f64) -> (f64, f64) {
    let room = target - x0;
    if room <= 0.0 {
        return (x0, 0.0);
    }
    let decel = decel.max(v0 * v0 / (2.0 * room));
    let (mut x, mut v, mut t) = (x0, v0, 0.0);
    while v * v / (2.0 * decel) < target - x {
        x += v * dt;
        t += dt;
    }
    while v > 0.0 {
        v = (v - decel * dt).max(0.0);
        t += dt;
    }
    (target, t)
}

/// Launch from rest at `x` at time `t`, accelerating up to `v_max`; time the
/// stop bar is reached.
fn step_to_bar(x: f64, t: f64, x_bar: f64, accel: f64, v_max: f64, dt: f64) -> f64 {
    let (mut xc, mut vc, mut tc) = (x, 0.0f64, t);
    while xc < x_bar {
        let v_next = (vc + accel * dt).min(v_max);
        let x_next = xc + 0.5 * (vc + v_next) * dt;
        if x_next >= x_bar {
            return tc + dt * (x_bar - xc) / (x_next - xc);
        }
        tc += dt;
        xc = x_next;
        vc = v_next;
    }
    tc
}

/// Per-vehicle discrete-event replay of an approach starting at t = 0: each
/// vehicle either passes (following a free vehicle ahead at one headway) or
/// stops at the queue tail, waits for its green plus one reaction time per
/// queue position, and launches. Returns
/// the time the last vehicle crosses the stop bar (for an empty approach, the
/// first instant a vehicle could pass).
pub fn queue_oracle(ix: &Intersection, bsms: &[BsmRecord], kin: &QueueKinematics) -> f64 {
    let dt = 1e-3;
    let x_bar = ix.stop_bar_position;
    let spacing = 1.0 / ix.jam_density;
    let headway = 1.0 / ix.saturation_flow;
    let sig = &ix.signal;
    let mut order: Vec<BsmRecord> = bsms.iter().filter(|b| b.position <= x_bar).copied().collect();
    order.sort_by(|a, b| b.position.total_cmp(&a.position));

    if order.is_empty() {
        let mut t = 0.0;
        loop {
            let (s, e) = green_span(sig, t);
            if s <= t && t + headway <= e {
                return t;
            }
            t = if s > t { s } else { s + sig.cycle_length };
        }
    }

    let mut last_cross = f64::NEG_INFINITY;
    let mut last_stop = f64::NAN;
    let (mut queued, mut served) = (0usize, 0usize);
    let mut serving = (f64::NAN, f64::NAN);
    let mut last_launch = f64::NEG_INFINITY;
    let mut last_queued = false;
    for b in &order {
        let moving = b.speed > kin.stopped_speed;
        let t_free = if moving { (x_bar - b.position) / b.speed } else { f64::INFINITY };
        let follow = t_free.max(last_cross + headway);
        let behind_queue = t_free < last_cross + headway && last_queued;
        if moving && !behind_queue && green_by_hand(sig, follow) {
            last_cross = follow;
            last_queued = false;
            continue;
        }
        let rest = |target: f64| {
            if moving {
                step_to_rest(b.position, b.speed, target, kin.decel, dt)
            } else {
                (b.position, 0.0)
            }
        };
        let (mut x, mut t) = rest(if queued == 0 { x_bar } else { last_stop - spacing });
        if queued > 0 && last_cross <= t {
            queued = 0;
            served = 0;
            last_launch = f64::NEG_INFINITY;
            (x, t) = rest(x_bar);
        }
        if queued == 0 {
            serving = green_span(sig, t);
        }
        let after = |g: f64, pos: usize| (g + kin.launch_reaction * pos as f64).max(t).max(last_launch + kin.launch_reaction);
        let mut launch = after(serving.0, queued - served + 1);
        let mut cross = step_to_bar(x, launch, x_bar, kin.accel, ix.free_flow_speed, dt).max(last_cross + headway);
        if cross > serving.1 + 1e-9 {
            served = queued;
            serving = (serving.0 + sig.cycle_length, serving.1 + sig.cycle_length);
            launch = after(serving.0, 1);
            cross = step_to_bar(x, launch, x_bar, kin.accel, ix.free_flow_speed, dt).max(last_cross + headway);
            if cross > serving.1 + 1e-9 {
                // Rolls up to the bar and waits out the red there.
                serving = (serving.0 + sig.cycle_length, serving.1 + sig.cycle_length);
                x = x_bar;
                launch = after(serving.0, 1);
                cross = launch.max(last_cross + headway);
            }
        }
        last_launch = launch;
        last_queued = true;
        queued += 1;
        last_stop = x;
        last_cross = cross;
    }
    last_cross
}
