//! The four approach strategies from the same spot, 300 m before the line.
//!
//! cargo run --example speed_plan

use hev_seqopt::speed_planner::{plan_trajectory, KinematicLimits};
use hev_seqopt::traffic::GreenWindow;

fn main() -> hev_seqopt::Result<()> {
    let limits = KinematicLimits::default();
    let (v0, d, v_lim, h) = (12.0, 300.0, 15.0, 2.0);
    let windows = [
        ("open now", 0.0, 40.0),
        ("opens soon", 24.0, 50.0),
        ("closes soon", 0.0, 20.5),
        ("opens late", 60.0, 100.0),
    ];
    for (label, earliest, latest) in windows {
        let w = GreenWindow { earliest, latest };
        let plan = plan_trajectory(&w, v0, d, v_lim, h, 0.0, &limits)?;
        let tr = &plan.trajectory;
        let v_min = tr.speed.iter().copied().fold(f64::INFINITY, f64::min);
        let v_max = tr.speed.iter().copied().fold(0.0, f64::max);
        println!(
            "{label:<12} [{earliest:>5.1}, {latest:>5.1}] -> {:?}: arrive {:.1} s, speed {:.1}..{:.1} m/s",
            plan.strategy, plan.arrival_time, v_min, v_max
        );
        if let Some(p) = plan.profile {
            println!("             m = {:.4}, n = {:.4}, t_p = {:.2}, t_q = {:.2}", p.m, p.n, p.t_p, p.t_q);
        }
    }
    Ok(())
}
