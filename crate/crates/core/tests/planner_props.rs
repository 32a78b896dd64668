use proptest::prelude::*;

use hev_seqopt::speed_planner::{
    plan_trajectory, trig_speed, KinematicLimits, ProfileParams, StrategyKind, Trajectory, MIN_CRUISE_FRACTION,
};
use hev_seqopt::traffic::GreenWindow;

const LIMIT: f64 = 15.0;
const H: f64 = 2.0;

fn check_trajectory(t: &Trajectory) -> Result<(), TestCaseError> {
    let n = t.speed.len();
    prop_assert!(t.position.len() == n && t.accel.len() == n);
    prop_assert!(t.speed.iter().all(|v| *v >= 0.0));
    for k in 1..n {
        let dx = 0.5 * (t.speed[k - 1] + t.speed[k]) * t.dt;
        prop_assert!((t.position[k] - t.position[k - 1] - dx).abs() < 1e-9);
        prop_assert!((t.accel[k - 1] - (t.speed[k] - t.speed[k - 1]) / t.dt).abs() < 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn calibrated_profile_is_continuous(
        v0 in 2.0..15.0f64,
        d in 80.0..400.0f64,
        ratio in 0.6..1.3f64,
    ) {
        let lim = KinematicLimits::default();
        let t_arr = d / (v0 * ratio);
        let Ok(p) = ProfileParams::calibrated(v0, d, t_arr, 0.1, &lim) else {
            return Ok(());
        };
        prop_assert!(p.m > 0.0 && p.n > 0.0);
        prop_assert!(0.0 <= p.t_p && p.t_p <= p.t_q && p.t_q <= p.t_arr + 1e-9);
        prop_assert_eq!(trig_speed(0.0, &p).unwrap(), v0);
        for b in [p.t_p, p.t_q.min(p.t_arr)] {
            if b > 0.0 {
                let jump = trig_speed(b * (1.0 - 1e-12), &p).unwrap() - trig_speed(b, &p).unwrap();
                prop_assert!(jump.abs() <= 1e-6, "jump {jump} at {b}");
            }
        }
    }

    #[test]
    fn planned_approach_respects_limits_and_window(
        v0 in 0.0..15.0f64,
        d in 60.0..400.0f64,
        earliest in 0.0..80.0f64,
        width in 5.0..40.0f64,
    ) {
        let lim = KinematicLimits::default();
        let window = GreenWindow { earliest, latest: earliest + width };
        let plan = match plan_trajectory(&window, v0, d, LIMIT, H, 0.0, &lim) {
            Ok(p) => p,
            Err(e) => {
                prop_assert!(e.is_infeasible(), "{e}");
                return Ok(());
            }
        };
        check_trajectory(&plan.trajectory)?;
        let tol = 1e-3;
        for a in &plan.trajectory.accel {
            prop_assert!(*a <= lim.a_max + tol && *a >= lim.a_min - tol, "accel {a}");
        }
        let v_min = MIN_CRUISE_FRACTION * LIMIT;
        match plan.strategy {
            StrategyKind::Stop => prop_assert!(plan.arrival_time >= earliest - 1e-9),
            kind => {
                prop_assert!(
                    plan.arrival_time >= earliest - 1e-9 && plan.arrival_time <= earliest + width + 1e-9,
                    "{kind:?} arrives at {} outside [{earliest}, {}]", plan.arrival_time, earliest + width
                );
                if kind == StrategyKind::Cruise {
                    prop_assert!(plan.trajectory.speed.iter().all(|v| *v >= v_min - 1e-9));
                }
                if let Some(p) = plan.profile {
                    prop_assert!(p.cruise_speed() >= v_min - 1e-9 && p.cruise_speed() <= LIMIT + 1e-9);
                }
                if kind == StrategyKind::SlowDown {
                    prop_assert!(plan.trajectory.speed.iter().all(|v| *v >= v_min - 1e-9));
                }
            }
        }
    }
}
