//! Dynamic programming against rule-based load leveling on a repeating
//! traction cycle with a steady A/C load.
//!
//! cargo run --release --example power_split

use hev_seqopt::power_split::{dp_optimize, rule_based, simulate_schedule, DpConfig, PowerDemand, Powertrain, RuleBasedConfig};
use hev_seqopt::vehicle::EngineMode;

fn main() -> hev_seqopt::Result<()> {
    // 30 s launch, 60 s cruise, 20 s braking, 30 s stopped.
    let p_trac: Vec<f64> = (0..420)
        .map(|t| match t % 140 {
            0..30 => 25_000.0,
            30..90 => 6_000.0,
            90..110 => -12_000.0,
            _ => 0.0,
        })
        .collect();
    let p_ac = vec![1_200.0; p_trac.len()];
    let ac_on = vec![true; p_trac.len()];
    let demand = PowerDemand {
        p_trac: &p_trac,
        p_ac: &p_ac,
        ac_on: &ac_on,
    };
    let pt = Powertrain::default();

    let rb = rule_based(demand, 60.0, &RuleBasedConfig::default(), &pt)?;
    let dp = dp_optimize(demand, 60.0, &DpConfig::default(), &pt)?;
    for (name, schedule) in [("rule-based", &rb), ("DP", &dp.schedule)] {
        let r = simulate_schedule(schedule, demand, &pt)?;
        let on = schedule.steps.iter().filter(|s| s.mode == EngineMode::On).count();
        println!(
            "{name:<10} fuel {:>7.2} g  ΔSOC {:>+7.3} %  engine on {on:>3} s  E_eq {:>8.1} kJ",
            r.fuel_grams,
            r.delta_soc,
            r.equivalent_energy / 1e3
        );
    }
    println!("DP value-function prediction {:.1} kJ", dp.optimal_cost / 1e3);
    Ok(())
}
