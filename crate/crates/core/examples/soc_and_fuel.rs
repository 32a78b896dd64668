//! Vehicle-level accounting: road load, battery SOC and engine fuel for a
//! short launch with the engine on.
//!
//! cargo run --example soc_and_fuel

use hev_seqopt::vehicle::{
    equivalent_energy, fuel_rate, mg_power, soc_step, traction_power, EnergyConfig, EngineMode, FuelMap, SocModel,
    VehicleParams,
};

fn main() -> hev_seqopt::Result<()> {
    let veh = VehicleParams::default();
    let soc_model = SocModel::default();
    let map = FuelMap::default();
    let energy = EnergyConfig::default();

    let p_eng = 12_000.0;
    let p_ac = 1_500.0;
    let mut soc = 60.0;
    let mut fuel = 0.0;
    println!("  t    v    P_trac    P_mg     SOC");
    for k in 0..10 {
        let v = 1.5 * k as f64;
        let p_trac = traction_power(v, 1.5, &veh);
        let p_mg = mg_power(p_trac, p_eng);
        soc = soc_step(soc, p_mg, p_ac, true, &soc_model).soc;
        fuel += fuel_rate(EngineMode::On, p_eng, &map)?;
        println!("{k:>3} {v:>4.1} {p_trac:>9.0} {p_mg:>7.0} {soc:>8.4}");
    }
    println!("fuel {fuel:.2} g, ΔSOC {:.4} %", soc - 60.0);
    println!("equivalent energy {:.1} kJ", equivalent_energy(fuel, soc - 60.0, &energy) / 1e3);
    Ok(())
}
