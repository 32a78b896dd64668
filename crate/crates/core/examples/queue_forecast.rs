//! Queue forecast and green window at one signal from a BSM snapshot.
//!
//! cargo run --example queue_forecast

use hev_seqopt::traffic::{green_window, predict_queue, BsmRecord, Intersection, QueueKinematics, SignalTiming};

fn main() -> hev_seqopt::Result<()> {
    // 90 s cycle, green [40, 80) in each cycle.
    let signal = SignalTiming::new(90.0, 40.0, 40.0)?;
    let x = Intersection {
        id: 1,
        stop_bar_position: 600.0,
        signal,
        saturation_flow: 0.5,
        jam_density: 0.14,
        free_flow_speed: 15.0,
    };
    let t0 = 10.0;
    let spacing = x.jam_spacing();
    // Two cars already stopped at the line, three more approaching.
    let bsms = [
        (1, 600.0, 0.0),
        (2, 600.0 - spacing, 0.0),
        (3, 520.0, 9.0),
        (4, 470.0, 11.0),
        (5, 380.0, 13.0),
    ]
    .map(|(id, position, speed)| BsmRecord {
        vehicle_id: id,
        time: t0,
        position,
        speed,
    });

    let f = predict_queue(&x, &bsms, t0, &QueueKinematics::default());
    println!("queue peaks at t1 = {:.2} s, {:.1} m long", f.t1, f.q_max);
    println!("tail launches at t2 = {:.2} s, queue clear at t3 = {:.2} s", f.t2, f.t3);
    println!("wave speeds w0..w3 = {:.2} {:.2} {:.2} {:.2} m/s", f.w0, f.w1, f.w2, f.w3);
    let w = green_window(&f, &signal, t0);
    println!("green window [{:.2}, {:.2}] s ({:.1} s wide)", w.earliest, w.latest, w.width());
    Ok(())
}
