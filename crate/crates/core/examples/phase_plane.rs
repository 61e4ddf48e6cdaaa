//! Integrates the fluid model from four times the fair share and prints the
//! spiral into equilibrium, together with the linearized eigenvalues.
//!
//! Usage: cargo run --release --example phase_plane [k_bar]

use scoutsim::fluid::{self, FluidParams, IntegrationOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k_bar: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100.0);
    let bdp = 10e9 * 100e-6 / (8.0 * 1500.0);
    let p = FluidParams::from_bdp(0.001, bdp, 5.0, 100e-6, k_bar)?;
    let w_eq = p.equilibrium_w();

    let (l1, l2) = fluid::eigenvalues(&p, w_eq);
    println!("equilibrium w = {w_eq:.3} pkts, bound on k_bar = {:.1}", fluid::stability_bound(bdp, p.beta));
    println!("eigenvalues {l1:.1}, {l2:.1}: {}", fluid::classify(l1, l2).name());

    let traj = fluid::integrate(&p, 4.0 * w_eq, 0.0, IntegrationOptions::default_for(&p, 1e4))?;
    let stride = (traj.samples.len() / 25).max(1);
    println!("{:>10} {:>10} {:>10}", "t (ms)", "w (pkts)", "q (pkts)");
    for s in traj.samples.iter().step_by(stride) {
        println!("{:>10.3} {:>10.3} {:>10.3}", s.t * 1e3, s.w, s.q);
    }
    match traj.settling_time(w_eq, 0.01) {
        Some(t) => println!("within 1% of equilibrium after {:.2} ms", t * 1e3),
        None => println!("did not settle within the horizon"),
    }
    Ok(())
}
