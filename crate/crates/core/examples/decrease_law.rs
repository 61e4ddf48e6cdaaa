//! Tabulates the DWTCP multiplicative-decrease factor against Scout delay
//! excess for a few window sizes.
//!
//! Usage: cargo run --example decrease_law [beta]

use scoutsim::transport::dwtcp::decrease_factor;
use scoutsim::SimTime;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.001);
    let d_t = SimTime::from_micros(220);
    let windows = [15_000.0, 150_000.0, 1_500_000.0];

    print!("{:>12}", "excess (us)");
    for w in windows {
        print!("{:>12}", format!("w={}K", w / 1e3));
    }
    println!();
    for excess_us in [0, 5, 10, 25, 50, 100, 200, 400] {
        let d_s = d_t + SimTime::from_micros(excess_us);
        print!("{excess_us:>12}");
        for w in windows {
            print!("{:>12.4}", decrease_factor(w, beta, d_s, d_t));
        }
        println!();
    }
    Ok(())
}
