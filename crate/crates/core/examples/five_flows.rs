//! Five long flows join and leave a 10 Gb/s dumbbell one at a time.
//!
//! Prints the bottleneck queue and Jain's index for every phase under each
//! transport. With gaps below ~20 ms the baselines are still recovering
//! from their slow-start overshoot when the next flow arrives.
//!
//! Usage: cargo run --release --example five_flows [gap_ms]

use scoutsim::metrics::jain_index;
use scoutsim::scenarios::{five_flows_sequence, COMPARED};
use scoutsim::sim::World;
use scoutsim::SimTime;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gap_ms: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let gap = SimTime::from_millis(gap_ms);

    for protocol in COMPARED {
        let cfg = five_flows_sequence(protocol, gap);
        let out = World::from_config(&cfg)?.run()?;
        let port = out.bottleneck.as_ref().map(|b| b.link).ok_or("dumbbell has a bottleneck")?;
        println!("{protocol}");
        for phase in 0..9u64 {
            let from = gap * phase + gap / 5;
            let to = gap * (phase + 1);
            let rates = out.active_flow_rates(from, to);
            println!(
                "  phase {phase}: {} flows, queue {:6.2} pkts, aggregate {:5.2} Gb/s, jain {:.4}",
                rates.len(),
                out.mean_queue(port, from, to).unwrap_or(0.0),
                rates.iter().sum::<f64>() / 1e9,
                jain_index(&rates).unwrap_or(f64::NAN),
            );
        }
    }
    Ok(())
}
