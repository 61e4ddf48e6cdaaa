//! Samples the builtin flow-size distributions and generates a seeded
//! all-to-all Poisson workload at a chosen load.
//!
//! Usage: cargo run --release --example workload_mix [datamining|websearch] [load]

use scoutsim::metrics::{percentile, SizeBin};
use scoutsim::workload::{all_to_all, FlowSizeCdf};
use scoutsim::SimTime;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "websearch".into());
    let load: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.6);
    let cdf = FlowSizeCdf::builtin(&name)?;

    let (hosts, host_bps) = (16, 10e9);
    let until = SimTime::from_millis(200);
    let flows = all_to_all(&cdf, hosts, load, host_bps, until, 42);
    let sizes: Vec<f64> = flows.iter().map(|f| f.size as f64).collect();

    println!("{name}: mean size {:.0} B over {} .. {} B", cdf.mean(), cdf.min_size(), cdf.max_size());
    println!("{} flows in {} ms at load {load}", flows.len(), until.as_nanos() / 1_000_000);
    for p in [50.0, 90.0, 99.0] {
        println!("  p{p:<3} size {:>10.0} B", percentile(&sizes, p).unwrap_or(0.0));
    }
    let mut bins = [0usize; 3];
    for f in &flows {
        bins[SizeBin::of(f.size) as usize] += 1;
    }
    println!("  small {} / medium {} / large {}", bins[0], bins[1], bins[2]);
    let offered: f64 = sizes.iter().sum::<f64>() * 8.0 / until.as_secs_f64();
    println!("offered {:.2} of {:.0} Gb/s host capacity", offered / 1e9, host_bps * hosts as f64 / 1e9);
    Ok(())
}
