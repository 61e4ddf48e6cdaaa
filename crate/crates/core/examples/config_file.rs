//! Builds an experiment from TOML text, applies command-line style
//! overrides and writes the usual artifact directory.
//!
//! Usage: cargo run --release --example config_file [out_dir]

use scoutsim::config::ExperimentConfig;
use scoutsim::runner::run_experiment_in;

const CONFIG: &str = r#"
name = "two-senders"
protocol = "dwtcp"
duration_ns = 20_000_000
seed = 3

[topology]
kind = "dumbbell"
senders = 2
receivers = 2

[workload]
kind = "long_flows"
flows = [
    { src = 0, dst = 0, start_ns = 0 },
    { src = 1, dst = 1, start_ns = 5_000_000 },
]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "results".into());
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.apply_overrides(&["dwtcp.beta=0.002".into(), "recording.goodput_window_ns=1000000".into()])?;

    let art = run_experiment_in(&cfg, root.as_ref())?;
    let s = &art.summary;
    println!("wrote {}", art.dir.display());
    println!("events {}, goodput {:.3} Gb/s", s.events, s.aggregate_goodput_bps / 1e9);
    if let Some(q) = s.mean_queue_pkts {
        println!("mean bottleneck queue {q:.2} pkts");
    }
    println!("scout overhead {:.4}%", 100.0 * s.scout_overhead_ratio);
    Ok(())
}
