//! Classifies a parameter grid and reports how often the linearized
//! verdict agrees with the closed-form bound on k_bar.
//!
//! Usage: cargo run --release --example stability_sweep

use std::collections::BTreeMap;

use scoutsim::fluid::{self, Stability, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SweepSpec::default();
    let rows = fluid::sweep(&spec)?;

    let mut by_class: BTreeMap<&str, usize> = BTreeMap::new();
    let mut agree = 0;
    for r in &rows {
        *by_class.entry(r.classification.name()).or_default() += 1;
        if (r.classification == Stability::StableSpiral) == (r.k_bar < r.bound_2bdp_sqrtbeta) {
            agree += 1;
        }
    }
    println!("{} points", rows.len());
    for (class, n) in by_class {
        println!("  {class:<16} {n}");
    }
    println!("bound agrees on {agree}/{}", rows.len());

    println!("\nbeta      BDP      bound on k_bar");
    for &beta in &spec.betas {
        for &bdp in &spec.bdps {
            println!("{beta:<9} {bdp:<8} {:.1}", fluid::stability_bound(bdp, beta));
        }
    }
    Ok(())
}
