use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scoutsim::config::ExperimentConfig;
use scoutsim::error::{ConfigError, RunError};
use scoutsim::fluid::SweepSpec;
use scoutsim::runner::{self, Artifacts, TrajectorySpec};
use scoutsim::scenarios;

#[derive(Parser)]
#[command(name = "scoutsim", version, about = "Strict-priority datacenter simulator with Scout-driven congestion control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Suppress time-series CSVs.
        #[arg(long)]
        summary_only: bool,
        /// `key=value` overrides addressed by dotted config paths.
        overrides: Vec<String>,
    },
    /// Run a builtin scenario by name (all of its runs).
    Scenario {
        /// Scenario name; `list` prints the available names.
        name: String,
        #[arg(long)]
        summary_only: bool,
        /// `key=value` overrides applied to every run of the scenario.
        overrides: Vec<String>,
    },
    /// Fluid-model front end.
    Fluid {
        #[command(subcommand)]
        mode: FluidMode,
    },
}

#[derive(Subcommand)]
enum FluidMode {
    /// Integrate one phase-plane trajectory.
    Params {
        /// TOML trajectory spec; defaults are used when omitted.
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a grid of parameter points against the stability bound.
    Sweep {
        /// TOML sweep spec; the default grid is used when omitted.
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn category(e: &RunError) -> &'static str {
    match e {
        RunError::Config(_) => "config",
        RunError::Workload(_) => "workload",
        RunError::Fluid(_) => "fluid",
        RunError::EventBudget { .. } => "event-budget",
        RunError::Io(_) | RunError::Csv(_) | RunError::Json(_) => "output",
    }
}

fn report(a: &Artifacts) {
    let s = &a.summary;
    println!("{} [{}] -> {}", s.name, s.protocol, a.dir.display());
    println!("  events={} end_ns={} flows={}/{} timeouts={}", s.events, s.end_ns, s.flows_completed, s.flows_total, s.timeouts);
    if let Some(q) = s.mean_queue_pkts {
        println!("  mean_queue_pkts={q:.2} goodput_bps={:.4e}", s.aggregate_goodput_bps);
    }
    if let Some(sd) = &s.slowdown {
        println!("  slowdown mean={:.3} p50={:.3} p99={:.3}", sd.mean, sd.p50, sd.p99);
    }
    if let Some(j) = s.fairness.steady_mean {
        println!("  steady_jain mean={j:.4} min={:.4}", s.fairness.steady_min.unwrap_or(j));
    }
    println!(
        "  scout_overhead={:.5} drops high={} low={}",
        s.scout_overhead_ratio, s.switch_drops_high, s.switch_drops_low
    );
}

fn run_all(configs: Vec<ExperimentConfig>, summary_only: bool, overrides: &[String]) -> Result<(), RunError> {
    for mut cfg in configs {
        cfg.apply_overrides(overrides)?;
        if summary_only {
            cfg.recording.summary_only = true;
        }
        report(&runner::run_experiment(&cfg)?);
    }
    Ok(())
}

fn fluid_dir(out: Option<PathBuf>, leaf: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let root = std::env::var_os(runner::OUTPUT_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
        root.join(leaf)
    })
}

fn load_or_default<T: Default>(file: Option<&Path>, load: fn(&Path) -> Result<T, ConfigError>) -> Result<T, ConfigError> {
    file.map_or_else(|| Ok(T::default()), load)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config,
            summary_only,
            overrides,
        } => run_all(vec![ExperimentConfig::load(&config)?], summary_only, &overrides),
        Command::Scenario {
            name,
            summary_only,
            overrides,
        } => {
            if name == "list" {
                for n in scenarios::NAMES {
                    println!("{n}");
                }
                return Ok(());
            }
            let sc = scenarios::build(&name)?;
            println!("{}: {} ({} runs)", sc.name, sc.description, sc.runs.len());
            run_all(sc.runs, summary_only, &overrides)
        }
        Command::Fluid { mode } => match mode {
            FluidMode::Params { file, out } => {
                let spec: TrajectorySpec = load_or_default(file.as_deref(), runner::load_trajectory_spec)?;
                let dir = fluid_dir(out, "fluid-trajectory");
                let traj = runner::run_fluid_trajectory(&spec, &dir)?;
                let w_eq = spec.bdp_pkts / spec.n;
                if let Some(last) = traj.last() {
                    println!(
                        "{} samples -> {}; final w={:.4} q={:.4} (equilibrium w={w_eq:.4})",
                        traj.samples.len(),
                        dir.display(),
                        last.w,
                        last.q
                    );
                }
                Ok(())
            }
            FluidMode::Sweep { file, out } => {
                let spec: SweepSpec = load_or_default(file.as_deref(), runner::load_sweep_spec)?;
                let dir = fluid_dir(out, "fluid-sweep");
                let rows = runner::run_fluid_sweep(&spec, &dir)?;
                println!("{} points -> {}", rows.len(), dir.display());
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", category(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
