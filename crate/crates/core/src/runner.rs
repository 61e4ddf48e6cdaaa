//! Experiment runner: executes a config and writes its CSV and JSON artifacts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{ConfigError, RunError};
use crate::fluid::{self, FluidParams, FluidTrajectory, IntegrationOptions, SweepRow, SweepSpec};
use crate::metrics::{self, SizeBin, SlowdownSummary};
use crate::packet::{PacketKind, Priority};
use crate::scout::overhead_report;
use crate::sim::{PortReport, RunOutput, World};
use crate::time::SimTime;

/// Environment variable that overrides the artifact root directory.
pub const OUTPUT_ENV: &str = "SCOUTSIM_OUTPUT";
const DEFAULT_OUTPUT_ROOT: &str = "results";

/// Artifact root: the environment override, then the config, then `results`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(cfg.output_dir.as_deref().unwrap_or(DEFAULT_OUTPUT_ROOT)),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlowdownBins {
    pub small: Option<SlowdownSummary>,
    pub medium: Option<SlowdownSummary>,
    pub large: Option<SlowdownSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairnessSummary {
    /// Windows whose set of active monitored flows matches both neighbours.
    pub steady_windows: usize,
    pub steady_mean: Option<f64>,
    pub steady_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub protocol: String,
    pub seed: u64,
    pub end_ns: u64,
    pub events: u64,
    /// True when the event budget ran out before the configured duration.
    pub aborted: bool,
    pub flows_total: usize,
    pub flows_completed: usize,
    pub timeouts: u64,
    pub slowdown: Option<SlowdownSummary>,
    pub slowdown_by_size: SlowdownBins,
    pub bottleneck_link: Option<u32>,
    /// Time-averaged HPQ occupancy of the bottleneck port, packets.
    pub mean_queue_pkts: Option<f64>,
    pub max_queue_pkts: Option<usize>,
    pub fairness: FairnessSummary,
    pub aggregate_goodput_bps: f64,
    pub scout_bytes: u64,
    pub scout_overhead_ratio: f64,
    pub switch_drops_high: u64,
    pub switch_drops_low: u64,
}

/// A finished run together with where its artifacts were written.
#[derive(Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub output: RunOutput,
}

/// Runs `cfg` and writes artifacts under [`output_root`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    run_experiment_in(cfg, &output_root(cfg))
}

/// Runs `cfg` and writes artifacts to `root/<name>`. If the event budget runs
/// out, the partial artifacts are still written (flagged `aborted` in the
/// summary) before the error is returned.
pub fn run_experiment_in(cfg: &ExperimentConfig, root: &Path) -> Result<Artifacts, RunError> {
    let world = World::from_config(cfg)?;
    let output = world.run_partial();
    let summary = summarize(cfg, &output);
    let dir = root.join(&cfg.name);
    write_artifacts(&dir, cfg, &output, &summary)?;
    if let Some(at) = output.aborted_at {
        return Err(RunError::EventBudget {
            budget: cfg.max_events,
            at_ns: at.as_nanos(),
        });
    }
    Ok(Artifacts { dir, summary, output })
}

fn traffic_port(out: &RunOutput) -> Option<&PortReport> {
    out.bottleneck.as_ref()
}

pub fn summarize(cfg: &ExperimentConfig, out: &RunOutput) -> RunSummary {
    let mut all = Vec::new();
    let mut bins: [Vec<f64>; 3] = Default::default();
    for f in &out.flows {
        if let (Some(s), Some(size)) = (f.slowdown, f.size) {
            all.push(s);
            let i = match SizeBin::of(size) {
                SizeBin::Small => 0,
                SizeBin::Medium => 1,
                SizeBin::Large => 2,
            };
            bins[i].push(s);
        }
    }

    let (scout_bytes, total_bytes) = match traffic_port(out) {
        Some(p) => (p.stats.tx_bytes_by_kind[PacketKind::Scout.index()], p.stats.tx_bytes()),
        None => out.monitored.iter().fold((0, 0), |(s, t), p| {
            (s + p.stats.tx_bytes_by_kind[PacketKind::Scout.index()], t + p.stats.tx_bytes())
        }),
    };
    let overhead = overhead_report(scout_bytes, total_bytes - scout_bytes);

    let end = out.aborted_at.unwrap_or(out.end);
    let delivered: u64 = out.flows.iter().map(|f| f.acked_bytes).sum::<u64>()
        + out.udp.iter().map(|u| u.received_bytes).sum::<u64>();
    let aggregate_goodput_bps = if end > SimTime::ZERO {
        delivered as f64 * 8.0 / end.as_secs_f64()
    } else {
        0.0
    };

    RunSummary {
        name: cfg.name.clone(),
        protocol: cfg.protocol.name().to_string(),
        seed: cfg.seed,
        end_ns: end.as_nanos(),
        events: out.events,
        aborted: out.aborted_at.is_some(),
        flows_total: out.flows.len(),
        flows_completed: out.flows.iter().filter(|f| f.finish.is_some()).count(),
        timeouts: out.flows.iter().map(|f| f.timeouts).sum(),
        slowdown: SlowdownSummary::from_samples(&all),
        slowdown_by_size: SlowdownBins {
            small: SlowdownSummary::from_samples(&bins[0]),
            medium: SlowdownSummary::from_samples(&bins[1]),
            large: SlowdownSummary::from_samples(&bins[2]),
        },
        bottleneck_link: traffic_port(out).map(|p| p.link),
        mean_queue_pkts: traffic_port(out).map(|p| p.mean_hpq_pkts),
        max_queue_pkts: traffic_port(out).map(|p| p.stats.max_hpq_pkts),
        fairness: fairness_summary(&fairness_series(cfg, out)),
        aggregate_goodput_bps,
        scout_bytes,
        scout_overhead_ratio: overhead.ratio,
        switch_drops_high: out.switch_drops[0],
        switch_drops_low: out.switch_drops[1],
    }
}

/// One goodput window: its start, the ids of monitored flows active for the
/// whole window, and their Jain index.
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessWindow {
    pub start: SimTime,
    pub active: BTreeSet<u32>,
    pub jain: Option<f64>,
}

pub fn fairness_series(cfg: &ExperimentConfig, out: &RunOutput) -> Vec<FairnessWindow> {
    let window = SimTime::from_nanos(cfg.recording.goodput_window_ns);
    let mut rows = Vec::new();
    if window == SimTime::ZERO {
        return rows;
    }
    let mut t = SimTime::ZERO;
    while t + window <= out.end {
        let to = t + window;
        let active: Vec<_> = out
            .flows
            .iter()
            .filter(|f| f.goodput.is_some())
            .filter(|f| f.start <= t && f.stop.is_none_or(|s| s >= to) && f.finish.is_none_or(|x| x >= to))
            .collect();
        let rates: Vec<f64> = active
            .iter()
            .filter_map(|f| f.goodput.as_ref())
            .map(|g| g.rate_between(t, to))
            .collect();
        rows.push(FairnessWindow {
            start: t,
            active: active.iter().map(|f| f.flow_id).collect(),
            jain: metrics::jain_index(&rates),
        });
        t = to;
    }
    rows
}

pub fn fairness_summary(rows: &[FairnessWindow]) -> FairnessSummary {
    let steady: Vec<f64> = rows
        .windows(3)
        .filter(|w| w[1].active.len() >= 2 && w[0].active == w[1].active && w[1].active == w[2].active)
        .filter_map(|w| w[1].jain)
        .collect();
    FairnessSummary {
        steady_windows: steady.len(),
        steady_mean: metrics::mean(&steady),
        steady_min: steady.iter().copied().reduce(f64::min),
    }
}

#[derive(Serialize)]
struct GoodputRow<'a> {
    t_ns: u64,
    entity: &'a str,
    bits_per_s: f64,
}

#[derive(Serialize)]
struct FairnessRow {
    t_ns: u64,
    jain: Option<f64>,
}

#[derive(Serialize)]
struct FlowRow {
    flow_id: u32,
    size: Option<u64>,
    start_ns: u64,
    finish_ns: Option<u64>,
    slowdown: Option<f64>,
    timeouts: u64,
    src: u32,
    dst: u32,
    retransmits: u64,
    acked_bytes: u64,
}

#[derive(Serialize)]
struct PortRow {
    link: u32,
    line_rate_bps: u64,
    mean_hpq_pkts: f64,
    max_hpq_pkts: usize,
    max_lpq_bytes: u32,
    enqueued_high: u64,
    enqueued_low: u64,
    dropped_high: u64,
    dropped_low: u64,
    ecn_marked: u64,
    tx_data_bytes: u64,
    tx_ack_bytes: u64,
    tx_scout_bytes: u64,
    tx_scout_ack_bytes: u64,
    mean_hpq_delay_ns: Option<f64>,
    mean_lpq_delay_ns: Option<f64>,
}

impl From<&PortReport> for PortRow {
    fn from(p: &PortReport) -> Self {
        let s = &p.stats;
        PortRow {
            link: p.link,
            line_rate_bps: p.line_rate_bps,
            mean_hpq_pkts: p.mean_hpq_pkts,
            max_hpq_pkts: s.max_hpq_pkts,
            max_lpq_bytes: s.max_lpq_bytes,
            enqueued_high: s.enqueued[0],
            enqueued_low: s.enqueued[1],
            dropped_high: s.dropped[0],
            dropped_low: s.dropped[1],
            ecn_marked: s.ecn_marked,
            tx_data_bytes: s.tx_bytes_by_kind[PacketKind::Data.index()],
            tx_ack_bytes: s.tx_bytes_by_kind[PacketKind::DataAck.index()],
            tx_scout_bytes: s.tx_bytes_by_kind[PacketKind::Scout.index()],
            tx_scout_ack_bytes: s.tx_bytes_by_kind[PacketKind::ScoutAck.index()],
            mean_hpq_delay_ns: s.mean_queue_delay(Priority::High),
            mean_lpq_delay_ns: s.mean_queue_delay(Priority::Low),
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every artifact of `out` into `dir`. Time series are skipped when
/// the config asks for summaries only.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput, summary: &RunSummary) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)? + "\n")?;

    write_csv(
        &dir.join("flows.csv"),
        out.flows.iter().map(|f| FlowRow {
            flow_id: f.flow_id,
            size: f.size,
            start_ns: f.start.as_nanos(),
            finish_ns: f.finish.map(SimTime::as_nanos),
            slowdown: f.slowdown,
            timeouts: f.timeouts,
            src: f.src,
            dst: f.dst,
            retransmits: f.retransmits,
            acked_bytes: f.acked_bytes,
        }),
    )?;
    write_csv(&dir.join("ports.csv"), out.monitored.iter().map(PortRow::from))?;
    write_csv(&dir.join("channels.csv"), &out.channels)?;
    write_csv(&dir.join("udp.csv"), &out.udp)?;
    if cfg.recording.summary_only {
        return Ok(());
    }

    write_csv(&dir.join("queue.csv"), &out.queue_trace)?;
    write_csv(&dir.join("drops.csv"), &out.drops)?;

    let window = SimTime::from_nanos(cfg.recording.goodput_window_ns);
    let mut goodput = Vec::new();
    let names: Vec<String> = out.flows.iter().map(|f| format!("flow-{}", f.flow_id)).collect();
    let mut series = Vec::new();
    for (f, name) in out.flows.iter().zip(&names) {
        if let Some(g) = &f.goodput {
            series.push((name.as_str(), g.series(window, out.end)));
        }
    }
    if let Some(first) = series.first() {
        for (i, &(t, _)) in first.1.iter().enumerate() {
            let mut total = 0.0;
            for (name, s) in &series {
                total += s[i].1;
                goodput.push(GoodputRow {
                    t_ns: t.as_nanos(),
                    entity: name,
                    bits_per_s: s[i].1,
                });
            }
            goodput.push(GoodputRow {
                t_ns: t.as_nanos(),
                entity: "aggregate",
                bits_per_s: total,
            });
        }
    }
    write_csv(&dir.join("goodput.csv"), goodput)?;
    write_csv(
        &dir.join("fairness.csv"),
        fairness_series(cfg, out).iter().map(|w| FairnessRow {
            t_ns: w.start.as_nanos(),
            jain: w.jain,
        }),
    )?;
    if cfg.recording.flow_events {
        write_csv(&dir.join("flow_events.csv"), &out.flow_events)?;
    }
    if cfg.recording.scout_trace {
        write_csv(&dir.join("scout_trace.csv"), &out.scout_trace)?;
    }
    Ok(())
}

/// A single phase-plane trajectory request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub beta: f64,
    pub bdp_pkts: f64,
    pub n: f64,
    pub tau_s: f64,
    pub k_bar: f64,
    /// Initial window; defaults to four times the fair share `4·BDP/N`.
    pub w0_pkts: Option<f64>,
    pub q0_pkts: f64,
    pub horizon_taus: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            beta: 0.001,
            bdp_pkts: 1e10 * 100e-6 / (8.0 * 1500.0),
            n: 5.0,
            tau_s: 100e-6,
            k_bar: 100.0,
            w0_pkts: None,
            q0_pkts: 0.0,
            horizon_taus: 1e4,
        }
    }
}

impl TrajectorySpec {
    pub fn params(&self) -> Result<FluidParams, RunError> {
        Ok(FluidParams::from_bdp(self.beta, self.bdp_pkts, self.n, self.tau_s, self.k_bar)?)
    }

    pub fn initial_w(&self) -> f64 {
        self.w0_pkts.unwrap_or(4.0 * self.bdp_pkts / self.n)
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    w_pkts: f64,
    q_pkts: f64,
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn load_trajectory_spec(path: &Path) -> Result<TrajectorySpec, ConfigError> {
    parse_toml(path)
}

pub fn load_sweep_spec(path: &Path) -> Result<SweepSpec, ConfigError> {
    parse_toml(path)
}

/// Integrates one trajectory and writes `trajectory.csv` into `dir`.
pub fn run_fluid_trajectory(spec: &TrajectorySpec, dir: &Path) -> Result<FluidTrajectory, RunError> {
    let p = spec.params()?;
    let traj = fluid::integrate(&p, spec.initial_w(), spec.q0_pkts, IntegrationOptions::default_for(&p, spec.horizon_taus))?;
    fs::create_dir_all(dir)?;
    write_csv(
        &dir.join("trajectory.csv"),
        traj.samples.iter().map(|s| TrajectoryRow {
            t: s.t,
            w_pkts: s.w,
            q_pkts: s.q,
        }),
    )?;
    Ok(traj)
}

/// Classifies every point of the sweep grid and writes `sweep.csv` into `dir`.
pub fn run_fluid_sweep(spec: &SweepSpec, dir: &Path) -> Result<Vec<SweepRow>, RunError> {
    let rows = fluid::sweep(spec)?;
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(start_ms: u64, ids: &[u32], jain: f64) -> FairnessWindow {
        FairnessWindow {
            start: SimTime::from_millis(start_ms),
            active: ids.iter().copied().collect(),
            jain: Some(jain),
        }
    }

    #[test]
    fn steady_windows_skip_membership_changes() {
        let rows = vec![
            window(0, &[1], 1.0),
            window(10, &[1, 2], 0.6),
            window(20, &[1, 2], 0.9),
            window(30, &[1, 2], 0.98),
            window(40, &[1, 2], 1.0),
            window(50, &[2], 1.0),
        ];
        let s = fairness_summary(&rows);
        assert_eq!(s.steady_windows, 2);
        assert_eq!(s.steady_min, Some(0.9));
        assert!((s.steady_mean.unwrap() - 0.94).abs() < 1e-12);
    }

    #[test]
    fn default_trajectory_starts_at_four_fair_shares() {
        let spec = TrajectorySpec::default();
        assert!((spec.initial_w() - 4.0 * spec.bdp_pkts / 5.0).abs() < 1e-12);
        assert!(spec.params().is_ok());
    }
}
