//! Declarative experiment configuration. Field names carry their units.

use crate::error::ConfigError;
use crate::scout::ScoutScopeKind;
use crate::time::SimTime;
use crate::topology::{SwitchBuffers, TopologySpec};
use crate::transport::{DwtcpParams, Protocol, RtoPolicy};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub pkt_bytes: u32,
    pub ack_bytes: u32,
    pub w_init_bytes: u64,
    pub min_rto_ns: u64,
    pub max_rto_ns: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            pkt_bytes: 1500,
            ack_bytes: 64,
            w_init_bytes: 15_000,
            min_rto_ns: 1_000_000,
            max_rto_ns: 200_000_000,
        }
    }
}

impl TransportConfig {
    pub fn rto_policy(&self) -> RtoPolicy {
        RtoPolicy {
            min_rto: SimTime::from_nanos(self.min_rto_ns),
            max_rto: SimTime::from_nanos(self.max_rto_ns),
            ..RtoPolicy::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoutConfig {
    pub enabled: bool,
    pub scope: ScoutScopeKind,
    /// Injection interval; 0 means one Scout per path base round trip.
    pub interval_ns: u64,
    /// A Scout is declared lost this many target delays after it was sent.
    pub loss_horizon_factor: f64,
    /// Also declare a Scout lost as soon as a later Scout of the same
    /// channel is acknowledged.
    pub order_loss_inference: bool,
    pub ipg_variant: bool,
}

impl Default for ScoutConfig {
    fn default() -> Self {
        ScoutConfig {
            enabled: true,
            scope: ScoutScopeKind::PerFlow,
            interval_ns: 0,
            loss_horizon_factor: 2.0,
            order_loss_inference: true,
            ipg_variant: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DctcpConfig {
    pub g: f64,
    pub initial_ewma: f64,
}

impl Default for DctcpConfig {
    fn default() -> Self {
        DctcpConfig {
            g: 1.0 / 16.0,
            initial_ewma: 1.0,
        }
    }
}

/// A long-lived flow. On a dumbbell `src` indexes the senders and `dst` the
/// receivers; on a leaf-spine both index all hosts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongFlowSpec {
    pub src: usize,
    pub dst: usize,
    #[serde(default)]
    pub start_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CdfSource {
    Builtin { name: String },
    File { path: String },
}

/// Offered rate `start_bps + slope_bps_per_s·(t − start)`, capped at `max_bps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UdpSourceSpec {
    pub src: usize,
    pub dst: usize,
    #[serde(default)]
    pub start_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ns: Option<u64>,
    pub start_bps: f64,
    #[serde(default)]
    pub slope_bps_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bps: Option<f64>,
    #[serde(default = "default_pkt_bytes")]
    pub pkt_bytes: u32,
    /// Exponential rather than fixed inter-packet gaps.
    #[serde(default = "default_true")]
    pub poisson: bool,
}

fn default_pkt_bytes() -> u32 {
    1500
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    LongFlows {
        flows: Vec<LongFlowSpec>,
    },
    /// Background long flows plus senders that each push one flow of
    /// uniformly random size every period.
    Burst {
        background_flows: usize,
        bursting_flows: usize,
        period_ns: u64,
        min_bytes: u64,
        max_bytes: u64,
    },
    /// All-to-all Poisson arrivals with sizes drawn from a CDF.
    Poisson {
        cdf: CdfSource,
        load: f64,
        arrivals_ns: u64,
    },
    Udp {
        sources: Vec<UdpSourceSpec>,
    },
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec::LongFlows {
            flows: vec![LongFlowSpec {
                src: 0,
                dst: 0,
                start_ns: 0,
                stop_ns: None,
                size_bytes: None,
            }],
        }
    }
}

/// A measurement-only Scout channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub src: usize,
    pub dst: usize,
    #[serde(default)]
    pub start_ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ns: Option<u64>,
    /// 0 means one probe per base round trip.
    #[serde(default)]
    pub interval_ns: u64,
}

/// Sets the dumbbell bottleneck rate at `at_ns`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStep {
    pub at_ns: u64,
    pub bps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordingConfig {
    /// 0 disables the queue trace.
    pub queue_sample_ns: u64,
    pub goodput_bucket_ns: u64,
    /// Window used for goodput and fairness CSVs.
    pub goodput_window_ns: u64,
    pub flow_events: bool,
    pub scout_trace: bool,
    pub summary_only: bool,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        RecordingConfig {
            queue_sample_ns: 100_000,
            goodput_bucket_ns: 1_000_000,
            goodput_window_ns: 20_000_000,
            flow_events: false,
            scout_trace: false,
            summary_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub duration_ns: u64,
    pub protocol: Protocol,
    pub max_events: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub topology: TopologySpec,
    pub buffers: SwitchBuffers,
    pub transport: TransportConfig,
    pub dwtcp: DwtcpParams,
    pub scout: ScoutConfig,
    pub dctcp: DctcpConfig,
    pub workload: WorkloadSpec,
    pub probes: Vec<ProbeSpec>,
    pub rate_schedule: Vec<RateStep>,
    pub recording: RecordingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 1,
            duration_ns: 100_000_000,
            protocol: Protocol::Dwtcp,
            max_events: 2_000_000_000,
            output_dir: None,
            topology: TopologySpec::default(),
            buffers: SwitchBuffers::default(),
            transport: TransportConfig::default(),
            dwtcp: DwtcpParams::default(),
            scout: ScoutConfig::default(),
            dctcp: DctcpConfig::default(),
            workload: WorkloadSpec::default(),
            probes: Vec::new(),
            rate_schedule: Vec::new(),
            recording: RecordingConfig::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_nanos(self.duration_ns)
    }

    /// Host counts available as (sources, destinations).
    fn endpoint_counts(&self) -> (usize, usize) {
        match &self.topology {
            TopologySpec::Dumbbell(d) => (d.senders, d.receivers),
            TopologySpec::LeafSpine(l) => {
                let n = l.leaves * l.hosts_per_leaf;
                (n, n)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_ns == 0 {
            return Err(invalid("duration_ns", "must be positive"));
        }
        if i64::try_from(self.seed).is_err() {
            return Err(invalid("seed", "must fit in a TOML integer (at most 2^63 - 1)"));
        }
        match &self.topology {
            TopologySpec::Dumbbell(d) => {
                if d.senders == 0 || d.receivers == 0 {
                    return Err(invalid("topology.senders", "need at least one sender and receiver"));
                }
                if d.access_bps == 0 || d.bottleneck_bps == 0 {
                    return Err(invalid("topology.bottleneck_bps", "link rates must be positive"));
                }
            }
            TopologySpec::LeafSpine(l) => {
                if l.leaves == 0 || l.spines == 0 || l.hosts_per_leaf == 0 {
                    return Err(invalid("topology.leaves", "leaf-spine dimensions must be positive"));
                }
                if l.edge_bps == 0 || l.core_bps == 0 {
                    return Err(invalid("topology.edge_bps", "link rates must be positive"));
                }
            }
        }
        if self.buffers.hpq_cap_pkts == 0 {
            return Err(invalid("buffers.hpq_cap_pkts", "must be positive"));
        }
        let t = &self.transport;
        if t.pkt_bytes <= crate::transport::sender::HEADER_BYTES {
            return Err(invalid("transport.pkt_bytes", "must exceed the 40-byte header"));
        }
        if t.ack_bytes == 0 {
            return Err(invalid("transport.ack_bytes", "must be positive"));
        }
        if t.min_rto_ns == 0 || t.max_rto_ns < t.min_rto_ns {
            return Err(invalid("transport.min_rto_ns", "need 0 < min_rto_ns <= max_rto_ns"));
        }
        let d = &self.dwtcp;
        if !(d.beta > 0.0 && d.beta.is_finite()) {
            return Err(invalid("dwtcp.beta", "must be positive"));
        }
        if !(d.k >= 0.0 && d.k.is_finite()) {
            return Err(invalid("dwtcp.k", "must be non-negative"));
        }
        if !(d.alpha_max >= 1.0 && d.alpha_init >= 1.0 && d.alpha_init <= d.alpha_max) {
            return Err(invalid("dwtcp.alpha_init", "need 1 <= alpha_init <= alpha_max"));
        }
        if d.scout_bytes == 0 {
            return Err(invalid("dwtcp.scout_bytes", "must be positive"));
        }
        if self.scout.loss_horizon_factor.is_nan() || self.scout.loss_horizon_factor <= 1.0 {
            return Err(invalid("scout.loss_horizon_factor", "must exceed 1 so the delay check fires first"));
        }
        if !((0.0..=1.0).contains(&self.dctcp.g) && (0.0..=1.0).contains(&self.dctcp.initial_ewma)) {
            return Err(invalid("dctcp.g", "g and initial_ewma must lie in [0, 1]"));
        }
        let (nsrc, ndst) = self.endpoint_counts();
        let check_ends = |field: &str, src: usize, dst: usize| {
            if src >= nsrc || dst >= ndst {
                return Err(invalid(field, format!("endpoint ({src}, {dst}) out of range")));
            }
            if matches!(self.topology, TopologySpec::LeafSpine(_)) && src == dst {
                return Err(invalid(field, "source and destination must differ"));
            }
            Ok(())
        };
        match &self.workload {
            WorkloadSpec::LongFlows { flows } => {
                if flows.is_empty() {
                    return Err(invalid("workload.flows", "at least one flow required"));
                }
                for f in flows {
                    check_ends("workload.flows", f.src, f.dst)?;
                    if f.stop_ns.is_some_and(|s| s <= f.start_ns) {
                        return Err(invalid("workload.flows.stop_ns", "must be after start_ns"));
                    }
                }
            }
            WorkloadSpec::Burst {
                background_flows,
                bursting_flows,
                period_ns,
                min_bytes,
                max_bytes,
            } => {
                if background_flows + bursting_flows == 0 {
                    return Err(invalid("workload.bursting_flows", "need at least one flow"));
                }
                if background_flows + bursting_flows > nsrc.min(ndst) {
                    return Err(invalid("workload.bursting_flows", "more flows than hosts"));
                }
                if *period_ns == 0 || min_bytes > max_bytes || *min_bytes == 0 {
                    return Err(invalid("workload.period_ns", "need period > 0 and 0 < min_bytes <= max_bytes"));
                }
            }
            WorkloadSpec::Poisson { load, arrivals_ns, .. } => {
                if !(*load > 0.0 && *load < 1.0) {
                    return Err(invalid("workload.load", "must lie in (0, 1)"));
                }
                if *arrivals_ns == 0 || *arrivals_ns > self.duration_ns {
                    return Err(invalid("workload.arrivals_ns", "must be positive and within duration_ns"));
                }
                if nsrc < 2 {
                    return Err(invalid("topology", "all-to-all traffic needs at least two hosts"));
                }
            }
            WorkloadSpec::Udp { sources } => {
                for s in sources {
                    check_ends("workload.sources", s.src, s.dst)?;
                    if !(s.start_bps >= 0.0 && s.start_bps.is_finite()) {
                        return Err(invalid("workload.sources.start_bps", "must be non-negative"));
                    }
                    if s.pkt_bytes == 0 {
                        return Err(invalid("workload.sources.pkt_bytes", "must be positive"));
                    }
                }
            }
        }
        for p in &self.probes {
            check_ends("probes", p.src, p.dst)?;
        }
        if !self.rate_schedule.is_empty() && !matches!(self.topology, TopologySpec::Dumbbell(_)) {
            return Err(invalid("rate_schedule", "only supported on the dumbbell bottleneck"));
        }
        if self.rate_schedule.iter().any(|r| r.bps == 0) {
            return Err(invalid("rate_schedule.bps", "must be positive"));
        }
        if self.recording.goodput_bucket_ns == 0 || self.recording.goodput_window_ns < self.recording.goodput_bucket_ns {
            return Err(invalid("recording.goodput_bucket_ns", "need 0 < bucket <= window"));
        }
        Ok(())
    }

    /// Applies `key=value` overrides addressed by dotted TOML paths.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| invalid(o, "override must look like key=value"))?;
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let mut parts: Vec<&str> = key.trim().split('.').collect();
            let last = parts.pop().ok_or_else(|| invalid(key, "empty key"))?;
            let mut table = &mut doc;
            for p in parts {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| invalid(key, format!("`{p}` is not a table")))?;
            }
            table.insert(last.to_string(), value);
        }
        let text = toml::to_string(&doc).map_err(|e| ConfigError::Serialize(e.to_string()))?;
        *self = Self::from_toml(&text)?;
        Ok(())
    }
}
