//! Named experiment suites.

use crate::config::{
    CdfSource, ExperimentConfig, LongFlowSpec, ProbeSpec, RateStep, UdpSourceSpec, WorkloadSpec,
};
use crate::error::ConfigError;
use crate::time::SimTime;
use crate::topology::{DumbbellSpec, LeafSpineSpec, TopologySpec};
use crate::transport::Protocol;

/// One named scenario: a set of runs meant to be compared.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: &'static str,
    pub runs: Vec<ExperimentConfig>,
}

pub const NAMES: &[&str] = &[
    "amplification",
    "early-loss",
    "motivation",
    "five-flows-sequence",
    "benchmark-datamining-20",
    "benchmark-datamining-60",
    "benchmark-datamining-80",
    "benchmark-websearch-20",
    "benchmark-websearch-60",
    "benchmark-websearch-80",
    "alpha-sweep",
    "beta-sweep",
    "injection-sweep",
    "senders-sweep",
    "burst-fct",
    "varying-bw",
    "long-haul",
];

pub const COMPARED: [Protocol; 3] = [Protocol::Dwtcp, Protocol::Dctcp, Protocol::Newreno];

/// Bottleneck utilizations swept by the amplification runs.
pub const AMPLIFICATION_UTILIZATIONS: [f64; 9] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99, 0.995];

/// Ramp slopes of the early-loss runs, in bits/s per second.
pub const RAMP_SLOPES: [f64; 3] = [1e9, 1e10, 1e11];

pub const BOTTLENECK_STEPS_BPS: [u64; 5] = [400_000_000, 700_000_000, 1_000_000_000, 10_000_000_000, 800_000_000];
pub const BOTTLENECK_STEP_NS: u64 = 100_000_000;

const MS: u64 = 1_000_000;

fn dumbbell(senders: usize) -> TopologySpec {
    TopologySpec::Dumbbell(DumbbellSpec {
        senders,
        receivers: senders,
        ..Default::default()
    })
}

fn long_flows(n: usize, start_gap_ns: u64) -> WorkloadSpec {
    WorkloadSpec::LongFlows {
        flows: (0..n)
            .map(|i| LongFlowSpec {
                src: i,
                dst: i,
                start_ns: i as u64 * start_gap_ns,
                stop_ns: None,
                size_bytes: None,
            })
            .collect(),
    }
}

fn base(name: String, protocol: Protocol) -> ExperimentConfig {
    ExperimentConfig {
        name,
        protocol,
        ..Default::default()
    }
}

/// Five long flows on the dumbbell. Flow `i` joins at `i·gap`; once all
/// five are active they leave in arrival order, one per `gap`.
pub fn five_flows_sequence(protocol: Protocol, gap: SimTime) -> ExperimentConfig {
    let g = gap.as_nanos();
    let flows = (0..5)
        .map(|i| LongFlowSpec {
            src: i,
            dst: i,
            start_ns: i as u64 * g,
            stop_ns: (i < 4).then(|| (5 + i as u64) * g),
            size_bytes: None,
        })
        .collect();
    ExperimentConfig {
        duration_ns: 9 * g,
        topology: dumbbell(5),
        workload: WorkloadSpec::LongFlows { flows },
        ..base(format!("five-flows-sequence-{protocol}"), protocol)
    }
}

/// Arrival and departure instants of [`five_flows_sequence`].
pub fn five_flows_events(gap: SimTime) -> Vec<SimTime> {
    (1..9).map(|i| gap * i).collect()
}

/// Poisson UDP background loading the bottleneck HPQ to `utilization`,
/// with a measurement-only Scout channel across it.
pub fn amplification_run(utilization: f64) -> ExperimentConfig {
    let senders = 8;
    let per = utilization * 10e9 / senders as f64;
    let sources = (0..senders)
        .map(|i| UdpSourceSpec {
            src: i,
            dst: i,
            start_ns: 0,
            stop_ns: None,
            start_bps: per,
            slope_bps_per_s: 0.0,
            max_bps: None,
            pkt_bytes: 1500,
            poisson: true,
        })
        .collect();
    let mut c = ExperimentConfig {
        duration_ns: 50 * MS,
        seed: 7,
        topology: dumbbell(9),
        workload: WorkloadSpec::Udp { sources },
        probes: vec![ProbeSpec {
            src: 8,
            dst: 8,
            start_ns: MS,
            stop_ns: None,
            interval_ns: 0,
        }],
        ..base(format!("amplification-{:.3}", utilization), Protocol::Dwtcp)
    };
    c.buffers.ecn_threshold_pkts = None;
    c
}

/// Fixed-rate UDP senders whose combined rate ramps linearly from 8 Gb/s,
/// with a probe channel sending one Scout per base round trip.
pub fn early_loss_run(slope_bps_per_s: f64) -> ExperimentConfig {
    let senders = 4;
    let start = 8e9;
    // Time for the excess over 10 Gb/s to fill the HPQ twice over.
    let cross = (10e9 - start) / slope_bps_per_s;
    let fill = (2.0 * 2.0 * 250.0 * 1500.0 * 8.0 / slope_bps_per_s).sqrt();
    let duration = SimTime::from_secs_f64(cross + 2.0 * fill).as_nanos();
    let sources = (0..senders)
        .map(|i| UdpSourceSpec {
            src: i,
            dst: i,
            start_ns: 0,
            stop_ns: None,
            start_bps: start / senders as f64,
            slope_bps_per_s: slope_bps_per_s / senders as f64,
            max_bps: None,
            pkt_bytes: 1500,
            poisson: false,
        })
        .collect();
    let mut c = ExperimentConfig {
        duration_ns: duration,
        seed: 11,
        topology: dumbbell(senders + 1),
        workload: WorkloadSpec::Udp { sources },
        probes: vec![ProbeSpec {
            src: senders,
            dst: senders,
            start_ns: 0,
            stop_ns: None,
            interval_ns: 0,
        }],
        ..base(format!("early-loss-{:e}", slope_bps_per_s), Protocol::Dwtcp)
    };
    c.buffers.ecn_threshold_pkts = None;
    c
}

/// All-to-all Poisson traffic on the 16-host leaf-spine.
pub fn benchmark(cdf: &str, load: f64, protocol: Protocol) -> ExperimentConfig {
    let arrivals = 100 * MS;
    let mut c = ExperimentConfig {
        duration_ns: arrivals + 150 * MS,
        seed: 3,
        topology: TopologySpec::LeafSpine(LeafSpineSpec::default()),
        workload: WorkloadSpec::Poisson {
            cdf: CdfSource::Builtin { name: cdf.to_string() },
            load,
            arrivals_ns: arrivals,
        },
        ..base(format!("benchmark-{cdf}-{:.0}-{protocol}", load * 100.0), protocol)
    };
    c.recording.queue_sample_ns = MS;
    c
}

/// Two background long flows plus six senders bursting `burst_bytes`
/// every 500 ms.
pub fn burst_fct(protocol: Protocol, burst_bytes: u64) -> ExperimentConfig {
    ExperimentConfig {
        duration_ns: 2_000 * MS,
        topology: dumbbell(8),
        workload: WorkloadSpec::Burst {
            background_flows: 2,
            bursting_flows: 6,
            period_ns: 500 * MS,
            min_bytes: burst_bytes,
            max_bytes: burst_bytes,
        },
        ..base(format!("burst-fct-{}k-{protocol}", burst_bytes / 1000), protocol)
    }
}

/// Five background long flows and ten senders issuing 50 KB flows every
/// 100 ms.
pub fn motivation(protocol: Protocol) -> ExperimentConfig {
    ExperimentConfig {
        duration_ns: 500 * MS,
        topology: dumbbell(15),
        workload: WorkloadSpec::Burst {
            background_flows: 5,
            bursting_flows: 10,
            period_ns: 100 * MS,
            min_bytes: 50_000,
            max_bytes: 50_000,
        },
        ..base(format!("motivation-{protocol}"), protocol)
    }
}

/// Five long flows while the bottleneck steps through
/// [`BOTTLENECK_STEPS_BPS`].
pub fn varying_bw(protocol: Protocol) -> ExperimentConfig {
    let rate_schedule = BOTTLENECK_STEPS_BPS
        .iter()
        .enumerate()
        .map(|(i, &bps)| RateStep {
            at_ns: i as u64 * BOTTLENECK_STEP_NS,
            bps,
        })
        .collect();
    ExperimentConfig {
        duration_ns: BOTTLENECK_STEPS_BPS.len() as u64 * BOTTLENECK_STEP_NS,
        topology: dumbbell(5),
        workload: long_flows(5, 0),
        rate_schedule,
        ..base(format!("varying-bw-{protocol}"), protocol)
    }
}

/// Flow 1 at t = 0 and flow 2 at 0.5 s; the base of the parameter sweeps.
pub fn two_flow_convergence(name: String) -> ExperimentConfig {
    ExperimentConfig {
        duration_ns: 1_000 * MS,
        topology: dumbbell(2),
        workload: long_flows(2, 500 * MS),
        ..base(name, Protocol::Dwtcp)
    }
}

pub fn senders(n: usize, protocol: Protocol) -> ExperimentConfig {
    ExperimentConfig {
        duration_ns: 200 * MS,
        topology: dumbbell(n),
        workload: long_flows(n, 0),
        ..base(format!("senders-{n}-{protocol}"), protocol)
    }
}

/// 1 Gb/s path with a 6 ms round trip.
pub fn long_haul(protocol: Protocol) -> ExperimentConfig {
    ExperimentConfig {
        duration_ns: 2_000 * MS,
        topology: TopologySpec::Dumbbell(DumbbellSpec {
            senders: 2,
            receivers: 2,
            access_bps: 1_000_000_000,
            bottleneck_bps: 1_000_000_000,
            access_delay_ns: 500_000,
            bottleneck_delay_ns: 2_000_000,
        }),
        workload: long_flows(2, 0),
        ..base(format!("long-haul-{protocol}"), protocol)
    }
}

fn per_protocol(f: impl Fn(Protocol) -> ExperimentConfig) -> Vec<ExperimentConfig> {
    COMPARED.into_iter().map(f).collect()
}

pub fn build(name: &str) -> Result<Scenario, ConfigError> {
    let (description, runs) = match name {
        "amplification" => (
            "LPQ vs HPQ queueing delay as UDP load approaches line rate",
            AMPLIFICATION_UTILIZATIONS.iter().map(|&u| amplification_run(u)).collect(),
        ),
        "early-loss" => (
            "first Scout loss vs first data loss under ramping load",
            RAMP_SLOPES.iter().map(|&s| early_loss_run(s)).collect(),
        ),
        "motivation" => ("long flows sharing with periodic 50 KB bursts", per_protocol(motivation)),
        "five-flows-sequence" => (
            "five long flows joining and leaving one second apart",
            per_protocol(|p| five_flows_sequence(p, SimTime::from_secs(1))),
        ),
        "alpha-sweep" => ("static vs dynamic Scout coefficient", {
            let mut stat = two_flow_convergence("alpha-static-10".into());
            stat.dwtcp.alpha_init = 10.0;
            stat.dwtcp.alpha_max = 10.0;
            vec![two_flow_convergence("alpha-dynamic".into()), stat]
        }),
        "beta-sweep" => (
            "decrease gain",
            [0.0001, 0.001, 0.01]
                .into_iter()
                .map(|b| {
                    let mut c = two_flow_convergence(format!("beta-{b}"));
                    c.dwtcp.beta = b;
                    c
                })
                .collect(),
        ),
        "injection-sweep" => (
            "static coefficient with sub-RTT Scout injection",
            [1u64, 2, 4, 10]
                .into_iter()
                .map(|x| {
                    let mut c = two_flow_convergence(format!("injection-x{x}"));
                    c.dwtcp.alpha_init = 10.0;
                    c.dwtcp.alpha_max = 10.0;
                    c.scout.interval_ns = 100_000 / x;
                    c
                })
                .collect(),
        ),
        "senders-sweep" => (
            "10, 20 and 30 concurrent long flows",
            [10, 20, 30].into_iter().map(|n| senders(n, Protocol::Dwtcp)).collect(),
        ),
        "burst-fct" => (
            "burst completion times against background goodput",
            [500_000u64, 1_000_000, 2_000_000]
                .into_iter()
                .flat_map(|b| COMPARED.into_iter().map(move |p| burst_fct(p, b)))
                .collect(),
        ),
        "varying-bw" => ("bottleneck rate steps every 100 ms", per_protocol(varying_bw)),
        "long-haul" => ("1 Gb/s, 6 ms round trip", per_protocol(long_haul)),
        other => match other.strip_prefix("benchmark-").and_then(|r| r.rsplit_once('-')) {
            Some((cdf @ ("datamining" | "websearch"), load @ ("20" | "60" | "80"))) => {
                let load: f64 = load.parse::<f64>().expect("literal") / 100.0;
                (
                    "all-to-all Poisson flows on a 16-host leaf-spine",
                    [Protocol::Dwtcp, Protocol::Dctcp]
                        .into_iter()
                        .map(|p| benchmark(cdf, load, p))
                        .collect(),
                )
            }
            _ => return Err(ConfigError::UnknownScenario(other.to_string())),
        },
    };
    Ok(Scenario {
        name: name.to_string(),
        description,
        runs,
    })
}
