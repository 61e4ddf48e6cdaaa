use std::collections::BTreeMap;

use scoutsim::config::{ExperimentConfig, LongFlowSpec, WorkloadSpec};
use scoutsim::packet::PacketKind;
use scoutsim::scenarios;
use scoutsim::sim::{RunOutput, ScoutTraceEvent, World};
use scoutsim::transport::Protocol;
use scoutsim::SimTime;

const SCOUT_INTERVAL_NS: u64 = 50_000;

fn short_benchmark(protocol: Protocol) -> ExperimentConfig {
    let mut cfg = scenarios::benchmark("datamining", 0.6, protocol);
    cfg.apply_overrides(&["workload.arrivals_ns=20000000".into(), "duration_ns=60000000".into()])
        .unwrap();
    cfg.scout.interval_ns = SCOUT_INTERVAL_NS;
    cfg.recording.scout_trace = true;
    cfg.recording.flow_events = true;
    cfg
}

fn run(cfg: &ExperimentConfig) -> RunOutput {
    World::from_config(cfg).unwrap().run().unwrap()
}

#[test]
fn ports_conserve_packets_and_keep_scouts_low() {
    let out = run(&short_benchmark(Protocol::Dwtcp));
    let end_ns = out.end.as_nanos() as u128;
    let mut scouts = 0;
    for p in &out.ports {
        let s = &p.stats;
        for prio in 0..2 {
            assert_eq!(s.enqueued[prio], s.dequeued[prio] + p.resident[prio], "link {}", p.link);
        }
        let k = |kind: PacketKind| s.tx_pkts_by_kind[kind.index()];
        assert_eq!(s.dequeued[0], k(PacketKind::Data) + k(PacketKind::DataAck), "link {}", p.link);
        assert_eq!(s.dequeued[1], k(PacketKind::Scout) + k(PacketKind::ScoutAck), "link {}", p.link);
        assert!(s.tx_bytes() as u128 * 8 * 1_000_000_000 <= p.line_rate_bps as u128 * end_ns);
        scouts += k(PacketKind::Scout);
    }
    assert!(scouts > 0);
}

#[test]
fn scout_injection_is_paced_and_every_scout_resolves_once() {
    let out = run(&short_benchmark(Protocol::Dwtcp));
    let mut sent: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for r in &out.scout_trace {
        if r.event == ScoutTraceEvent::Sent {
            sent.entry(r.channel_id).or_default().push(r.t_ns);
        }
    }
    assert!(!sent.is_empty());
    for window in [SCOUT_INTERVAL_NS, 3 * SCOUT_INTERVAL_NS + 7, 1_000_000] {
        let bound = window.div_ceil(SCOUT_INTERVAL_NS) as usize + 1;
        for times in sent.values() {
            let mut j = 0;
            for i in 0..times.len() {
                while j < times.len() && times[j] < times[i] + window {
                    j += 1;
                }
                assert!(j - i <= bound, "{} Scouts within {window} ns", j - i);
            }
        }
    }
    for c in &out.channels {
        assert!(c.acked + c.lost <= c.sent, "channel {}: {c:?}", c.channel_id);
        let traced = |ev| out.scout_trace.iter().filter(|r| r.channel_id == c.channel_id && r.event == ev).count() as u64;
        assert_eq!(traced(ScoutTraceEvent::Sent), c.sent);
        assert_eq!(traced(ScoutTraceEvent::Acked), c.acked);
        assert_eq!(traced(ScoutTraceEvent::Lost), c.lost);
    }
}

#[test]
fn flows_smaller_than_the_initial_window_send_no_scouts() {
    let mut cfg = ExperimentConfig {
        name: "tiny-flow".into(),
        duration_ns: 5_000_000,
        ..Default::default()
    };
    cfg.workload = WorkloadSpec::LongFlows {
        flows: vec![LongFlowSpec {
            src: 0,
            dst: 0,
            start_ns: 0,
            stop_ns: None,
            size_bytes: Some(cfg.transport.w_init_bytes - 1),
        }],
    };
    let out = run(&cfg);
    assert!(out.flows[0].finish.is_some());
    assert!(out.channels.iter().all(|c| c.sent == 0));
    let scout_bytes: u64 = out.ports.iter().map(|p| p.stats.tx_bytes_by_kind[PacketKind::Scout.index()]).sum();
    assert_eq!(scout_bytes, 0);
}

#[test]
fn completed_flows_never_beat_the_ideal() {
    for protocol in [Protocol::Dwtcp, Protocol::Dctcp, Protocol::Newreno] {
        let out = run(&short_benchmark(protocol));
        let done: Vec<f64> = out.flows.iter().filter_map(|f| f.slowdown).collect();
        assert!(done.len() > 100, "{protocol}: {} completed", done.len());
        for s in done {
            assert!(s >= 0.99, "{protocol}: slowdown {s}");
        }
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let cfg = short_benchmark(Protocol::Dwtcp);
    let (a, b) = (run(&cfg), run(&cfg));
    assert_eq!(a.events, b.events);
    assert_eq!(a.flow_events, b.flow_events);
    assert_eq!(a.queue_trace, b.queue_trace);
    assert_eq!(a.scout_trace, b.scout_trace);
    assert_eq!(a.flows, b.flows);

    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run(&other).flows, a.flows);
}

#[test]
fn event_budget_aborts_with_partial_output() {
    let mut cfg = scenarios::five_flows_sequence(Protocol::Dwtcp, SimTime::from_millis(20));
    cfg.max_events = 50_000;
    let out = World::from_config(&cfg).unwrap().run_partial();
    let at = out.aborted_at.expect("budget exhausted");
    assert!(at < out.end);
    assert!(out.flows.iter().any(|f| f.acked_bytes > 0));
    assert!(World::from_config(&cfg).unwrap().run().is_err());
}
