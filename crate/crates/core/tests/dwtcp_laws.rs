use std::collections::HashMap;

use proptest::prelude::*;
use scoutsim::scenarios;
use scoutsim::sim::World;
use scoutsim::transport::dwtcp::{decrease_factor, DwtcpFlowState, DwtcpParams, ScoutCoefficient};
use scoutsim::transport::{FlowEventKind, Phase, Protocol};
use scoutsim::SimTime;

const L: f64 = 1500.0;
const S: f64 = 64.0;

fn flow(w: f64) -> DwtcpFlowState {
    let mut s = DwtcpFlowState::new(
        &DwtcpParams::default(),
        w,
        1500,
        SimTime::from_micros(100),
        10_000_000_000,
        SimTime::ZERO,
    );
    s.phase = Phase::CongestionAvoidance;
    s
}

/// Every value a coefficient can reach from `init` by doubling and halving
/// within `[1, max]`: powers of two times `init`, `max` or 1.
fn reachable(alpha: f64, init: f64, max: f64) -> bool {
    let is_pow2_multiple = |base: f64| {
        let r = (alpha / base).log2();
        (r - r.round()).abs() < 1e-9
    };
    (1.0..=max).contains(&alpha) && (is_pow2_multiple(init) || is_pow2_multiple(max) || is_pow2_multiple(1.0))
}

proptest! {
    #[test]
    fn factor_is_clamped_and_monotone_in_delay(
        w in 1500.0f64..5e6,
        beta in 1e-5f64..0.1,
        d_t in 10_000u64..1_000_000,
        e1 in 1u64..5_000_000,
        e2 in 1u64..5_000_000,
    ) {
        let t = SimTime::from_nanos;
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let f_lo = decrease_factor(w, beta, t(d_t + lo), t(d_t));
        let f_hi = decrease_factor(w, beta, t(d_t + hi), t(d_t));
        prop_assert!((0.5..=1.0).contains(&f_lo));
        prop_assert!(f_hi <= f_lo);
        prop_assert_eq!(decrease_factor(w, beta, t(d_t), t(d_t)), 1.0);
    }

    #[test]
    fn factor_is_continuous_at_the_target(w in 1500.0f64..5e6, beta in 1e-5f64..0.1, d_t in 10_000u64..1_000_000) {
        let f = decrease_factor(w, beta, SimTime::from_nanos(d_t + 1), SimTime::from_nanos(d_t));
        prop_assert!(1.0 - f <= beta * w.sqrt() / d_t as f64 + 1e-15);
    }

    #[test]
    fn decreases_respect_clamp_and_rate_limit(
        w0 in 1500.0f64..3e6,
        steps in proptest::collection::vec((0u64..300_000, 0u64..2_000_000), 1..60),
    ) {
        let mut s = flow(w0);
        let mut now = SimTime::ZERO;
        let mut last_cut: Option<SimTime> = None;
        for (advance, excess) in steps {
            now += SimTime::from_nanos(advance);
            let before = s.w;
            let d_s = s.d_t + SimTime::from_nanos(excess);
            if s.on_scout_delayed(d_s, now).is_some() {
                prop_assert!(s.w >= 0.5 * before - 1e-9);
                prop_assert!(s.w >= L);
                if let Some(prev) = last_cut {
                    prop_assert!(now - prev >= s.gate_interval());
                }
                last_cut = Some(now);
            } else {
                prop_assert_eq!(s.w, before);
            }
        }
    }

    #[test]
    fn coefficient_follows_doubling_and_halving(init in 1.0f64..600.0, ops in proptest::collection::vec(any::<bool>(), 0..200)) {
        let max = 512.0;
        let mut a = ScoutCoefficient::new(init, max);
        let mut model = init.clamp(1.0, max);
        for double in ops {
            if double {
                a.double();
                model = (model * 2.0).min(max);
            } else {
                a.halve();
                model = (model / 2.0).max(1.0);
            }
            prop_assert_eq!(a.value(), model);
            prop_assert!(reachable(a.value(), init.clamp(1.0, max), max));
        }
    }

    #[test]
    fn scout_ack_grants_alpha_times_scout_size(w in 1500.0f64..1e6, acks in 1usize..20) {
        let mut s = flow(w);
        for i in 0..acks {
            let before = (s.w, s.alpha.value());
            let now = SimTime::from_micros(200 + 10 * i as u64);
            s.on_scout_ack(now - SimTime::from_micros(100), now);
            prop_assert_eq!(s.w, before.0 + before.1 * S);
            prop_assert_eq!(s.alpha.value(), (before.1 * 2.0).min(512.0));
        }
    }
}

/// Replays the per-flow event log of a real run and checks every window
/// change against the control laws.
#[test]
fn event_log_replay_matches_control_laws() {
    let mut cfg = scenarios::five_flows_sequence(Protocol::Dwtcp, SimTime::from_millis(30));
    cfg.recording.flow_events = true;
    let world = World::from_config(&cfg).unwrap();
    let topo = world.topology();
    let base_rtt = topo.path_info(topo.senders()[0], topo.receivers()[0]).unwrap().base_rtt;
    let out = world.run().unwrap();
    let params = DwtcpParams::default();

    let mut last: HashMap<u32, f64> = HashMap::new();
    let mut last_cut: HashMap<u32, u64> = HashMap::new();
    let (mut grants, mut acks, mut cuts) = (0, 0, 0);
    for e in &out.flow_events {
        let alpha = e.alpha.expect("dwtcp logs alpha");
        assert!(reachable(alpha, params.alpha_init, params.alpha_max), "alpha {alpha} unreachable");
        if let Some(&w_before) = last.get(&e.flow_id) {
            let dw = e.w_bytes - w_before;
            match e.event {
                FlowEventKind::ScoutAck => {
                    grants += 1;
                    if alpha < params.alpha_max {
                        assert!((dw - alpha / 2.0 * S).abs() < 1e-6, "grant {dw} with alpha {alpha}");
                    } else {
                        assert!(dw >= params.alpha_max / 2.0 * S - 1e-6 && dw <= params.alpha_max * S + 1e-6);
                    }
                }
                FlowEventKind::Ack => {
                    acks += 1;
                    let ca = L * L / w_before;
                    assert!((dw - L).abs() < 1e-6 || (dw - ca).abs() < 1e-6, "ack increase {dw} from w {w_before}");
                }
                FlowEventKind::Decrease => {
                    cuts += 1;
                    assert!(e.w_bytes >= 0.5 * w_before - 1e-6 && e.w_bytes >= L);
                    assert!(e.d_s_ns.is_some());
                    if let Some(prev) = last_cut.insert(e.flow_id, e.time_ns) {
                        assert!(e.time_ns - prev >= base_rtt.as_nanos(), "cuts {prev} and {} closer than the base RTT", e.time_ns);
                    }
                }
                FlowEventKind::Loss | FlowEventKind::Timeout => {}
            }
        }
        last.insert(e.flow_id, e.w_bytes);
    }
    assert!(grants > 100 && acks > 1000 && cuts > 10, "grants {grants}, acks {acks}, cuts {cuts}");
}
