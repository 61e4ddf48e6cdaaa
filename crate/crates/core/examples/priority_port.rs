//! Drives a single strict-priority port by hand: a backlog of data packets
//! holds off Scouts, the 640-byte low queue overflows on the eleventh Scout,
//! and ECN marks appear once the high queue passes its threshold.
//!
//! Usage: cargo run --example priority_port

use scoutsim::packet::{FlowId, Packet, PacketKind, RouteId};
use scoutsim::port::{EnqueueOutcome, PortConfig, PriorityPort};
use scoutsim::SimTime;

fn main() {
    let mut cfg = PortConfig::new(10_000_000_000);
    cfg.ecn_threshold_pkts = Some(4);
    let mut port = PriorityPort::new(cfg);
    let route = RouteId(0);
    let t0 = SimTime::ZERO;

    for i in 0..6 {
        port.enqueue(Packet::data(i, FlowId(1), i * 1460, 1460, 1500, t0, route), t0);
    }
    let scouts: Vec<EnqueueOutcome> = (0..11)
        .map(|i| port.enqueue(Packet::scout(100 + i, FlowId(7), i, 64, t0, route), t0))
        .collect();
    println!(
        "queued 6 data packets and {} of 11 Scouts ({} bytes low-priority)",
        scouts.iter().filter(|o| **o == EnqueueOutcome::Accepted).count(),
        port.lpq_bytes()
    );

    let mut now = t0;
    while let Some((pkt, done)) = port.try_start(now) {
        let tag = match pkt.kind {
            PacketKind::Data if pkt.ecn_marked => "data (CE)",
            PacketKind::Data => "data",
            PacketKind::Scout => "scout",
            _ => "ack",
        };
        println!("{:>8} ns  {tag:<9} id {:>3}  queue wait {} ns", now.as_nanos(), pkt.id, (now - pkt.send_ts).as_nanos());
        port.finish();
        now = done;
    }
    println!("stats: {:?}", port.stats);
}
