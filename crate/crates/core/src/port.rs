//! Switch output port with strict-priority dual-queue service.
//!
//! High-priority packets sit in a packet-counted FIFO, low-priority packets
//! in a byte-counted FIFO. The low-priority queue is only served while the
//! high-priority queue is empty, and transmission is non-preemptive.

use crate::packet::{Packet, PacketKind, Priority};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortConfig {
    pub hpq_cap_pkts: usize,
    pub lpq_cap_bytes: u32,
    pub line_rate_bps: u64,
    /// Instantaneous-queue ECN marking threshold in packets; `None` disables marking.
    pub ecn_threshold_pkts: Option<usize>,
}

impl PortConfig {
    pub fn new(line_rate_bps: u64) -> Self {
        PortConfig {
            hpq_cap_pkts: 250,
            lpq_cap_bytes: 640,
            line_rate_bps,
            ecn_threshold_pkts: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PortStats {
    /// Indexed by priority: 0 = high, 1 = low.
    pub enqueued: [u64; 2],
    pub dequeued: [u64; 2],
    pub dropped: [u64; 2],
    /// Bytes transmitted, indexed by [`PacketKind::index`].
    pub tx_bytes_by_kind: [u64; 4],
    pub tx_pkts_by_kind: [u64; 4],
    /// Sum of per-packet queueing delays (enqueue to start of service), ns.
    pub queue_delay_ns: [u128; 2],
    pub ecn_marked: u64,
    pub max_hpq_pkts: usize,
    pub max_lpq_bytes: u32,
    /// Integral of HPQ occupancy over time, packet-nanoseconds.
    pub hpq_area: u128,
}

impl PortStats {
    pub fn mean_queue_delay(&self, prio: Priority) -> Option<f64> {
        let i = prio_index(prio);
        (self.dequeued[i] > 0).then(|| self.queue_delay_ns[i] as f64 / self.dequeued[i] as f64)
    }

    pub fn tx_bytes(&self) -> u64 {
        self.tx_bytes_by_kind.iter().sum()
    }
}

fn prio_index(p: Priority) -> usize {
    match p {
        Priority::High => 0,
        Priority::Low => 1,
    }
}

#[derive(Clone, Debug)]
struct Queued {
    pkt: Packet,
    enq_at: SimTime,
}

#[derive(Clone, Debug)]
pub struct PriorityPort {
    cfg: PortConfig,
    hpq: VecDeque<Queued>,
    lpq: VecDeque<Queued>,
    lpq_bytes: u32,
    busy_until: SimTime,
    in_service: bool,
    area_mark: SimTime,
    pub stats: PortStats,
}

impl PriorityPort {
    pub fn new(cfg: PortConfig) -> Self {
        assert!(cfg.line_rate_bps > 0, "line rate must be positive");
        PriorityPort {
            cfg,
            hpq: VecDeque::new(),
            lpq: VecDeque::new(),
            lpq_bytes: 0,
            busy_until: SimTime::ZERO,
            in_service: false,
            area_mark: SimTime::ZERO,
            stats: PortStats::default(),
        }
    }

    pub fn config(&self) -> &PortConfig {
        &self.cfg
    }

    pub fn line_rate_bps(&self) -> u64 {
        self.cfg.line_rate_bps
    }

    /// Takes effect from the next transmission.
    pub fn set_line_rate(&mut self, bps: u64) {
        assert!(bps > 0, "line rate must be positive");
        self.cfg.line_rate_bps = bps;
    }

    pub fn hpq_len(&self) -> usize {
        self.hpq.len()
    }

    pub fn lpq_len(&self) -> usize {
        self.lpq.len()
    }

    pub fn lpq_bytes(&self) -> u32 {
        self.lpq_bytes
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn is_empty(&self) -> bool {
        self.hpq.is_empty() && self.lpq.is_empty()
    }

    pub fn in_service(&self) -> bool {
        self.in_service
    }

    fn touch_area(&mut self, now: SimTime) {
        if now > self.area_mark {
            let dt = (now - self.area_mark).as_nanos() as u128;
            self.stats.hpq_area += dt * self.hpq.len() as u128;
            self.area_mark = now;
        }
    }

    /// Time-weighted mean HPQ occupancy over `[0, now]`.
    pub fn mean_hpq_occupancy(&mut self, now: SimTime) -> f64 {
        self.touch_area(now);
        if now.as_nanos() == 0 {
            return 0.0;
        }
        self.stats.hpq_area as f64 / now.as_nanos() as f64
    }

    pub fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> EnqueueOutcome {
        debug_assert!(pkt.is_well_formed());
        self.touch_area(now);
        let pi = prio_index(pkt.priority);
        match pkt.priority {
            Priority::High => {
                if self.hpq.len() >= self.cfg.hpq_cap_pkts {
                    self.stats.dropped[pi] += 1;
                    return EnqueueOutcome::Dropped;
                }
                let occupancy = self.hpq.len() + 1;
                if let Some(k) = self.cfg.ecn_threshold_pkts {
                    if occupancy >= k && pkt.kind == PacketKind::Data {
                        pkt.ecn_marked = true;
                        self.stats.ecn_marked += 1;
                    }
                }
                self.hpq.push_back(Queued { pkt, enq_at: now });
                self.stats.max_hpq_pkts = self.stats.max_hpq_pkts.max(occupancy);
            }
            Priority::Low => {
                if self.lpq_bytes + pkt.size > self.cfg.lpq_cap_bytes {
                    self.stats.dropped[pi] += 1;
                    return EnqueueOutcome::Dropped;
                }
                self.lpq_bytes += pkt.size;
                self.lpq.push_back(Queued { pkt, enq_at: now });
                self.stats.max_lpq_bytes = self.stats.max_lpq_bytes.max(self.lpq_bytes);
            }
        }
        self.stats.enqueued[pi] += 1;
        EnqueueOutcome::Accepted
    }

    /// Picks the next packet under strict priority and marks the line busy
    /// for its serialization time. `None` means the port is idle.
    pub fn dequeue(&mut self, now: SimTime) -> Option<Packet> {
        assert!(now >= self.busy_until, "dequeue while mid-transmission");
        self.touch_area(now);
        let q = if let Some(q) = self.hpq.pop_front() {
            q
        } else {
            let q = self.lpq.pop_front()?;
            self.lpq_bytes -= q.pkt.size;
            q
        };
        let pi = prio_index(q.pkt.priority);
        self.stats.dequeued[pi] += 1;
        self.stats.queue_delay_ns[pi] += (now - q.enq_at).as_nanos() as u128;
        let k = q.pkt.kind.index();
        self.stats.tx_bytes_by_kind[k] += q.pkt.size as u64;
        self.stats.tx_pkts_by_kind[k] += 1;
        self.busy_until = now + SimTime::transmission(q.pkt.size, self.cfg.line_rate_bps);
        Some(q.pkt)
    }

    /// Starts serving the next packet if the line is free. Returns the packet
    /// and the instant its last bit leaves the port.
    pub fn try_start(&mut self, now: SimTime) -> Option<(Packet, SimTime)> {
        if self.in_service {
            return None;
        }
        let pkt = self.dequeue(now)?;
        self.in_service = true;
        Some((pkt, self.busy_until))
    }

    /// Marks the current transmission complete.
    pub fn finish(&mut self) {
        debug_assert!(self.in_service);
        self.in_service = false;
    }

    /// Packets currently buffered, per priority.
    pub fn resident(&self) -> [u64; 2] {
        [self.hpq.len() as u64, self.lpq.len() as u64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{FlowId, RouteId, SCOUT_BYTES};
    use proptest::prelude::*;

    fn data(id: u64) -> Packet {
        Packet::data(id, FlowId(0), 0, 1460, 1500, SimTime::ZERO, RouteId(0))
    }

    fn scout(id: u64) -> Packet {
        Packet::scout(id, FlowId(0), id, SCOUT_BYTES, SimTime::ZERO, RouteId(0))
    }

    fn port() -> PriorityPort {
        PriorityPort::new(PortConfig::new(10_000_000_000))
    }

    #[test]
    fn hpq_accepts_up_to_capacity() {
        let mut p = port();
        for i in 0..249 {
            assert_eq!(p.enqueue(data(i), SimTime::ZERO), EnqueueOutcome::Accepted);
        }
        assert_eq!(p.enqueue(data(249), SimTime::ZERO), EnqueueOutcome::Accepted);
        assert_eq!(p.hpq_len(), 250);
        assert_eq!(p.enqueue(data(250), SimTime::ZERO), EnqueueOutcome::Dropped);
        assert_eq!(p.stats.dropped, [1, 0]);
    }

    #[test]
    fn lpq_fills_to_exactly_640_bytes() {
        let mut p = port();
        for i in 0..9 {
            p.enqueue(scout(i), SimTime::ZERO);
        }
        assert_eq!(p.lpq_bytes(), 576);
        assert_eq!(p.enqueue(scout(9), SimTime::ZERO), EnqueueOutcome::Accepted);
        assert_eq!(p.lpq_bytes(), 640);
        assert_eq!(p.enqueue(scout(10), SimTime::ZERO), EnqueueOutcome::Dropped);
    }

    #[test]
    fn high_priority_served_first() {
        let mut p = port();
        p.enqueue(scout(1), SimTime::ZERO);
        p.enqueue(data(2), SimTime::ZERO);
        assert_eq!(p.dequeue(SimTime::ZERO).unwrap().id, 2);
    }

    #[test]
    fn scout_served_when_alone() {
        let mut p = port();
        p.enqueue(scout(1), SimTime::ZERO);
        let s = p.dequeue(SimTime::ZERO).unwrap();
        assert_eq!(s.kind, PacketKind::Scout);
        assert!(p.dequeue(p.busy_until()).is_none());
    }

    #[test]
    fn serialization_advances_busy_until() {
        let mut p = port();
        p.enqueue(data(1), SimTime::ZERO);
        p.dequeue(SimTime::ZERO);
        assert_eq!(p.busy_until(), SimTime::from_nanos(1200));
    }

    #[test]
    fn ecn_marks_at_threshold() {
        let mut cfg = PortConfig::new(10_000_000_000);
        cfg.ecn_threshold_pkts = Some(3);
        let mut p = PriorityPort::new(cfg);
        for i in 0..4 {
            p.enqueue(data(i), SimTime::ZERO);
        }
        let marks: Vec<bool> = (0..4)
            .map(|_| {
                let t = p.busy_until();
                p.dequeue(t).unwrap().ecn_marked
            })
            .collect();
        assert_eq!(marks, vec![false, false, true, true]);
    }

    #[derive(Clone, Debug)]
    enum Op {
        High,
        Low,
        Serve,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![Just(Op::High), Just(Op::Low), Just(Op::Serve)]
    }

    proptest! {
        #[test]
        fn strict_priority_and_conservation(ops in proptest::collection::vec(op(), 1..400)) {
            let mut cfg = PortConfig::new(10_000_000_000);
            cfg.hpq_cap_pkts = 8;
            let mut p = PriorityPort::new(cfg);
            let mut now = SimTime::ZERO;
            let mut id = 0;
            let mut window_bits = 0u64;
            let mut offered = [0u64; 2];
            for o in ops {
                id += 1;
                match o {
                    Op::High => { offered[0] += 1; p.enqueue(data(id), now); }
                    Op::Low => { offered[1] += 1; p.enqueue(scout(id), now); }
                    Op::Serve => {
                        now = now.max(p.busy_until());
                        let hpq_nonempty = p.hpq_len() > 0;
                        let any = !p.is_empty();
                        match p.dequeue(now) {
                            Some(pkt) => {
                                window_bits += pkt.size as u64 * 8;
                                if pkt.priority == Priority::Low {
                                    prop_assert!(!hpq_nonempty);
                                }
                            }
                            None => prop_assert!(!any),
                        }
                    }
                }
                prop_assert!(p.hpq_len() <= 8);
                prop_assert!(p.lpq_bytes() <= 640);
            }
            let s = &p.stats;
            let res = p.resident();
            for i in 0..2 {
                prop_assert_eq!(offered[i], s.dequeued[i] + s.dropped[i] + res[i]);
                prop_assert_eq!(s.enqueued[i], s.dequeued[i] + res[i]);
            }
            // Utilization ceiling over [0, busy_until].
            let horizon = p.busy_until().as_nanos() as u128;
            prop_assert!(window_bits as u128 * 1_000_000_000 <= 10_000_000_000u128 * horizon);
        }
    }
}
