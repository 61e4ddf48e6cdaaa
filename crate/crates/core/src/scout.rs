//! Scout probing: paced low-priority probes, receiver-side reflection, and
//! per-channel bookkeeping of outstanding probes.

use crate::packet::{FlowId, Packet, PacketKind, Priority, RouteId};
use crate::time::SimTime;
use crate::topology::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoutScopeKind {
    PerFlow,
    PerDatapath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoutScope {
    PerFlow(FlowId),
    PerDatapath { src: NodeId, dst: NodeId },
    /// Measurement-only channel that feeds no flow.
    Probe { src: NodeId, dst: NodeId },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoutError {
    #[error("expected a Scout packet, got {0:?}")]
    WrongKind(PacketKind),
    #[error("Scout packet is not low priority")]
    WrongPriority,
}

/// Scouts are only opened for flows at least as large as the initial window.
pub fn is_scout_eligible(flow_size: u64, w_init: u64) -> bool {
    flow_size >= w_init
}

/// Turns a Scout into its ACK, addressed back along `reverse_route`.
pub fn reflect(scout: &Packet, id: u64, reverse_route: RouteId) -> Result<Packet, ScoutError> {
    if scout.kind != PacketKind::Scout {
        return Err(ScoutError::WrongKind(scout.kind));
    }
    if scout.priority != Priority::Low {
        return Err(ScoutError::WrongPriority);
    }
    Ok(Packet {
        id,
        kind: PacketKind::ScoutAck,
        route: reverse_route,
        hop: 0,
        ecn_marked: false,
        ..scout.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScoutSignal {
    BandwidthGrant(f64),
    Busy(SimTime),
    Loss,
}

/// Per-flow deliveries of a channel signal. Grants are split evenly, Busy
/// and Loss reach every active flow unchanged.
pub fn distribute_signal(active: &BTreeSet<FlowId>, signal: ScoutSignal) -> Vec<(FlowId, ScoutSignal)> {
    let n = active.len();
    if n == 0 {
        return Vec::new();
    }
    let per_flow = match signal {
        ScoutSignal::BandwidthGrant(b) => ScoutSignal::BandwidthGrant(b / n as f64),
        other => other,
    };
    active.iter().map(|&f| (f, per_flow)).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScoutStats {
    pub sent: u64,
    pub acked: u64,
    pub lost: u64,
    /// ACKs for Scouts already declared lost or never sent.
    pub unmatched_acks: u64,
}

/// Outcome of matching a Scout ACK against the outstanding set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoutAckMatch {
    pub send_ts: SimTime,
    pub rtt: SimTime,
}

#[derive(Clone, Debug)]
pub struct ScoutChannel {
    pub id: ChannelId,
    pub scope: ScoutScope,
    pub src: NodeId,
    pub dst: NodeId,
    pub route: RouteId,
    pub injection_interval: SimTime,
    pub scout_bytes: u32,
    next_send_ts: SimTime,
    next_seq: u64,
    outstanding: BTreeMap<u64, SimTime>,
    active_flows: BTreeSet<FlowId>,
    last_rtt: Option<SimTime>,
    last_ack_at: Option<SimTime>,
    pub stats: ScoutStats,
}

impl ScoutChannel {
    pub fn new(id: ChannelId, scope: ScoutScope, src: NodeId, dst: NodeId, route: RouteId, interval: SimTime, scout_bytes: u32) -> Self {
        assert!(interval > SimTime::ZERO, "injection interval must be positive");
        let mut active_flows = BTreeSet::new();
        if let ScoutScope::PerFlow(f) = scope {
            active_flows.insert(f);
        }
        ScoutChannel {
            id,
            scope,
            src,
            dst,
            route,
            injection_interval: interval,
            scout_bytes,
            next_send_ts: SimTime::ZERO,
            next_seq: 0,
            outstanding: BTreeMap::new(),
            active_flows,
            last_rtt: None,
            last_ack_at: None,
            stats: ScoutStats::default(),
        }
    }

    pub fn active_flows(&self) -> &BTreeSet<FlowId> {
        &self.active_flows
    }

    pub fn add_flow(&mut self, f: FlowId) {
        self.active_flows.insert(f);
    }

    pub fn remove_flow(&mut self, f: FlowId) {
        self.active_flows.remove(&f);
    }

    /// Whether the channel should keep emitting.
    pub fn is_live(&self) -> bool {
        matches!(self.scope, ScoutScope::Probe { .. }) || !self.active_flows.is_empty()
    }

    pub fn next_send_ts(&self) -> SimTime {
        self.next_send_ts
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    pub fn oldest_unacked_send(&self) -> Option<SimTime> {
        self.outstanding.values().next().copied()
    }

    pub fn last_rtt(&self) -> Option<SimTime> {
        self.last_rtt
    }

    pub fn last_ack_at(&self) -> Option<SimTime> {
        self.last_ack_at
    }

    /// Scout delay: max of the last round trip and the oldest outstanding age.
    pub fn d_s(&self, now: SimTime) -> Option<SimTime> {
        crate::transport::dwtcp::compute_d_s(self.last_rtt, self.oldest_unacked_send(), now)
    }

    /// Emits a Scout if the pacing timer allows it.
    pub fn maybe_emit_scout(&mut self, now: SimTime, pkt_id: u64) -> Option<Packet> {
        if !self.is_live() || now < self.next_send_ts {
            return None;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.next_send_ts = now + self.injection_interval;
        self.outstanding.insert(seq, now);
        self.stats.sent += 1;
        Some(Packet::scout(pkt_id, FlowId(self.id.0), seq, self.scout_bytes, now, self.route))
    }

    /// Matches a returning ACK. `None` if the Scout was already resolved.
    pub fn on_ack(&mut self, seq: u64, now: SimTime) -> Option<ScoutAckMatch> {
        let Some(send_ts) = self.outstanding.remove(&seq) else {
            self.stats.unmatched_acks += 1;
            return None;
        };
        let rtt = now.saturating_sub(send_ts);
        self.last_rtt = Some(rtt);
        self.last_ack_at = Some(now);
        self.stats.acked += 1;
        Some(ScoutAckMatch { send_ts, rtt })
    }

    /// Declares a Scout lost if it is still outstanding.
    pub fn declare_lost(&mut self, seq: u64) -> bool {
        if self.outstanding.remove(&seq).is_some() {
            self.stats.lost += 1;
            true
        } else {
            false
        }
    }

    /// Outstanding Scouts sent before `seq`. Scouts of one channel share a
    /// path and a FIFO class, so once `seq` is acknowledged these are gone.
    pub fn overtaken_by(&self, seq: u64) -> Vec<u64> {
        self.outstanding.range(..seq).map(|(&s, _)| s).collect()
    }

    pub fn is_outstanding(&self, seq: u64) -> bool {
        self.outstanding.contains_key(&seq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverheadReport {
    pub scout_bytes: u64,
    pub data_bytes: u64,
    pub ratio: f64,
}

/// Scout share of the bytes carried by a link.
pub fn overhead_report(scout_bytes: u64, data_bytes: u64) -> OverheadReport {
    let total = scout_bytes + data_bytes;
    let ratio = if total == 0 { 0.0 } else { scout_bytes as f64 / total as f64 };
    OverheadReport {
        scout_bytes,
        data_bytes,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(interval_us: u64) -> ScoutChannel {
        ScoutChannel::new(
            ChannelId(0),
            ScoutScope::PerFlow(FlowId(7)),
            NodeId(0),
            NodeId(1),
            RouteId(0),
            SimTime::from_micros(interval_us),
            64,
        )
    }

    #[test]
    fn pacing_allows_one_scout_per_interval() {
        let mut c = channel(100);
        let t = SimTime::from_micros(5);
        assert!(c.maybe_emit_scout(t, 1).is_some());
        assert!(c.maybe_emit_scout(t, 2).is_none());
        assert!(c.maybe_emit_scout(SimTime::from_micros(104), 3).is_none());
        let s = c.maybe_emit_scout(SimTime::from_micros(105), 4).unwrap();
        assert_eq!(s.seq, 1);
        assert_eq!(s.priority, Priority::Low);
        assert_eq!(s.size, 64);
    }

    #[test]
    fn one_second_of_pacing_emits_ten_thousand() {
        let mut c = channel(100);
        let mut n = 0;
        let mut t = SimTime::ZERO;
        while t < SimTime::from_secs(1) {
            if c.maybe_emit_scout(t, n).is_some() {
                n += 1;
            }
            t = c.next_send_ts();
        }
        assert_eq!(n, 10_000);
    }

    #[test]
    fn idle_datapath_channel_is_silent() {
        let mut c = ScoutChannel::new(
            ChannelId(1),
            ScoutScope::PerDatapath { src: NodeId(0), dst: NodeId(1) },
            NodeId(0),
            NodeId(1),
            RouteId(0),
            SimTime::from_micros(100),
            64,
        );
        assert!(c.maybe_emit_scout(SimTime::ZERO, 0).is_none());
        c.add_flow(FlowId(3));
        assert!(c.maybe_emit_scout(SimTime::ZERO, 0).is_some());
    }

    #[test]
    fn eligibility_boundary() {
        assert!(is_scout_eligible(50_000, 15_000));
        assert!(!is_scout_eligible(10_000, 15_000));
        assert!(is_scout_eligible(15_000, 15_000));
    }

    #[test]
    fn reflect_echoes_timestamp() {
        let s = Packet::scout(1, FlowId(0), 9, 64, SimTime::from_micros(3), RouteId(0));
        let a = reflect(&s, 2, RouteId(1)).unwrap();
        assert_eq!(a.kind, PacketKind::ScoutAck);
        assert_eq!(a.send_ts, SimTime::from_micros(3));
        assert_eq!(a.seq, 9);
        assert_eq!(a.priority, Priority::Low);
        assert_eq!(a.route, RouteId(1));
        assert_eq!(reflect(&a, 3, RouteId(0)), Err(ScoutError::WrongKind(PacketKind::ScoutAck)));
    }

    #[test]
    fn signal_distribution() {
        let four: BTreeSet<FlowId> = (0..4).map(FlowId).collect();
        let out = distribute_signal(&four, ScoutSignal::BandwidthGrant(1280.0));
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|(_, s)| *s == ScoutSignal::BandwidthGrant(320.0)));
        let three: BTreeSet<FlowId> = (0..3).map(FlowId).collect();
        let d = SimTime::from_micros(300);
        let out = distribute_signal(&three, ScoutSignal::Busy(d));
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|(_, s)| *s == ScoutSignal::Busy(d)));
        let one: BTreeSet<FlowId> = [FlowId(9)].into();
        assert_eq!(distribute_signal(&one, ScoutSignal::BandwidthGrant(1280.0)), vec![(FlowId(9), ScoutSignal::BandwidthGrant(1280.0))]);
        assert!(distribute_signal(&BTreeSet::new(), ScoutSignal::Loss).is_empty());
    }

    #[test]
    fn ack_and_loss_resolve_once() {
        let mut c = channel(100);
        c.maybe_emit_scout(SimTime::ZERO, 0);
        c.maybe_emit_scout(SimTime::from_micros(100), 1);
        assert_eq!(c.oldest_unacked_send(), Some(SimTime::ZERO));
        let m = c.on_ack(0, SimTime::from_micros(150)).unwrap();
        assert_eq!(m.rtt, SimTime::from_micros(150));
        assert!(c.on_ack(0, SimTime::from_micros(151)).is_none());
        assert!(c.declare_lost(1));
        assert!(!c.declare_lost(1));
        assert!(c.on_ack(1, SimTime::from_micros(500)).is_none());
        assert_eq!(c.stats.unmatched_acks, 2);
        assert_eq!(c.stats.acked + c.stats.lost, c.stats.sent);
    }

    #[test]
    fn d_s_uses_outstanding_age() {
        let mut c = channel(100);
        c.maybe_emit_scout(SimTime::ZERO, 0);
        c.on_ack(0, SimTime::from_micros(150));
        c.maybe_emit_scout(SimTime::from_micros(600), 1);
        assert_eq!(c.d_s(SimTime::from_micros(1000)), Some(SimTime::from_micros(400)));
    }

    #[test]
    fn worst_case_overhead() {
        let r = overhead_report(64, 1500);
        assert_eq!(r.ratio, 64.0 / 1564.0);
        assert!((r.ratio - 0.0409).abs() < 1e-4);
        assert_eq!(overhead_report(0, 1_000_000).ratio, 0.0);
    }
}
