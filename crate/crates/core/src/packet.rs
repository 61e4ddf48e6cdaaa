//! Simulated packets.

use crate::time::SimTime;
use serde::{Deserialize, Serialize};

/// Default Scout packet size in bytes.
pub const SCOUT_BYTES: u32 = 64;

/// Identifies a transport flow, a UDP source, or (for Scout traffic) a
/// Scout channel. The packet kind tells the receiving host which table to
/// look the id up in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketKind {
    Data,
    DataAck,
    Scout,
    ScoutAck,
}

impl PacketKind {
    pub fn index(self) -> usize {
        match self {
            PacketKind::Data => 0,
            PacketKind::DataAck => 1,
            PacketKind::Scout => 2,
            PacketKind::ScoutAck => 3,
        }
    }

    pub fn is_scout(self) -> bool {
        matches!(self, PacketKind::Scout | PacketKind::ScoutAck)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Priority {
    High,
    Low,
}

/// Index into the topology's route table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RouteId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: FlowId,
    pub kind: PacketKind,
    pub size: u32,
    pub priority: Priority,
    /// Sender timestamp. ACKs echo the timestamp of the packet they answer.
    pub send_ts: SimTime,
    pub ecn_marked: bool,
    /// Data: byte offset of the payload. DataAck: cumulative ACK (next
    /// expected byte). Scout/ScoutAck: per-channel Scout sequence number.
    pub seq: u64,
    /// Payload bytes carried (data packets only).
    pub payload: u32,
    /// DataAck only: the acknowledged packet carried an ECN mark.
    pub ecn_echo: bool,
    pub route: RouteId,
    /// Index of the next link to traverse on `route`.
    pub hop: u16,
}

impl Packet {
    #[allow(clippy::too_many_arguments)]
    pub fn data(
        id: u64,
        flow_id: FlowId,
        seq: u64,
        payload: u32,
        size: u32,
        send_ts: SimTime,
        route: RouteId,
    ) -> Self {
        assert!(size > 0);
        Packet {
            id,
            flow_id,
            kind: PacketKind::Data,
            size,
            priority: Priority::High,
            send_ts,
            ecn_marked: false,
            seq,
            payload,
            ecn_echo: false,
            route,
            hop: 0,
        }
    }

    pub fn data_ack(
        id: u64,
        flow_id: FlowId,
        cum_ack: u64,
        size: u32,
        echo_ts: SimTime,
        ecn_echo: bool,
        route: RouteId,
    ) -> Self {
        assert!(size > 0);
        Packet {
            id,
            flow_id,
            kind: PacketKind::DataAck,
            size,
            priority: Priority::High,
            send_ts: echo_ts,
            ecn_marked: false,
            seq: cum_ack,
            payload: 0,
            ecn_echo,
            route,
            hop: 0,
        }
    }

    pub fn scout(id: u64, channel: FlowId, scout_seq: u64, size: u32, send_ts: SimTime, route: RouteId) -> Self {
        assert!(size > 0);
        Packet {
            id,
            flow_id: channel,
            kind: PacketKind::Scout,
            size,
            priority: Priority::Low,
            send_ts,
            ecn_marked: false,
            seq: scout_seq,
            payload: 0,
            ecn_echo: false,
            route,
            hop: 0,
        }
    }

    /// Checks the kind/priority pairing every packet must satisfy.
    pub fn is_well_formed(&self) -> bool {
        let prio_ok = match self.kind {
            PacketKind::Data | PacketKind::DataAck => self.priority == Priority::High,
            PacketKind::Scout | PacketKind::ScoutAck => self.priority == Priority::Low,
        };
        prio_ok && self.size > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_respect_priority_classes() {
        let r = RouteId(0);
        let d = Packet::data(1, FlowId(0), 0, 1460, 1500, SimTime::ZERO, r);
        let a = Packet::data_ack(2, FlowId(0), 1460, 64, SimTime::ZERO, false, r);
        let s = Packet::scout(3, FlowId(0), 0, SCOUT_BYTES, SimTime::ZERO, r);
        assert_eq!(d.priority, Priority::High);
        assert_eq!(a.priority, Priority::High);
        assert_eq!(s.priority, Priority::Low);
        assert_eq!(s.size, 64);
        assert!(d.is_well_formed() && a.is_well_formed() && s.is_well_formed());
    }

    #[test]
    fn mislabeled_scout_is_not_well_formed() {
        let mut s = Packet::scout(3, FlowId(0), 0, SCOUT_BYTES, SimTime::ZERO, RouteId(0));
        s.priority = Priority::High;
        assert!(!s.is_well_formed());
    }
}
