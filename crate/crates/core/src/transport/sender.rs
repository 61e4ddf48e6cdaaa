//! Byte-sequenced sender with NewReno fast retransmit/recovery and a
//! go-back-N retransmission timeout. The window itself is owned by the
//! congestion controller.

use super::{CongestionControl, LossKind};
use crate::packet::FlowId;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

pub const HEADER_BYTES: u32 = 40;
const DUP_ACK_THRESHOLD: u32 = 3;
const SRTT_GAIN: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RtoPolicy {
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    pub srtt_multiplier: f64,
}

impl Default for RtoPolicy {
    fn default() -> Self {
        RtoPolicy {
            min_rto: SimTime::from_millis(1),
            max_rto: SimTime::from_millis(200),
            srtt_multiplier: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SenderStats {
    pub segments_sent: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub payload: u32,
    pub retransmit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AckOutcome {
    /// New data acknowledged.
    Advanced { acked_bytes: u64, window_cut: bool, completed: bool },
    Duplicate { fast_retransmit: bool },
    Stale,
}

#[derive(Clone, Debug)]
pub struct TcpSender {
    pub flow: FlowId,
    pub cc: CongestionControl,
    pkt_bytes: u32,
    mss: u32,
    size: Option<u64>,
    stopped: bool,
    snd_una: u64,
    snd_nxt: u64,
    snd_max: u64,
    dup_acks: u32,
    recovery_point: Option<u64>,
    rto_guard: Option<u64>,
    pending_retx: Option<u64>,
    srtt_ns: Option<f64>,
    backoff: u32,
    rto: RtoPolicy,
    rto_deadline: Option<SimTime>,
    window_end: u64,
    completed_at: Option<SimTime>,
    pub stats: SenderStats,
}

impl TcpSender {
    /// `size = None` is a long-lived flow that runs until `stop`.
    pub fn new(flow: FlowId, cc: CongestionControl, pkt_bytes: u32, size: Option<u64>, rto: RtoPolicy) -> Self {
        assert!(pkt_bytes > HEADER_BYTES);
        TcpSender {
            flow,
            cc,
            pkt_bytes,
            mss: pkt_bytes - HEADER_BYTES,
            size,
            stopped: false,
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            dup_acks: 0,
            recovery_point: None,
            rto_guard: None,
            pending_retx: None,
            srtt_ns: None,
            backoff: 0,
            rto,
            rto_deadline: None,
            window_end: 0,
            completed_at: None,
            stats: SenderStats::default(),
        }
    }

    pub fn mss(&self) -> u32 {
        self.mss
    }

    pub fn size(&self) -> Option<u64> {
        self.size
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt_ns.map(|n| SimTime::from_nanos(n.round() as u64))
    }

    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    pub fn in_recovery(&self) -> bool {
        self.recovery_point.is_some()
    }

    pub fn completed_at(&self) -> Option<SimTime> {
        self.completed_at
    }

    pub fn is_complete(&self) -> bool {
        self.completed_at.is_some()
    }

    /// Wire size of a segment carrying `payload` bytes.
    pub fn wire_size(&self, payload: u32) -> u32 {
        payload + HEADER_BYTES
    }

    pub fn inflight_pkts(&self) -> u64 {
        (self.snd_nxt - self.snd_una).div_ceil(self.mss as u64)
    }

    pub fn current_rto(&self) -> SimTime {
        let base = match self.srtt_ns {
            Some(s) => SimTime::from_nanos((s * self.rto.srtt_multiplier) as u64).max(self.rto.min_rto),
            None => self.rto.min_rto,
        };
        let scaled = base.as_nanos().saturating_mul(1u64 << self.backoff.min(30));
        SimTime::from_nanos(scaled).min(self.rto.max_rto)
    }

    /// Stops a long-lived flow from sending new data.
    pub fn stop(&mut self, now: SimTime) {
        self.stopped = true;
        self.check_completion(now);
    }

    fn data_limit(&self) -> Option<u64> {
        if self.stopped {
            Some(self.snd_max)
        } else {
            self.size
        }
    }

    fn check_completion(&mut self, now: SimTime) -> bool {
        if self.completed_at.is_some() {
            return false;
        }
        let done = match self.data_limit() {
            Some(limit) => self.snd_una >= limit,
            None => false,
        };
        if done {
            self.completed_at = Some(now);
            self.rto_deadline = None;
        }
        done
    }

    fn segment_len(&self, seq: u64) -> u32 {
        let limit = self.data_limit().unwrap_or(u64::MAX);
        (limit.saturating_sub(seq)).min(self.mss as u64) as u32
    }

    /// Next segment the window allows, if any. Callers loop until `None`.
    pub fn next_segment(&mut self, now: SimTime) -> Option<Segment> {
        if self.completed_at.is_some() {
            return None;
        }
        if let Some(seq) = self.pending_retx.take() {
            let payload = self.segment_len(seq).max(1);
            self.note_sent(seq, payload, now);
            return Some(Segment { seq, payload, retransmit: true });
        }
        let limit = self.data_limit().unwrap_or(u64::MAX);
        if self.snd_nxt >= limit {
            return None;
        }
        let next_pkts = self.inflight_pkts() + 1;
        if (next_pkts * self.pkt_bytes as u64) as f64 > self.cc.window() + 1e-6 {
            return None;
        }
        let seq = self.snd_nxt;
        let payload = self.segment_len(seq);
        let retransmit = seq < self.snd_max;
        self.snd_nxt += payload as u64;
        self.note_sent(seq, payload, now);
        Some(Segment { seq, payload, retransmit })
    }

    fn note_sent(&mut self, seq: u64, payload: u32, now: SimTime) {
        let end = seq + payload as u64;
        if seq < self.snd_max {
            self.stats.retransmits += 1;
        }
        self.snd_max = self.snd_max.max(end);
        self.stats.segments_sent += 1;
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.current_rto());
        }
    }

    fn rearm(&mut self, now: SimTime) {
        self.rto_deadline = if self.snd_una < self.snd_max {
            Some(now + self.current_rto())
        } else {
            None
        };
    }

    /// Processes a cumulative ACK. `echo_ts` is the send time of the data
    /// segment that triggered it.
    pub fn on_ack(&mut self, cum_ack: u64, echo_ts: SimTime, ecn_echo: bool, now: SimTime) -> AckOutcome {
        if self.completed_at.is_some() {
            return AckOutcome::Stale;
        }
        if cum_ack > self.snd_una {
            let acked = cum_ack - self.snd_una;
            self.snd_una = cum_ack;
            self.snd_nxt = self.snd_nxt.max(cum_ack);
            self.snd_max = self.snd_max.max(cum_ack);
            self.dup_acks = 0;
            self.backoff = 0;
            let sample = now.saturating_sub(echo_ts).as_nanos() as f64;
            self.srtt_ns = Some(match self.srtt_ns {
                Some(s) => (1.0 - SRTT_GAIN) * s + SRTT_GAIN * sample,
                None => sample,
            });
            let srtt = self.srtt();
            if let Some(dw) = self.cc.as_dwtcp_mut() {
                dw.rtt_sample = srtt;
            }
            if self.rto_guard.is_some_and(|g| cum_ack >= g) {
                self.rto_guard = None;
            }
            let mut window_cut = false;
            match self.recovery_point {
                Some(point) if cum_ack < point => {
                    self.pending_retx = Some(self.snd_una);
                }
                Some(_) => {
                    self.recovery_point = None;
                }
                None => {
                    let boundary = self.snd_una >= self.window_end;
                    if boundary {
                        self.window_end = self.snd_nxt;
                    }
                    window_cut = self.cc.on_new_ack(ecn_echo, boundary);
                }
            }
            self.rearm(now);
            let completed = self.check_completion(now);
            return AckOutcome::Advanced {
                acked_bytes: acked,
                window_cut,
                completed,
            };
        }
        if cum_ack == self.snd_una && self.snd_una < self.snd_max {
            self.dup_acks += 1;
            let fast = self.dup_acks == DUP_ACK_THRESHOLD && self.recovery_point.is_none() && self.rto_guard.is_none();
            if fast {
                self.cc.on_packet_loss(LossKind::TripleDup);
                self.recovery_point = Some(self.snd_max);
                self.pending_retx = Some(self.snd_una);
                self.stats.fast_retransmits += 1;
            }
            return AckOutcome::Duplicate { fast_retransmit: fast };
        }
        AckOutcome::Stale
    }

    /// Retransmission timeout. Returns false if the deadline has not been
    /// reached or nothing is outstanding.
    pub fn on_timeout(&mut self, now: SimTime) -> bool {
        match self.rto_deadline {
            Some(d) if now >= d && self.completed_at.is_none() => {}
            _ => return false,
        }
        self.cc.on_packet_loss(LossKind::Timeout);
        self.stats.timeouts += 1;
        self.backoff += 1;
        self.rto_guard = Some(self.snd_max);
        self.recovery_point = None;
        self.pending_retx = None;
        self.dup_acks = 0;
        self.snd_nxt = self.snd_una;
        self.window_end = self.snd_una;
        self.rto_deadline = Some(now + self.current_rto());
        true
    }
}
