//! DWTCP window control driven by Scout signals.
//!
//! Data ACKs grow the window like TCP. Scout ACKs add `α·S` bytes and double
//! the Scout coefficient `α`; Scout losses halve it. When the Scout delay
//! `d_s` exceeds the target `d_t`, the window is cut multiplicatively by
//! `1 − β·√w·(d_s − d_t)/d_s`, clamped to at least one half, and at most once
//! per base round trip.

use super::reno::{additive_increase, loss_response};
use super::{LossKind, Phase};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

/// Unit the window is expressed in under the square root of the decrease law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqrtWindowUnit {
    Segments,
    Bytes,
}

/// Spacing enforced between two decreases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecreaseGate {
    /// The path's zero-load round trip.
    BaseRtt,
    /// The flow's smoothed RTT; the base round trip until a sample exists.
    MeasuredRtt,
}

/// Smallest multiplicative factor a single decrease may apply.
pub const MIN_DECREASE_FACTOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwtcpParams {
    pub beta: f64,
    /// Busyness allowance `K`, in data-packet service times.
    pub k: f64,
    pub alpha_init: f64,
    pub alpha_max: f64,
    pub scout_bytes: u32,
    pub sqrt_unit: SqrtWindowUnit,
    pub decrease_gate: DecreaseGate,
    /// Per-ACK window doubling in slow start instead of one segment per ACK.
    pub literal_slow_start: bool,
}

impl Default for DwtcpParams {
    fn default() -> Self {
        DwtcpParams {
            beta: 0.001,
            k: 100.0,
            alpha_init: 20.0,
            alpha_max: 512.0,
            scout_bytes: crate::packet::SCOUT_BYTES,
            sqrt_unit: SqrtWindowUnit::Bytes,
            decrease_gate: DecreaseGate::MeasuredRtt,
            literal_slow_start: false,
        }
    }
}

impl DwtcpParams {
    /// `β ≈ 1/(2·√(BDP/N))` with the BDP in packets.
    pub fn suggested_beta(bdp_pkts: f64, flows: f64) -> f64 {
        assert!(bdp_pkts > 0.0 && flows > 0.0);
        1.0 / (2.0 * (bdp_pkts / flows).sqrt())
    }
}

/// Target Scout delay `τ + K·L/C`.
pub fn compute_d_t(tau: SimTime, k: f64, pkt_bytes: u32, line_rate_bps: u64) -> SimTime {
    assert!(line_rate_bps > 0 && k >= 0.0);
    let busy_s = k * pkt_bytes as f64 * 8.0 / line_rate_bps as f64;
    tau + SimTime::from_secs_f64(busy_s)
}

/// Scout delay: the larger of the last measured Scout round trip and the age
/// of the oldest Scout still awaiting its ACK. `None` until a Scout is out.
pub fn compute_d_s(last_rtt: Option<SimTime>, oldest_unacked_send: Option<SimTime>, now: SimTime) -> Option<SimTime> {
    let age = oldest_unacked_send.map(|t| now.saturating_sub(t));
    match (last_rtt, age) {
        (None, None) => None,
        (Some(a), None) | (None, Some(a)) => Some(a),
        (Some(a), Some(b)) => Some(a.max(b)),
    }
}

/// Clamped multiplicative decrease factor for a window of `w_units`.
pub fn decrease_factor(w_units: f64, beta: f64, d_s: SimTime, d_t: SimTime) -> f64 {
    if d_s <= d_t {
        return 1.0;
    }
    let ds = d_s.as_nanos() as f64;
    let dt = d_t.as_nanos() as f64;
    (1.0 - beta * w_units.sqrt() * (ds - dt) / ds).max(MIN_DECREASE_FACTOR)
}

/// Dynamic Scout coefficient, kept within `[1, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoutCoefficient {
    value: f64,
    max: f64,
}

impl ScoutCoefficient {
    pub const MIN: f64 = 1.0;

    pub fn new(init: f64, max: f64) -> Self {
        assert!(max >= Self::MIN, "alpha_max must be at least 1");
        ScoutCoefficient {
            value: init.clamp(Self::MIN, max),
            max,
        }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn double(&mut self) {
        self.value = (self.value * 2.0).min(self.max);
    }

    pub fn halve(&mut self) {
        self.value = (self.value / 2.0).max(Self::MIN);
    }
}

/// Which branch of the inter-packet-gap law fired.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IpgOutcome {
    Increased,
    Decreased { factor: f64 },
    /// A decrease was due but the once-per-round-trip gate held it back.
    Gated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DwtcpFlowState {
    pub w: f64,
    pub ssthresh: f64,
    pub alpha: ScoutCoefficient,
    pub beta: f64,
    pub d_t: SimTime,
    /// Time of the last decrease (initialized to the flow start).
    pub det: SimTime,
    pub base_rtt: SimTime,
    pub decrease_gate: DecreaseGate,
    /// Latest smoothed RTT reported by the sender.
    pub rtt_sample: Option<SimTime>,
    pub k: f64,
    pub pkt_bytes: u32,
    pub scout_bytes: u32,
    pub phase: Phase,
    pub sqrt_unit: SqrtWindowUnit,
    pub literal_slow_start: bool,
    pub last_scout_send_ts: Option<SimTime>,
    pub last_scout_ack_ts: Option<SimTime>,
    pub oldest_unacked_scout_ts: Option<SimTime>,
}

impl DwtcpFlowState {
    pub fn new(params: &DwtcpParams, w_init: f64, pkt_bytes: u32, base_rtt: SimTime, path_bps: u64, now: SimTime) -> Self {
        let seg = pkt_bytes as f64;
        DwtcpFlowState {
            w: w_init.max(seg),
            ssthresh: f64::INFINITY,
            alpha: ScoutCoefficient::new(params.alpha_init, params.alpha_max),
            beta: params.beta,
            d_t: compute_d_t(base_rtt, params.k, pkt_bytes, path_bps),
            det: now,
            base_rtt,
            decrease_gate: params.decrease_gate,
            rtt_sample: None,
            k: params.k,
            pkt_bytes,
            scout_bytes: params.scout_bytes,
            phase: Phase::SlowStart,
            sqrt_unit: params.sqrt_unit,
            literal_slow_start: params.literal_slow_start,
            last_scout_send_ts: None,
            last_scout_ack_ts: None,
            oldest_unacked_scout_ts: None,
        }
    }

    /// Minimum spacing between decreases.
    pub fn gate_interval(&self) -> SimTime {
        match (self.decrease_gate, self.rtt_sample) {
            (DecreaseGate::MeasuredRtt, Some(rtt)) => rtt,
            _ => self.base_rtt,
        }
    }

    fn seg(&self) -> f64 {
        self.pkt_bytes as f64
    }

    fn w_units(&self) -> f64 {
        match self.sqrt_unit {
            SqrtWindowUnit::Segments => self.w / self.seg(),
            SqrtWindowUnit::Bytes => self.w,
        }
    }

    fn check_slow_start_exit(&mut self) {
        if self.phase == Phase::SlowStart && self.w >= self.ssthresh {
            self.phase = Phase::CongestionAvoidance;
        }
    }

    /// Scout delay as seen by this flow.
    pub fn d_s(&self, now: SimTime) -> Option<SimTime> {
        let rtt = match (self.last_scout_send_ts, self.last_scout_ack_ts) {
            (Some(s), Some(a)) => Some(a.saturating_sub(s)),
            _ => None,
        };
        compute_d_s(rtt, self.oldest_unacked_scout_ts, now)
    }

    pub fn on_data_ack(&mut self) {
        if self.literal_slow_start && self.phase == Phase::SlowStart {
            self.w *= 2.0;
            self.check_slow_start_exit();
        } else {
            let seg = self.seg();
            additive_increase(&mut self.w, &mut self.phase, self.ssthresh, seg);
        }
    }

    /// Bandwidth-availability grant from a Scout ACK sent at `send_ts`.
    pub fn on_scout_ack(&mut self, send_ts: SimTime, now: SimTime) {
        let grant = self.alpha.value() * self.scout_bytes as f64;
        if self.literal_slow_start && self.phase == Phase::SlowStart {
            self.w *= 2.0;
        }
        self.w += grant;
        self.alpha.double();
        self.last_scout_send_ts = Some(send_ts);
        self.last_scout_ack_ts = Some(now);
        self.check_slow_start_exit();
    }

    /// Adds a share of a grant that was computed elsewhere (per-datapath mode).
    pub fn apply_grant(&mut self, bytes: f64) {
        self.w += bytes;
        self.check_slow_start_exit();
    }

    /// Applies the delay-triggered cut if the gate allows it. Returns the
    /// factor applied, or `None` if gated.
    pub fn on_scout_delayed(&mut self, d_s: SimTime, now: SimTime) -> Option<f64> {
        if d_s <= self.d_t || now < self.det + self.gate_interval() {
            return None;
        }
        let factor = decrease_factor(self.w_units(), self.beta, d_s, self.d_t);
        Some(self.apply_decrease(factor, now))
    }

    fn apply_decrease(&mut self, factor: f64, now: SimTime) -> f64 {
        let seg = self.seg();
        self.ssthresh = self.w;
        self.w = (self.w * factor).max(seg);
        self.det = now;
        self.phase = Phase::CongestionAvoidance;
        factor
    }

    pub fn on_scout_loss(&mut self) {
        self.alpha.halve();
    }

    pub fn on_packet_loss(&mut self, kind: LossKind) {
        let seg = self.seg();
        loss_response(&mut self.w, &mut self.ssthresh, &mut self.phase, kind, seg);
    }

    /// Variant law that also reacts to the Scout inter-arrival gap.
    pub fn decrease_ipg_variant(&mut self, d_s: SimTime, ipg_s: SimTime, ipg_t: SimTime, now: SimTime) -> IpgOutcome {
        let ds = d_s.as_nanos() as f64;
        let dt = self.d_t.as_nanos() as f64;
        let gs = ipg_s.as_nanos() as f64;
        let gt = ipg_t.as_nanos() as f64;
        let delay_hit = d_s > self.d_t;
        let gap_hit = ipg_s > ipg_t;
        let signal = match (delay_hit, gap_hit) {
            (true, true) => (ds - dt) * (gs - gt) / (ds * gs),
            (false, true) => ((gs - gt) / gs).powi(2),
            (true, false) => ((ds - dt) / ds).powi(2),
            (false, false) => {
                self.w += self.seg() + self.alpha.value() * self.scout_bytes as f64;
                self.check_slow_start_exit();
                return IpgOutcome::Increased;
            }
        };
        if now < self.det + self.gate_interval() {
            return IpgOutcome::Gated;
        }
        let factor = (1.0 - 2.0 * self.beta * self.w_units().sqrt() * signal).max(MIN_DECREASE_FACTOR);
        IpgOutcome::Decreased {
            factor: self.apply_decrease(factor, now),
        }
    }
}
