//! Congestion control state machines and the reliable-delivery substrate
//! they share.

pub mod dctcp;
pub mod dwtcp;
pub mod receiver;
pub mod reno;
pub mod sender;

use serde::{Deserialize, Serialize};

pub use dctcp::DctcpFlowState;
pub use dwtcp::{DwtcpFlowState, DwtcpParams, ScoutCoefficient, SqrtWindowUnit};
pub use receiver::TcpReceiver;
pub use reno::RenoFlowState;
pub use sender::{AckOutcome, RtoPolicy, TcpSender};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    SlowStart,
    CongestionAvoidance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    TripleDup,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dwtcp,
    Dctcp,
    Newreno,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Dwtcp => "dwtcp",
            Protocol::Dctcp => "dctcp",
            Protocol::Newreno => "newreno",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CongestionControl {
    Newreno(RenoFlowState),
    Dctcp(DctcpFlowState),
    Dwtcp(DwtcpFlowState),
}

impl CongestionControl {
    pub fn window(&self) -> f64 {
        match self {
            CongestionControl::Newreno(s) => s.w,
            CongestionControl::Dctcp(s) => s.w,
            CongestionControl::Dwtcp(s) => s.w,
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            CongestionControl::Newreno(s) => s.phase,
            CongestionControl::Dctcp(s) => s.phase,
            CongestionControl::Dwtcp(s) => s.phase,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            CongestionControl::Dwtcp(s) => Some(s.alpha.value()),
            _ => None,
        }
    }

    /// Window update for one ACK of new data. Returns true if the window
    /// was cut (DCTCP only).
    pub fn on_new_ack(&mut self, ecn_echo: bool, window_boundary: bool) -> bool {
        match self {
            CongestionControl::Newreno(s) => {
                s.on_data_ack();
                false
            }
            CongestionControl::Dctcp(s) => s.on_ack(ecn_echo, window_boundary),
            CongestionControl::Dwtcp(s) => {
                s.on_data_ack();
                false
            }
        }
    }

    pub fn on_packet_loss(&mut self, kind: LossKind) {
        match self {
            CongestionControl::Newreno(s) => s.on_packet_loss(kind),
            CongestionControl::Dctcp(s) => s.on_packet_loss(kind),
            CongestionControl::Dwtcp(s) => s.on_packet_loss(kind),
        }
    }

    pub fn as_dwtcp(&self) -> Option<&DwtcpFlowState> {
        match self {
            CongestionControl::Dwtcp(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_dwtcp_mut(&mut self) -> Option<&mut DwtcpFlowState> {
        match self {
            CongestionControl::Dwtcp(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowEventKind {
    Ack,
    ScoutAck,
    Decrease,
    Loss,
    Timeout,
}

/// One row of the per-flow event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub time_ns: u64,
    pub flow_id: u32,
    pub event: FlowEventKind,
    pub w_bytes: f64,
    pub alpha: Option<f64>,
    pub d_s_ns: Option<u64>,
}
