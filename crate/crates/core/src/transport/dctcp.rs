use super::reno::{additive_increase, loss_response};
use super::{LossKind, Phase};

/// DCTCP baseline: ECN-fraction EWMA with a once-per-window cut of
/// `w·(1 − ewma/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DctcpFlowState {
    pub w: f64,
    pub ssthresh: f64,
    pub ecn_frac_ewma: f64,
    pub g: f64,
    pub phase: Phase,
    pub seg: f64,
    acked: u64,
    marked: u64,
}

impl DctcpFlowState {
    pub fn new(w_init: f64, seg: f64, g: f64, initial_ewma: f64) -> Self {
        assert!((0.0..=1.0).contains(&g));
        assert!((0.0..=1.0).contains(&initial_ewma));
        DctcpFlowState {
            w: w_init.max(seg),
            ssthresh: f64::INFINITY,
            ecn_frac_ewma: initial_ewma,
            g,
            phase: Phase::SlowStart,
            seg,
            acked: 0,
            marked: 0,
        }
    }

    /// Handles one new ACK. Returns true if the window was cut.
    pub fn on_ack(&mut self, ecn_echo: bool, window_boundary: bool) -> bool {
        self.acked += 1;
        if ecn_echo {
            self.marked += 1;
        }
        if !window_boundary {
            additive_increase(&mut self.w, &mut self.phase, self.ssthresh, self.seg);
            return false;
        }
        let frac = self.marked as f64 / self.acked as f64;
        self.ecn_frac_ewma = ((1.0 - self.g) * self.ecn_frac_ewma + self.g * frac).clamp(0.0, 1.0);
        self.acked = 0;
        self.marked = 0;
        if frac > 0.0 {
            self.w = (self.w * (1.0 - self.ecn_frac_ewma / 2.0)).max(self.seg);
            self.ssthresh = self.w;
            self.phase = Phase::CongestionAvoidance;
            true
        } else {
            additive_increase(&mut self.w, &mut self.phase, self.ssthresh, self.seg);
            false
        }
    }

    pub fn on_packet_loss(&mut self, kind: LossKind) {
        loss_response(&mut self.w, &mut self.ssthresh, &mut self.phase, kind, self.seg);
    }
}
