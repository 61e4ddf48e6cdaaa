use super::{LossKind, Phase};

/// TCP NewReno window state. Duplicate-ACK counting and recovery live in
/// the shared sender.
#[derive(Clone, Debug, PartialEq)]
pub struct RenoFlowState {
    pub w: f64,
    pub ssthresh: f64,
    pub phase: Phase,
    pub seg: f64,
}

impl RenoFlowState {
    pub fn new(w_init: f64, seg: f64) -> Self {
        RenoFlowState {
            w: w_init.max(seg),
            ssthresh: f64::INFINITY,
            phase: Phase::SlowStart,
            seg,
        }
    }

    pub fn on_data_ack(&mut self) {
        additive_increase(&mut self.w, &mut self.phase, self.ssthresh, self.seg);
    }

    pub fn on_packet_loss(&mut self, kind: LossKind) {
        loss_response(&mut self.w, &mut self.ssthresh, &mut self.phase, kind, self.seg);
    }
}

/// Slow start adds one segment per ACK; congestion avoidance adds
/// `seg²/w`, i.e. one segment per round trip.
pub(crate) fn additive_increase(w: &mut f64, phase: &mut Phase, ssthresh: f64, seg: f64) {
    match phase {
        Phase::SlowStart => {
            *w += seg;
            if *w >= ssthresh {
                *phase = Phase::CongestionAvoidance;
            }
        }
        Phase::CongestionAvoidance => *w += seg * seg / *w,
    }
}

pub(crate) fn loss_response(w: &mut f64, ssthresh: &mut f64, phase: &mut Phase, kind: LossKind, seg: f64) {
    *ssthresh = (*w / 2.0).max(seg);
    match kind {
        LossKind::TripleDup => {
            *w = *ssthresh;
            *phase = Phase::CongestionAvoidance;
        }
        LossKind::Timeout => {
            *w = seg;
            *phase = Phase::SlowStart;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_dup_halves() {
        let mut s = RenoFlowState::new(100_000.0, 1500.0);
        s.on_packet_loss(LossKind::TripleDup);
        assert_eq!(s.w, 50_000.0);
        assert_eq!(s.phase, Phase::CongestionAvoidance);
    }

    #[test]
    fn timeout_resets_to_one_segment() {
        let mut s = RenoFlowState::new(100_000.0, 1500.0);
        s.on_packet_loss(LossKind::Timeout);
        assert_eq!(s.w, 1500.0);
        assert_eq!(s.ssthresh, 50_000.0);
        assert_eq!(s.phase, Phase::SlowStart);
    }

    #[test]
    fn slow_start_then_avoidance() {
        let mut s = RenoFlowState::new(3000.0, 1500.0);
        s.ssthresh = 4500.0;
        s.on_data_ack();
        assert_eq!(s.w, 4500.0);
        assert_eq!(s.phase, Phase::CongestionAvoidance);
        s.on_data_ack();
        assert!((s.w - 5000.0).abs() < 1e-9);
    }
}
