use std::collections::BTreeMap;

/// Cumulative-ACK receiver with an out-of-order buffer. The advertised
/// window is unbounded.
#[derive(Clone, Debug, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    ooo: BTreeMap<u64, u32>,
    duplicate_segments: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Next byte expected in order, i.e. the cumulative ACK.
    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn buffered_segments(&self) -> usize {
        self.ooo.len()
    }

    pub fn duplicate_segments(&self) -> u64 {
        self.duplicate_segments
    }

    /// Accepts a segment and returns the cumulative ACK to send back.
    pub fn on_data(&mut self, seq: u64, len: u32) -> u64 {
        let end = seq + len as u64;
        if end <= self.rcv_nxt {
            self.duplicate_segments += 1;
            return self.rcv_nxt;
        }
        if seq > self.rcv_nxt {
            let slot = self.ooo.entry(seq).or_insert(0);
            *slot = (*slot).max(len);
            return self.rcv_nxt;
        }
        self.rcv_nxt = end;
        while let Some((&s, &l)) = self.ooo.first_key_value() {
            if s > self.rcv_nxt {
                break;
            }
            self.ooo.pop_first();
            self.rcv_nxt = self.rcv_nxt.max(s + l as u64);
        }
        self.rcv_nxt
    }
}
