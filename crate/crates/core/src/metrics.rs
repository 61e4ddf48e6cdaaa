//! Evaluation metrics: fairness, slowdown, percentiles, windowed goodput.

use crate::time::SimTime;
use crate::topology::PathInfo;
use serde::{Deserialize, Serialize};

/// Jain's fairness index `(Σx)²/(n·Σx²)`. `None` for empty or all-zero input.
pub fn jain_index(rates: &[f64]) -> Option<f64> {
    let sum: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|x| x * x).sum();
    if rates.is_empty() || sq == 0.0 {
        return None;
    }
    Some(sum * sum / (rates.len() as f64 * sq))
}

/// Nearest-rank percentile, `p` in `[0, 100]`.
pub fn percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Some(percentile_sorted(&v, p))
}

pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Zero-load completion time: one base round trip plus serialization of the
/// flow at the path bottleneck.
pub fn ideal_fct(size: u64, path: &PathInfo) -> SimTime {
    path.base_rtt + SimTime::from_secs_f64(size as f64 * 8.0 / path.bottleneck_bps as f64)
}

pub fn slowdown(fct: SimTime, size: u64, path: &PathInfo) -> f64 {
    fct.as_nanos() as f64 / ideal_fct(size, path).as_nanos() as f64
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Bytes counted into fixed base buckets; any multiple of the bucket can be
/// read back as a rate series.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodputCounter {
    bucket: SimTime,
    bins: Vec<u64>,
}

impl GoodputCounter {
    pub fn new(bucket: SimTime) -> Self {
        assert!(bucket > SimTime::ZERO);
        GoodputCounter { bucket, bins: Vec::new() }
    }

    pub fn bucket(&self) -> SimTime {
        self.bucket
    }

    pub fn record(&mut self, at: SimTime, bytes: u64) {
        let i = (at.as_nanos() / self.bucket.as_nanos()) as usize;
        if self.bins.len() <= i {
            self.bins.resize(i + 1, 0);
        }
        self.bins[i] += bytes;
    }

    pub fn total_bytes(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Bytes delivered in `[from, to)`, to bucket resolution.
    pub fn bytes_between(&self, from: SimTime, to: SimTime) -> u64 {
        let b = self.bucket.as_nanos();
        let lo = (from.as_nanos() / b) as usize;
        let hi = (to.as_nanos().div_ceil(b) as usize).min(self.bins.len());
        if lo >= hi {
            return 0;
        }
        self.bins[lo..hi].iter().sum()
    }

    /// Mean rate over `[from, to)` in bits/s.
    pub fn rate_between(&self, from: SimTime, to: SimTime) -> f64 {
        let span = to.saturating_sub(from).as_secs_f64();
        if span <= 0.0 {
            return 0.0;
        }
        self.bytes_between(from, to) as f64 * 8.0 / span
    }

    /// `(window start, bits/s)` for consecutive windows up to `until`.
    /// `window` is rounded down to a whole number of buckets.
    pub fn series(&self, window: SimTime, until: SimTime) -> Vec<(SimTime, f64)> {
        let per = (window.as_nanos() / self.bucket.as_nanos()).max(1);
        let w = SimTime::from_nanos(per * self.bucket.as_nanos());
        let mut out = Vec::new();
        let mut t = SimTime::ZERO;
        while t < until {
            out.push((t, self.rate_between(t, t + w)));
            t += w;
        }
        out
    }
}

/// Flow size classes used when reporting slowdowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeBin {
    /// Up to 100 KB.
    Small,
    /// Above 100 KB, up to 1 MB.
    Medium,
    /// Above 1 MB.
    Large,
}

impl SizeBin {
    pub const SMALL_MAX_BYTES: u64 = 100_000;
    pub const MEDIUM_MAX_BYTES: u64 = 1_000_000;

    pub fn of(size: u64) -> SizeBin {
        if size <= Self::SMALL_MAX_BYTES {
            SizeBin::Small
        } else if size <= Self::MEDIUM_MAX_BYTES {
            SizeBin::Medium
        } else {
            SizeBin::Large
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow_id: u32,
    pub size: Option<u64>,
    pub start: SimTime,
    pub finish: Option<SimTime>,
    pub timeouts: u64,
    pub slowdown: Option<f64>,
}

impl FlowRecord {
    pub fn fct(&self) -> Option<SimTime> {
        self.finish.map(|f| f - self.start)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlowdownSummary {
    pub count: usize,
    pub mean: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p99: f64,
}

impl SlowdownSummary {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        Some(SlowdownSummary {
            count: v.len(),
            mean: mean(&v)?,
            p5: percentile_sorted(&v, 5.0),
            p25: percentile_sorted(&v, 25.0),
            p50: percentile_sorted(&v, 50.0),
            p75: percentile_sorted(&v, 75.0),
            p99: percentile_sorted(&v, 99.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_bins() {
        assert_eq!(SizeBin::of(1), SizeBin::Small);
        assert_eq!(SizeBin::of(100_000), SizeBin::Small);
        assert_eq!(SizeBin::of(100_001), SizeBin::Medium);
        assert_eq!(SizeBin::of(1_000_000), SizeBin::Medium);
        assert_eq!(SizeBin::of(1_000_001), SizeBin::Large);
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[3.0, 3.0, 3.0]), Some(1.0));
        assert_eq!(jain_index(&[10.0, 0.0]), Some(0.5));
        assert_eq!(jain_index(&[0.0, 0.0, 0.0, 7.0]), Some(0.25));
        assert_eq!(jain_index(&[0.0, 0.0]), None);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 50.0), Some(2.0));
        assert_eq!(percentile(&[4.2; 100], 99.0), Some(4.2));
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0), Some(99.0));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn slowdown_examples() {
        let path = PathInfo {
            base_rtt: SimTime::from_micros(100),
            bottleneck_bps: 10_000_000_000,
            hops: 3,
        };
        assert_eq!(ideal_fct(50_000, &path), SimTime::from_micros(140));
        assert_eq!(slowdown(SimTime::from_micros(140), 50_000, &path), 1.0);
        assert_eq!(slowdown(SimTime::from_micros(280), 50_000, &path), 2.0);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn goodput_windows() {
        let mut g = GoodputCounter::new(SimTime::from_millis(1));
        for ms in 0..20 {
            g.record(SimTime::from_millis(ms), 1_250_000);
        }
        let s = g.series(SimTime::from_millis(10), SimTime::from_millis(30));
        assert_eq!(s.len(), 3);
        assert!((s[0].1 - 1e10).abs() < 1.0);
        assert_eq!(s[2].1, 0.0);
        assert_eq!(g.total_bytes(), 25_000_000);
    }
}
