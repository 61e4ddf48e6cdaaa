//! Flow-size distributions and arrival processes.

use crate::time::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("flow-size CDF: {0}")]
    InvalidCdf(String),
    #[error("flow-size CDF line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("reading CDF file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown builtin CDF `{0}`")]
    UnknownBuiltin(String),
}

/// Piecewise-linear empirical CDF over flow sizes in bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSizeCdf {
    points: Vec<(u64, f64)>,
}

impl FlowSizeCdf {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self, WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::InvalidCdf(m.to_string()));
        if points.is_empty() {
            return bad("no points");
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad("sizes must be strictly increasing");
            }
            if w[1].1 < w[0].1 {
                return bad("probabilities must be nondecreasing");
            }
        }
        if points.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if points.last().unwrap().1 != 1.0 {
            return bad("final probability must be 1.0");
        }
        Ok(FlowSizeCdf { points })
    }

    /// Two columns per line: size in bytes and cumulative probability.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, WorkloadError> {
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(s), Some(p), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(WorkloadError::Parse {
                    line: i + 1,
                    msg: "expected two columns".into(),
                });
            };
            let size = s.parse::<f64>().map_err(|e| WorkloadError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            let prob = p.parse::<f64>().map_err(|e| WorkloadError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if !(size.is_finite() && size >= 1.0) {
                return Err(WorkloadError::Parse {
                    line: i + 1,
                    msg: format!("size must be >= 1 byte, got {size}"),
                });
            }
            points.push((size.round() as u64, prob));
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self, WorkloadError> {
        let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn builtin(name: &str) -> Result<Self, WorkloadError> {
        match name {
            "datamining" | "datamining-like" => Ok(Self::datamining_like()),
            "websearch" | "websearch-like" => Ok(Self::websearch_like()),
            other => Err(WorkloadError::UnknownBuiltin(other.to_string())),
        }
    }

    /// Heavy-tailed mix where most flows are short (over 80% at or below
    /// 100 KB).
    pub fn datamining_like() -> Self {
        Self::new(vec![
            (1_000, 0.0),
            (2_000, 0.5),
            (10_000, 0.6),
            (30_000, 0.7),
            (100_000, 0.82),
            (1_000_000, 0.9),
            (10_000_000, 0.97),
            (30_000_000, 1.0),
        ])
        .expect("builtin CDF is valid")
    }

    /// Median near 1 MB with a long tail.
    pub fn websearch_like() -> Self {
        Self::new(vec![
            (6_000, 0.0),
            (10_000, 0.15),
            (30_000, 0.25),
            (100_000, 0.35),
            (500_000, 0.45),
            (1_000_000, 0.5),
            (2_000_000, 0.6),
            (5_000_000, 0.8),
            (10_000_000, 0.9),
            (30_000_000, 1.0),
        ])
        .expect("builtin CDF is valid")
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn min_size(&self) -> u64 {
        self.points[0].0
    }

    pub fn max_size(&self) -> u64 {
        self.points.last().unwrap().0
    }

    /// Inverse-CDF lookup with linear interpolation.
    pub fn sample(&self, u: f64) -> u64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.points.partition_point(|&(_, p)| p < u);
        if i == 0 {
            return self.points[0].0;
        }
        let i = i.min(self.points.len() - 1);
        let (s0, p0) = self.points[i - 1];
        let (s1, p1) = self.points[i];
        if p1 <= p0 {
            return s1;
        }
        let frac = (u - p0) / (p1 - p0);
        (s0 as f64 + frac * (s1 - s0) as f64).round() as u64
    }

    /// Mean of the interpolated distribution.
    pub fn mean(&self) -> f64 {
        let (s0, p0) = self.points[0];
        let mut m = s0 as f64 * p0;
        for w in self.points.windows(2) {
            let (a, pa) = w[0];
            let (b, pb) = w[1];
            m += (pb - pa) * (a + b) as f64 / 2.0;
        }
        m
    }
}

/// Flow arrival rate (flows/s) that offers `load` of `capacity_bps`.
pub fn arrival_rate(load: f64, capacity_bps: f64, mean_flow_bytes: f64) -> f64 {
    load * capacity_bps / (8.0 * mean_flow_bytes)
}

/// Seeded Poisson arrival process.
#[derive(Clone, Debug)]
pub struct PoissonArrivals {
    rng: ChaCha8Rng,
    exp: Option<Exp<f64>>,
    next: f64,
}

impl PoissonArrivals {
    pub fn new(rate_per_s: f64, start: SimTime, seed: u64) -> Self {
        assert!(rate_per_s >= 0.0 && rate_per_s.is_finite());
        let exp = (rate_per_s > 0.0).then(|| Exp::new(rate_per_s).expect("positive rate"));
        PoissonArrivals {
            rng: ChaCha8Rng::seed_from_u64(seed),
            exp,
            next: start.as_secs_f64(),
        }
    }

    pub fn from_load(load: f64, capacity_bps: f64, mean_flow_bytes: f64, start: SimTime, seed: u64) -> Self {
        Self::new(arrival_rate(load, capacity_bps, mean_flow_bytes), start, seed)
    }
}

impl Iterator for PoissonArrivals {
    type Item = SimTime;

    fn next(&mut self) -> Option<SimTime> {
        let exp = self.exp.as_ref()?;
        self.next += exp.sample(&mut self.rng);
        Some(SimTime::from_secs_f64(self.next))
    }
}

/// One generated flow of a size-aware workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowArrival {
    pub start: SimTime,
    pub src_index: usize,
    pub dst_index: usize,
    pub size: u64,
}

/// All-to-all Poisson workload over `hosts` endpoints up to `until`.
pub fn all_to_all(cdf: &FlowSizeCdf, hosts: usize, load: f64, host_bps: f64, until: SimTime, seed: u64) -> Vec<FlowArrival> {
    assert!(hosts >= 2, "all-to-all traffic needs at least two hosts");
    let rate = arrival_rate(load, host_bps * hosts as f64, cdf.mean());
    let arrivals = PoissonArrivals::new(rate, SimTime::ZERO, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    arrivals
        .take_while(|&t| t < until)
        .map(|start| {
            let src = rng.random_range(0..hosts);
            let mut dst = rng.random_range(0..hosts - 1);
            if dst >= src {
                dst += 1;
            }
            FlowArrival {
                start,
                src_index: src,
                dst_index: dst,
                size: cdf.sample(rng.random::<f64>()).max(1),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_examples() {
        let c = FlowSizeCdf::new(vec![(1000, 0.0), (2000, 1.0)]).unwrap();
        assert_eq!(c.sample(0.5), 1500);
        assert_eq!(c.sample(0.0), 1000);
        assert_eq!(c.sample(0.999_999_999), 2000);
        assert_eq!(c.mean(), 1500.0);
    }

    #[test]
    fn malformed_cdfs_rejected() {
        assert!(FlowSizeCdf::new(vec![(1000, 0.0), (900, 1.0)]).is_err());
        assert!(FlowSizeCdf::new(vec![(1000, 0.5), (2000, 0.4)]).is_err());
        assert!(FlowSizeCdf::new(vec![(1000, 0.0), (2000, 0.9)]).is_err());
        assert!(FlowSizeCdf::parse("1000 0\n2000").is_err());
    }

    #[test]
    fn parses_text_format() {
        let c = FlowSizeCdf::parse("# size prob\n1000 0\n\n2000 0.5\n4000 1.0\n").unwrap();
        assert_eq!(c.points().len(), 3);
        assert_eq!(c.sample(0.75), 3000);
    }

    #[test]
    fn builtin_shapes() {
        let dm = FlowSizeCdf::datamining_like();
        let small = dm.points().iter().find(|p| p.0 == 100_000).unwrap().1;
        assert!(small > 0.8);
        let ws = FlowSizeCdf::websearch_like();
        assert_eq!(ws.sample(0.5), 1_000_000);
    }

    #[test]
    fn arrival_rate_example() {
        assert!((arrival_rate(0.8, 1e10, 1e5) - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_is_seeded() {
        let a: Vec<_> = PoissonArrivals::new(10_000.0, SimTime::ZERO, 7).take(100).collect();
        let b: Vec<_> = PoissonArrivals::new(10_000.0, SimTime::ZERO, 7).take(100).collect();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(PoissonArrivals::new(0.0, SimTime::ZERO, 1).next(), None);
    }

    #[test]
    fn offered_load_matches_target() {
        let cdf = FlowSizeCdf::datamining_like();
        let until = SimTime::from_secs(20);
        let flows = all_to_all(&cdf, 16, 0.6, 1e10, until, 11);
        let offered: u64 = flows.iter().map(|f| f.size).sum();
        let load = offered as f64 * 8.0 / (16.0 * 1e10 * until.as_secs_f64());
        assert!((load - 0.6).abs() / 0.6 < 0.05, "offered load {load}");
        assert!(flows.iter().all(|f| f.src_index != f.dst_index));
    }
}
