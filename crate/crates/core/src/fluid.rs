//! Two-phase fluid model of window and queue dynamics, its linearized
//! eigenstructure, and the resulting stability bound.
//!
//! State is `(w, q)` in packets. While the queue is occupied the window
//! decays as `w' = −β·w·k̄/(τ·BDP)`; otherwise it grows by `(1 + S/L)/τ`.
//! The queue integrates `N·w/τ − C` and is clipped at zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FluidError {
    #[error("invalid fluid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("state became non-finite at t={t}s (w={w}, q={q})")]
    NonFinite { t: f64, w: f64, q: f64 },
}

/// How `k̄` enters the decrease phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbarMode {
    /// `k̄` is a fixed parameter.
    #[default]
    Fixed,
    /// `k̄` tracks the instantaneous queue (experimental).
    Coupled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub beta: f64,
    /// Base round trip in seconds.
    pub tau: f64,
    /// Bottleneck capacity in packets per second.
    pub c_pps: f64,
    pub l_bytes: f64,
    pub s_bytes: f64,
    pub n: f64,
    pub k: f64,
    pub k_bar: f64,
    #[serde(default)]
    pub kbar_mode: KbarMode,
}

impl FluidParams {
    /// Parameters for a path with the given BDP (packets) and round trip.
    pub fn from_bdp(beta: f64, bdp_pkts: f64, n: f64, tau: f64, k_bar: f64) -> Result<Self, FluidError> {
        let p = FluidParams {
            beta,
            tau,
            c_pps: bdp_pkts / tau,
            l_bytes: 1500.0,
            s_bytes: crate::packet::SCOUT_BYTES as f64,
            n,
            k: 0.0,
            k_bar,
            kbar_mode: KbarMode::Fixed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FluidError> {
        let positive = [
            ("beta", self.beta),
            ("tau", self.tau),
            ("c_pps", self.c_pps),
            ("l_bytes", self.l_bytes),
            ("s_bytes", self.s_bytes),
            ("n", self.n),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FluidError::InvalidParam {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(FluidError::InvalidParam {
                field: "k",
                reason: format!("must be finite and >= 0, got {}", self.k),
            });
        }
        if !(self.k_bar.is_finite() && self.k_bar > self.k) {
            return Err(FluidError::InvalidParam {
                field: "k_bar",
                reason: format!("must exceed k={}, got {}", self.k, self.k_bar),
            });
        }
        Ok(())
    }

    pub fn bdp(&self) -> f64 {
        self.tau * self.c_pps
    }

    /// Fair-share window `BDP/N`.
    pub fn equilibrium_w(&self) -> f64 {
        self.bdp() / self.n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluidPhase {
    Increase,
    Decrease,
    /// On the `q = 0` surface exactly at the fair share: the two phases
    /// cancel and the state does not move.
    Hold,
}

/// Queue growth rate `N·w/τ − C`, snapped to zero at the fair share.
fn queue_rate(p: &FluidParams, w: f64) -> f64 {
    let excess = p.n * w - p.bdp();
    if excess.abs() <= 1e-12 * p.bdp() {
        0.0
    } else {
        excess / p.tau
    }
}

/// Decrease while the queue is occupied or about to build; increase while
/// it is empty and draining.
pub fn phase_rule(p: &FluidParams, w: f64, q: f64) -> FluidPhase {
    if q > 0.0 {
        return FluidPhase::Decrease;
    }
    let r = queue_rate(p, w);
    if r > 0.0 {
        FluidPhase::Decrease
    } else if r < 0.0 {
        FluidPhase::Increase
    } else {
        FluidPhase::Hold
    }
}

/// Window and queue derivatives in the given phase.
pub fn derivatives(p: &FluidParams, w: f64, q: f64, phase: FluidPhase) -> (f64, f64) {
    let dq = queue_rate(p, w);
    let dw = match phase {
        FluidPhase::Increase => (1.0 + p.s_bytes / p.l_bytes) / p.tau,
        FluidPhase::Decrease => {
            let k_bar = match p.kbar_mode {
                KbarMode::Fixed => p.k_bar,
                KbarMode::Coupled => q,
            };
            -p.beta * w * k_bar / (p.tau * p.bdp())
        }
        FluidPhase::Hold => return (0.0, 0.0),
    };
    (dw, dq)
}

/// One explicit Euler step. The queue is clipped at zero. An increase step
/// that would carry the window past the fair share on the empty-queue
/// surface stops on it instead, where the two phases cancel.
pub fn fluid_step(p: &FluidParams, w: f64, q: f64, phase: FluidPhase, dt: f64) -> (f64, f64) {
    assert!(dt > 0.0);
    let (dw, dq) = derivatives(p, w, q, phase);
    let w_next = w + dt * dw;
    let w_eq = p.equilibrium_w();
    if phase == FluidPhase::Increase && q == 0.0 && w < w_eq && w_next >= w_eq {
        return (w_eq, 0.0);
    }
    (w_next, (q + dt * dq).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidSample {
    pub t: f64,
    pub w: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluidTrajectory {
    pub samples: Vec<FluidSample>,
}

impl FluidTrajectory {
    pub fn last(&self) -> Option<FluidSample> {
        self.samples.last().copied()
    }

    /// First sample time after which the state stays within `band` of
    /// `(w_eq, 0)` for the rest of the trajectory.
    pub fn settling_time(&self, w_eq: f64, band: f64) -> Option<f64> {
        let mut settled = None;
        for s in self.samples.iter().rev() {
            if (s.w - w_eq).hypot(s.q) <= band {
                settled = Some(s.t);
            } else {
                break;
            }
        }
        settled
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Record every n-th step (the final state is always recorded).
    pub sample_every: usize,
}

impl IntegrationOptions {
    /// `dt = τ/100`, sampling once per τ.
    pub fn default_for(p: &FluidParams, horizon_taus: f64) -> Self {
        IntegrationOptions {
            dt: p.tau / 100.0,
            horizon: p.tau * horizon_taus,
            sample_every: 100,
        }
    }
}

pub fn integrate(p: &FluidParams, w0: f64, q0: f64, opts: IntegrationOptions) -> Result<FluidTrajectory, FluidError> {
    p.validate()?;
    if !(opts.dt > 0.0 && opts.horizon >= 0.0) {
        return Err(FluidError::InvalidParam {
            field: "dt",
            reason: "dt must be > 0 and horizon >= 0".into(),
        });
    }
    let steps = (opts.horizon / opts.dt).round() as usize;
    let every = opts.sample_every.max(1);
    let mut traj = FluidTrajectory {
        samples: Vec::with_capacity(steps / every + 2),
    };
    let (mut w, mut q) = (w0, q0.max(0.0));
    traj.samples.push(FluidSample { t: 0.0, w, q });
    for i in 1..=steps {
        let phase = phase_rule(p, w, q);
        (w, q) = fluid_step(p, w, q, phase, opts.dt);
        let t = i as f64 * opts.dt;
        if !(w.is_finite() && q.is_finite()) {
            return Err(FluidError::NonFinite { t, w, q });
        }
        if i % every == 0 || i == steps {
            traj.samples.push(FluidSample { t, w, q });
        }
    }
    Ok(traj)
}

/// Largest `k̄` that keeps the decrease phase spiral-stable: `2·BDP/√β`.
pub fn stability_bound(bdp_pkts: f64, beta: f64) -> f64 {
    assert!(bdp_pkts > 0.0 && beta > 0.0);
    2.0 * bdp_pkts / beta.sqrt()
}

/// Roots of `λ² + λ·βk̄/(τ·BDP) + β·w·N/(τ²·BDP) = 0`.
pub fn eigenvalues(p: &FluidParams, w: f64) -> (Complex64, Complex64) {
    let b = p.beta * p.k_bar / (p.tau * p.bdp());
    let c = p.beta * w * p.n / (p.tau * p.tau * p.bdp());
    let disc = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
    ((-b + disc) / 2.0, (-b - disc) / 2.0)
}

/// Jacobian eigenvalues of the increase phase: `{0, N/τ}`.
pub fn increase_eigenvalues(p: &FluidParams) -> (Complex64, Complex64) {
    (Complex64::new(0.0, 0.0), Complex64::new(p.n / p.tau, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableSpiral,
    StableNode,
    DegenerateNode,
    Unstable,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Stability::StableSpiral => "stable_spiral",
            Stability::StableNode => "stable_node",
            Stability::DegenerateNode => "degenerate_node",
            Stability::Unstable => "unstable",
        }
    }
}

pub fn classify(l1: Complex64, l2: Complex64) -> Stability {
    if l1.re >= 0.0 || l2.re >= 0.0 {
        Stability::Unstable
    } else if l1.im != 0.0 {
        Stability::StableSpiral
    } else if l1 == l2 {
        Stability::DegenerateNode
    } else {
        Stability::StableNode
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub betas: Vec<f64>,
    /// `k̄` expressed as a multiple of the stability bound.
    pub bound_fractions: Vec<f64>,
    pub bdps: Vec<f64>,
    pub ns: Vec<f64>,
    pub tau: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            betas: vec![1e-4, 1e-3, 1e-2, 0.1, 1.0],
            bound_fractions: vec![0.1, 0.3, 0.6, 0.9, 0.98, 1.02, 1.2, 2.0, 5.0],
            bdps: vec![10.0, 83.333, 1000.0],
            ns: vec![1.0, 5.0, 20.0],
            tau: 100e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub k_bar: f64,
    #[serde(rename = "BDP")]
    pub bdp: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub classification: Stability,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub bound_2bdp_sqrtbeta: f64,
}

impl SweepRow {
    pub fn fluid_params(&self, tau: f64) -> Result<FluidParams, FluidError> {
        FluidParams::from_bdp(self.beta, self.bdp, self.n, tau, self.k_bar)
    }
}

/// Classifies every grid point at its equilibrium window.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, FluidError> {
    let mut rows = Vec::new();
    for &beta in &spec.betas {
        for &bdp in &spec.bdps {
            for &n in &spec.ns {
                let bound = stability_bound(bdp, beta);
                for &f in &spec.bound_fractions {
                    let p = FluidParams::from_bdp(beta, bdp, n, spec.tau, f * bound)?;
                    let (l1, l2) = eigenvalues(&p, p.equilibrium_w());
                    rows.push(SweepRow {
                        beta,
                        k_bar: p.k_bar,
                        bdp,
                        n,
                        classification: classify(l1, l2),
                        re_lambda: l1.re,
                        im_lambda: l1.im,
                        bound_2bdp_sqrtbeta: bound,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_gig(n: f64, k_bar: f64) -> FluidParams {
        // 10 Gb/s, 100 µs, 1500 B packets.
        FluidParams::from_bdp(0.001, 1e10 * 1e-4 / (8.0 * 1500.0), n, 1e-4, k_bar).unwrap()
    }

    #[test]
    fn bound_examples() {
        let bdp = 1e10 * 1e-4 / (8.0 * 1500.0);
        assert!((stability_bound(bdp, 0.001) - 5270.5).abs() < 0.5);
        assert_eq!(stability_bound(1.0, 4.0), 1.0);
        assert!(stability_bound(1.0, 1e-300) > 1e149);
    }

    #[test]
    fn queue_rate_example() {
        let p = FluidParams::from_bdp(0.001, 83.3333, 5.0, 1e-4, 100.0).unwrap();
        let (_, dq) = derivatives(&p, 100.0, 0.0, FluidPhase::Decrease);
        assert!((dq - (5e6 - 833_333.0)).abs() < 1.0);
    }

    #[test]
    fn zero_gain_freezes_window() {
        let mut p = ten_gig(5.0, 100.0);
        p.beta = f64::MIN_POSITIVE;
        let (w, _) = fluid_step(&p, 40.0, 3.0, FluidPhase::Decrease, 1e-6);
        assert_eq!(w, 40.0);
    }

    #[test]
    fn increase_step_lands_on_the_fair_share() {
        let p = ten_gig(5.0, 1000.0);
        let w_eq = p.equilibrium_w();
        let (w, q) = fluid_step(&p, w_eq - 1e-3, 0.0, FluidPhase::Increase, p.tau);
        assert_eq!((w, q), (w_eq, 0.0));
        assert_eq!(phase_rule(&p, w, q), FluidPhase::Hold);
        let (w, _) = fluid_step(&p, w_eq - 5.0, 0.0, FluidPhase::Increase, p.tau / 100.0);
        assert!(w < w_eq);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let p = ten_gig(5.0, 1000.0);
        let w_eq = p.equilibrium_w();
        let (_, dq) = derivatives(&p, w_eq, 0.0, FluidPhase::Increase);
        assert_eq!(dq, 0.0);
        let traj = integrate(&p, w_eq, 0.0, IntegrationOptions::default_for(&p, 500.0)).unwrap();
        assert!(traj.samples.iter().all(|s| s.w == w_eq && s.q == 0.0));
    }

    #[test]
    fn spiral_from_four_times_fair_share() {
        let p = ten_gig(5.0, 1000.0);
        let w_eq = p.equilibrium_w();
        let traj = integrate(&p, 4.0 * w_eq, 0.0, IntegrationOptions::default_for(&p, 5000.0)).unwrap();
        let q_max = traj.samples.iter().map(|s| s.q).fold(0.0, f64::max);
        let w_min = traj.samples.iter().map(|s| s.w).fold(f64::INFINITY, f64::min);
        assert!(q_max > 0.0);
        assert!(w_min < w_eq, "window should undershoot the fair share");
        let band = 0.01 * 3.0 * w_eq;
        assert!(traj.settling_time(w_eq, band).is_some());
        assert!(traj.samples.iter().all(|s| s.q >= 0.0));
    }

    #[test]
    fn eigen_classes() {
        let bdp = 83.333;
        let bound = stability_bound(bdp, 0.001);
        let stable = FluidParams::from_bdp(0.001, bdp, 5.0, 1e-4, 0.5 * bound).unwrap();
        let (l1, l2) = eigenvalues(&stable, stable.equilibrium_w());
        assert_eq!(classify(l1, l2), Stability::StableSpiral);
        assert!(l1.re < 0.0 && l1.im != 0.0);
        let node = FluidParams::from_bdp(0.001, bdp, 5.0, 1e-4, 10.0 * bound).unwrap();
        let (l1, l2) = eigenvalues(&node, node.equilibrium_w());
        assert_eq!(classify(l1, l2), Stability::StableNode);
        // β·k̄² = 4·BDP² exactly with β = 4, BDP = 1, N = 1.
        let edge = FluidParams::from_bdp(4.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (l1, l2) = eigenvalues(&edge, 1.0);
        assert_eq!(l1, l2);
        assert_eq!(classify(l1, l2), Stability::DegenerateNode);
        let (i0, i1) = increase_eigenvalues(&stable);
        assert_eq!(i0.re, 0.0);
        assert!((i1.re - 5.0 / 1e-4).abs() < 1e-9);
        assert_eq!(classify(i0, i1), Stability::Unstable);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(
            FluidParams::from_bdp(0.001, 83.3, 0.0, 1e-4, 10.0),
            Err(FluidError::InvalidParam { field: "n", .. })
        ));
        assert!(FluidParams::from_bdp(-1.0, 83.3, 1.0, 1e-4, 10.0).is_err());
    }

    #[test]
    fn halving_dt_barely_moves_the_terminal_state() {
        let p = ten_gig(5.0, 1000.0);
        let w_eq = p.equilibrium_w();
        let run = |dt: f64| {
            let opts = IntegrationOptions {
                dt,
                horizon: 300.0 * p.tau,
                sample_every: 1000,
            };
            integrate(&p, 2.0 * w_eq, 0.0, opts).unwrap().last().unwrap()
        };
        let a = run(p.tau / 100.0);
        let b = run(p.tau / 200.0);
        let c = run(p.tau / 400.0);
        let e1 = (a.w - b.w).hypot(a.q - b.q);
        let e2 = (b.w - c.w).hypot(b.q - c.q);
        let scale = w_eq;
        assert!(e1 < 0.01 * scale, "e1={e1}");
        assert!(e2 <= e1 * 0.75 + 1e-9 * scale, "first-order convergence expected: e1={e1} e2={e2}");
    }
}
