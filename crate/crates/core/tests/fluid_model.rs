use num_complex::Complex64;
use proptest::prelude::*;
use scoutsim::fluid::{self, FluidParams, FluidPhase, IntegrationOptions, Stability, SweepSpec};

/// Roots of `λ² + bλ + c` written out independently of the library.
fn oracle_roots(beta: f64, k_bar: f64, bdp: f64, n: f64, tau: f64) -> (Complex64, Complex64) {
    let w = bdp / n;
    let b = beta * k_bar / (tau * bdp);
    let c = beta * w * n / (tau * tau * bdp);
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        (Complex64::new(-b / 2.0, im), Complex64::new(-b / 2.0, -im))
    } else {
        let r = disc.sqrt() / 2.0;
        (Complex64::new(-b / 2.0 + r, 0.0), Complex64::new(-b / 2.0 - r, 0.0))
    }
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #[test]
    fn eigenvalues_match_the_closed_form(
        log_beta in -4.0f64..0.0,
        bdp in 5.0f64..2000.0,
        n in 1.0f64..50.0,
        frac in 0.05f64..5.0,
    ) {
        let beta = 10f64.powf(log_beta);
        let tau = 100e-6;
        let bound = 2.0 * bdp / beta.sqrt();
        let p = FluidParams::from_bdp(beta, bdp, n, tau, frac * bound).unwrap();
        let (l1, l2) = fluid::eigenvalues(&p, p.equilibrium_w());
        let (o1, o2) = oracle_roots(beta, frac * bound, bdp, n, tau);
        prop_assert!((close(l1, o1) && close(l2, o2)) || (close(l1, o2) && close(l2, o1)));
        if (frac - 1.0).abs() > 1e-6 {
            let spiral = fluid::classify(l1, l2) == Stability::StableSpiral;
            prop_assert_eq!(spiral, frac < 1.0);
        }
    }

    #[test]
    fn queue_never_goes_negative(
        bdp in 5.0f64..2000.0,
        n in 1.0f64..20.0,
        w in 0.01f64..5000.0,
        q in 0.0f64..500.0,
        dt_frac in 1e-4f64..1.0,
    ) {
        let p = FluidParams::from_bdp(0.001, bdp, n, 100e-6, bdp).unwrap();
        for phase in [FluidPhase::Increase, FluidPhase::Decrease, FluidPhase::Hold] {
            let (_, q_next) = fluid::fluid_step(&p, w, q, phase, dt_frac * p.tau);
            prop_assert!(q_next >= 0.0);
        }
    }

    #[test]
    fn stable_points_converge_from_four_fair_shares(
        log_beta in -4.0f64..0.0,
        bdp in 5.0f64..1000.0,
        n in 1.0f64..20.0,
        frac in 0.05f64..0.95,
    ) {
        let beta = 10f64.powf(log_beta);
        let p = FluidParams::from_bdp(beta, bdp, n, 100e-6, frac * 2.0 * bdp / beta.sqrt()).unwrap();
        let w_eq = p.equilibrium_w();
        let traj = fluid::integrate(&p, 4.0 * w_eq, 0.0, IntegrationOptions::default_for(&p, 1e4)).unwrap();
        let end = traj.last().unwrap();
        prop_assert!((end.w - w_eq).hypot(end.q) <= 0.01 * 3.0 * w_eq);
        prop_assert!(traj.samples.iter().all(|s| s.q >= 0.0));
    }
}

#[test]
fn default_sweep_covers_the_grid_and_agrees_with_the_bound() {
    let spec = SweepSpec::default();
    let rows = fluid::sweep(&spec).unwrap();
    let expected = spec.betas.len() * spec.bdps.len() * spec.ns.len() * spec.bound_fractions.len();
    assert_eq!(rows.len(), expected);
    assert!(rows.len() >= 200);
    for r in &rows {
        let bound = 2.0 * r.bdp / r.beta.sqrt();
        assert!((r.bound_2bdp_sqrtbeta - bound).abs() <= 1e-9 * bound);
        let (o1, _) = oracle_roots(r.beta, r.k_bar, r.bdp, r.n, spec.tau);
        assert!((r.re_lambda - o1.re).abs() <= 1e-9 * (1.0 + o1.norm()));
        assert_eq!(r.classification == Stability::StableSpiral, r.k_bar < bound);
    }
}

#[test]
fn zero_flows_are_rejected() {
    assert!(FluidParams::from_bdp(0.001, 83.3, 0.0, 100e-6, 10.0).is_err());
}
