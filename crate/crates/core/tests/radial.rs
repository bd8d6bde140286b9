use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use gradgraph::ftau::calibrate_isotropic;
use gradgraph::radial::{
    counterexample_zeta2, integrate_radial, ma_radial_oracle, profile_residual, DensityFn, MaDensityRhs, PerturbedRhs,
    RadialInit, RhsFn,
};
use gradgraph::{RadialError, TauParams64};
use proptest::prelude::*;

fn params(tau: f64) -> TauParams64 {
    TauParams64::new(tau).unwrap()
}

/// Largest relative `u′` error against the oracle over `[1, 10]`, computed on
/// the deviation `u′ − r` to stay clear of roundoff.
fn oracle_error(n_steps: usize) -> f64 {
    let psi = DensityFn {
        psi_inf: 1.0,
        excess: |s: f64| 2.0 * (-s).exp(),
    };
    let rhs = MaDensityRhs(&psi);
    let prof = integrate_radial(
        &params(0.0),
        &rhs,
        RadialInit {
            r0: 1.0,
            u0: 0.5,
            du0: 1.0,
        },
        10.0,
        n_steps,
    )
    .unwrap();
    let o = ma_radial_oracle(&psi, 1.0, 1.0, &prof.r).unwrap();
    (0..prof.len())
        .map(|i| (prof.dw[i] - o.du_excess[i]).abs() / o.du[i])
        .fold(0.0, f64::max)
}

#[test]
fn smooth_density_matches_oracle() {
    let psi = DensityFn {
        psi_inf: 2.0,
        excess: |s: f64| 3.0 * (1.0 + s * s).recip() * s.powf(-0.5),
    };
    let rhs = MaDensityRhs(&psi);
    let du0 = 1.7;
    let prof = integrate_radial(&params(0.0), &rhs, RadialInit { r0: 1.0, u0: 0.0, du0 }, 1e3, 10_000).unwrap();
    let o = ma_radial_oracle(&psi, 1.0, du0, &prof.r).unwrap();
    for i in 0..prof.len() {
        assert!((prof.du[i] - o.du[i]).abs() <= 1e-7 * o.du[i], "r = {}", prof.r[i]);
    }
}

#[test]
fn fourth_order_convergence() {
    let coarse = oracle_error(100);
    let fine = oracle_error(200);
    let ratio = coarse / fine;
    assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio}, errors {coarse} {fine}");
}

#[test]
fn last_node_is_r_max() {
    let p = params(1.1);
    let lam = calibrate_isotropic(&p, 0.3).unwrap();
    let rhs = PerturbedRhs::new(0.3, 0.05, 2.5).unwrap();
    let prof = integrate_radial(&p, &rhs, RadialInit::on_quadratic(lam, 2.0, 0.0), 777.0, 321).unwrap();
    assert_eq!(prof.len(), 322);
    assert_eq!(*prof.r.last().unwrap(), 777.0);
    assert_eq!(prof.r[0], 2.0);
}

#[test]
fn closure_rhs_agrees_with_perturbed_rhs() {
    let p = params(FRAC_PI_2);
    let a = PerturbedRhs::new(1.0, 0.2, 3.0).unwrap();
    let b = RhsFn {
        f_inf: 1.0,
        delta: |r: f64| 0.2 * r.powi(-3),
    };
    let lam = calibrate_isotropic(&p, 1.0).unwrap();
    let init = RadialInit::on_quadratic(lam, 1.0, 0.0);
    let pa = integrate_radial(&p, &a, init, 100.0, 500).unwrap();
    let pb = integrate_radial(&p, &b, init, 100.0, 500).unwrap();
    for i in 0..pa.len() {
        assert!((pa.u[i] - pb.u[i]).abs() <= 1e-13 * pa.u[i].abs());
    }
}

#[test]
fn errors_are_named() {
    let p = params(FRAC_PI_4);
    let rhs = PerturbedRhs::new(0.1, 0.0, 3.0).unwrap();
    let err = rhs.check_range(&p, 1.0).unwrap_err();
    assert!(err.to_string().starts_with("OUT_OF_RANGE"), "{err}");
    assert!(matches!(
        PerturbedRhs::new(0.0, 1.0, -1.0),
        Err(RadialError::InvalidInput(_))
    ));
    let rhs = PerturbedRhs::new(0.0, 0.0, 3.0).unwrap();
    let f = integrate_radial(
        &params(0.0),
        &rhs,
        RadialInit {
            r0: 2.0,
            u0: 0.0,
            du0: 2.0,
        },
        1.0,
        10,
    )
    .unwrap_err();
    assert!(f.partial.is_empty());
    assert!(f.to_string().starts_with("INVALID_INPUT"));
}

#[test]
fn counterexample_growth() {
    let z = counterexample_zeta2(1.0f64, 1e6).unwrap();
    assert!((z.q() - 2.0).abs() <= 0.1, "q = {}", z.q());
    assert!((z.log_squared_coef - 0.5).abs() <= 0.025);
    let z = counterexample_zeta2(0.5f64, 1e6).unwrap();
    assert!((z.log_squared_coef - 0.25).abs() <= 0.0125);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_stay_admissible(
        tau in prop_oneof![Just(0.0), 0.1f64..0.7, Just(FRAC_PI_4), 0.9f64..1.5, Just(FRAC_PI_2)],
        amp in -0.1f64..0.1,
        zeta in 2.1f64..4.0,
        shift in -0.05f64..0.05,
    ) {
        let p = params(tau);
        let range = p.attainable_range();
        let f_inf = if range.hi.is_finite() && range.lo.is_finite() {
            0.5 * (range.lo + range.hi)
        } else if range.hi.is_finite() {
            range.hi - 1.0
        } else {
            0.2
        };
        let rhs = PerturbedRhs::new(f_inf, amp, zeta).unwrap();
        prop_assume!(rhs.check_range(&p, 1.0).is_ok());
        let lam = calibrate_isotropic(&p, f_inf).unwrap();
        let prof = integrate_radial(&p, &rhs, RadialInit::on_quadratic(lam, 1.0, shift * lam), 1e3, 2000).unwrap();
        prop_assert!(prof.is_admissible(&p));
        prop_assert!(profile_residual(&p, &rhs, &prof).unwrap() < 1e-6);
    }

    #[test]
    fn quadratic_limit(tau in 0.0f64..FRAC_PI_2, frac in 0.1f64..0.9) {
        let p = params(tau);
        let range = p.attainable_range();
        let f_inf = if range.lo.is_finite() {
            range.lo + frac * (range.hi - range.lo)
        } else if range.hi.is_finite() {
            range.hi - 4.0 * frac
        } else {
            4.0 * (frac - 0.5)
        };
        let lam = calibrate_isotropic(&p, f_inf).unwrap();
        let rhs = PerturbedRhs::new(f_inf, 0.0, 3.0).unwrap();
        let prof = integrate_radial(&p, &rhs, RadialInit::on_quadratic(lam, 1.0, 0.0), 100.0, 400).unwrap();
        for i in 0..prof.len() {
            let exact = 0.5 * lam * prof.r[i] * prof.r[i];
            prop_assert!((prof.u[i] - exact).abs() <= 1e-11 * exact.abs().max(1.0));
        }
    }
}
