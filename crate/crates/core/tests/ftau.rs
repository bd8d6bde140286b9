use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_relative_eq;
use gradgraph::ftau::{
    calibrate_diagonal, calibrate_isotropic, df_mat, df_scalar, f_tau, f_tau_mat, matrix_p, p_identity_defect,
};
use gradgraph::{Branch, FtauError, Spectrum, SymMat64, TauParams64};
use proptest::prelude::*;

fn params(tau: f64) -> TauParams64 {
    TauParams64::new(tau).unwrap()
}

/// Admissible eigenvalue: the bound plus a spread over about three decades.
fn above_bound(p: &TauParams64, t: f64) -> f64 {
    let bound = p.semiconvex_lower_bound();
    let base = if bound.is_finite() { bound } else { 0.0 };
    base + (6.0 * t).exp() * 1e-2 + if bound.is_finite() { 0.0 } else { 10.0 * (t - 0.5) }
}

fn tau_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        0.01f64..0.78,
        Just(FRAC_PI_4),
        0.79f64..1.56,
        Just(FRAC_PI_2)
    ]
}

#[test]
fn branches_cover_the_parameter_interval() {
    assert_eq!(params(0.0).branch(), Branch::MongeAmpere);
    assert_eq!(params(0.3).branch(), Branch::SubQuarter);
    assert_eq!(params(FRAC_PI_4).branch(), Branch::Quarter);
    assert_eq!(params(FRAC_PI_4 + 1e-13).branch(), Branch::Quarter);
    assert_eq!(params(1.2).branch(), Branch::SuperQuarter);
    assert_eq!(params(FRAC_PI_2).branch(), Branch::SpecialLagrangian);
    assert!(matches!(TauParams64::new(-0.1), Err(FtauError::TauOutOfRange { .. })));
    assert!(matches!(TauParams64::new(2.0), Err(FtauError::TauOutOfRange { .. })));
}

#[test]
fn closed_form_values() {
    assert_relative_eq!(
        f_tau([1.0, 1.0], &params(FRAC_PI_2)).unwrap(),
        FRAC_PI_2,
        epsilon = 1e-15
    );
    assert_relative_eq!(
        f_tau([2.0, 3.0], &params(0.0)).unwrap(),
        0.5 * 6f64.ln(),
        epsilon = 1e-15
    );
    assert_relative_eq!(
        f_tau([1.0, 1.0], &params(FRAC_PI_4)).unwrap(),
        -2f64.sqrt(),
        epsilon = 1e-14
    );
}

#[test]
fn domain_violation_carries_the_bound() {
    let err = f_tau([-0.5, 1.0], &params(0.0)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("DOMAIN_VIOLATION"), "{msg}");
    assert!(msg.contains("-0.5") && msg.contains('0'), "{msg}");
}

#[test]
fn calibration_examples() {
    assert_relative_eq!(
        calibrate_diagonal(&params(FRAC_PI_2), FRAC_PI_2, 1.0).unwrap(),
        1.0,
        epsilon = 1e-12
    );
    assert_relative_eq!(
        calibrate_diagonal(&params(0.0), 0.0, 4.0).unwrap(),
        0.25,
        epsilon = 1e-12
    );
    let a = SymMat64::diag(4.0, 0.25);
    let p = matrix_p(&a, &params(0.0)).unwrap();
    assert_relative_eq!(p.m11, 4.0, epsilon = 1e-14);
    assert_relative_eq!(p.m22, 0.25, epsilon = 1e-14);
    let err = calibrate_isotropic(&params(FRAC_PI_4), 0.1).unwrap_err();
    assert!(err.to_string().starts_with("OUT_OF_RANGE"));
    assert!(err.to_string().contains("(-inf, 0)"));
}

#[test]
fn attainable_ranges() {
    let spl = params(FRAC_PI_2).attainable_range();
    assert_eq!((spl.lo, spl.hi), (-PI, PI));
    let q = params(FRAC_PI_4).attainable_range();
    assert_eq!(q.hi, 0.0);
    assert!(q.lo.is_infinite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn derivative_is_positive_and_matches_differences(tau in tau_strategy(), t in 0.0f64..1.0) {
        let p = params(tau);
        let lam = above_bound(&p, t);
        let d = df_scalar(lam, &p).unwrap();
        prop_assert!(d > 0.0);
        let h = 1e-6 * lam.abs().max(1e-2);
        let fd = (p.term(lam + h) - p.term(lam - h)) / (2.0 * h);
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-300) + 1e-9);
    }

    #[test]
    fn p_identity_over_rotations(tau in tau_strategy(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, th in 0.0f64..PI) {
        let p = params(tau);
        let a = Spectrum { lam1: above_bound(&p, t1.min(t2)), lam2: above_bound(&p, t1.max(t2)), theta_e: th }.reconstruct();
        prop_assert!(p_identity_defect(&a, &p).unwrap().norm_inf() < 1e-10);
        let d = df_mat(&a, &p).unwrap();
        prop_assert!(gradgraph::ftau::eigs(&d).lam1 > 0.0);
    }

    #[test]
    fn calibration_inverts_the_operator(tau in tau_strategy(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let p = params(tau);
        let (l1, l2) = (above_bound(&p, t1), above_bound(&p, t2));
        let f = f_tau([l1, l2], &p).unwrap();
        let back = calibrate_diagonal(&p, f, l1).unwrap();
        prop_assert!((f_tau([l1, back], &p).unwrap() - f).abs() < 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn value_depends_only_on_the_spectrum(tau in tau_strategy(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, th in 0.0f64..PI) {
        let p = params(tau);
        let (l1, l2) = (above_bound(&p, t1.min(t2)), above_bound(&p, t1.max(t2)));
        let a = Spectrum { lam1: l1, lam2: l2, theta_e: th }.reconstruct();
        let f = f_tau([l1, l2], &p).unwrap();
        prop_assert!((f_tau_mat(&a, &p).unwrap() - f).abs() < 1e-9 * f.abs().max(1.0));
    }
}
