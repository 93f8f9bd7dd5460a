use std::ffi::CStr;
use std::ptr;

use landauer_fcs_ffi::*;

fn new_experiment(p: LfParams) -> *mut LfExperiment {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { lf_experiment_new(&p, &mut h) }, LfStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let p = lf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(lf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn slow_driving_quantities_through_the_abi() {
    let h = new_experiment(lf_params_default());
    let (mut tau, mut temp) = (0.0, 0.0);
    unsafe {
        assert_eq!(lf_experiment_tau(h, &mut tau), LfStatus::Ok);
        assert_eq!(lf_experiment_temperature(h, &mut temp), LfStatus::Ok);
    }
    assert!((temp - 0.05).abs() < 1e-15);
    assert!(tau > 4900.0 && tau < 5100.0);

    let beta = 1.0 / temp;
    let mut parts = [0.0; 3];
    for (slot, c) in parts.iter_mut().zip([
        LfComponent::Total,
        LfComponent::Classical,
        LfComponent::Coherent,
    ]) {
        assert_eq!(
            unsafe { lf_slowdrive_cgf(h, c, 0.3 * beta, slot) },
            LfStatus::Ok
        );
    }
    assert!((parts[0] - parts[1] - parts[2]).abs() < 1e-12);

    let mut mirror = 0.0;
    unsafe { lf_slowdrive_cgf(h, LfComponent::Total, 0.7 * beta, &mut mirror) };
    assert!((mirror - parts[0]).abs() < 1e-12);

    let mut k = [0.0; 4];
    assert_eq!(
        unsafe { lf_slowdrive_cumulants(h, LfComponent::Classical, k.as_mut_ptr()) },
        LfStatus::Ok
    );
    assert!((k[0] - 0.5 * beta * k[1]).abs() < 1e-9 * k[0]);

    let (mut v, mut s) = (0.0, 0.0);
    assert_eq!(
        unsafe { lf_validity_ratios(h, &mut v, &mut s) },
        LfStatus::Ok
    );
    assert!(v > 0.0 && v < 0.5 && s > 0.0);
    unsafe { lf_experiment_free(h) };
}

#[test]
fn exact_cgf_vanishes_at_both_ends() {
    let p = LfParams {
        gammabar_tau: 50.0,
        ..lf_params_default()
    };
    let h = new_experiment(p);
    let (mut k0, mut kb) = (1.0, 1.0);
    unsafe {
        assert_eq!(lf_exact_cgf(h, 0.0, 1e-10, 1e-13, &mut k0), LfStatus::Ok);
        assert_eq!(lf_exact_cgf(h, 20.0, 1e-10, 1e-13, &mut kb), LfStatus::Ok);
        lf_experiment_free(h);
    }
    assert!(k0.abs() < 1e-12);
    assert!(kb.abs() < 1e-8);
}

#[test]
fn ensemble_is_reproducible() {
    let p = LfParams {
        mode: LfMode::Classical,
        ..lf_params_default()
    };
    let h = new_experiment(p);
    let mut a = vec![0.0; 64];
    let mut b = vec![0.0; 64];
    unsafe {
        assert_eq!(
            lf_simulate_excess_heat(h, 64, 7, a.as_mut_ptr()),
            LfStatus::Ok
        );
        assert_eq!(
            lf_simulate_excess_heat(h, 64, 7, b.as_mut_ptr()),
            LfStatus::Ok
        );
        lf_experiment_free(h);
    }
    assert_eq!(a, b);
    assert!(a.iter().all(|x| x.is_finite()));
}

#[test]
fn errors_are_reported() {
    let bad = LfParams {
        alpha: -1.0,
        ..lf_params_default()
    };
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { lf_experiment_new(&bad, &mut h) },
        LfStatus::InvalidArgument
    );
    assert!(h.is_null());
    assert!(last_error().contains("alpha"));

    assert_eq!(
        unsafe { lf_experiment_new(ptr::null(), &mut h) },
        LfStatus::NullPointer
    );
    assert!(last_error().contains("params"));

    let mut out = 0.0;
    assert_eq!(
        unsafe { lf_experiment_tau(ptr::null(), &mut out) },
        LfStatus::NullPointer
    );

    let h = new_experiment(lf_params_default());
    assert_eq!(
        unsafe { lf_slowdrive_cgf(h, LfComponent::Total, f64::NAN, &mut out) },
        LfStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { lf_experiment_tau(h, ptr::null_mut()) },
        LfStatus::NullPointer
    );
    assert_eq!(unsafe { lf_experiment_tau(h, &mut out) }, LfStatus::Ok);
    assert!(lf_last_error_message().is_null());
    unsafe {
        lf_experiment_free(h);
        lf_experiment_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_abi() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/landauer_fcs.h"
    ))
    .unwrap();
    for sym in [
        "typedef struct LfExperiment LfExperiment",
        "LF_STATUS_NULL_POINTER",
        "lf_version",
        "lf_last_error_message",
        "lf_experiment_new",
        "lf_experiment_free",
        "lf_slowdrive_cgf",
        "lf_slowdrive_cumulants",
        "lf_exact_cgf",
        "lf_simulate_excess_heat",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}
