use std::ffi::CStr;
use std::ptr;

use phonon_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pl_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn model(delta: f64, lambda: f64) -> *mut PlModel {
    let p = pl_params_reference(delta, lambda);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pl_model_new(&p, &mut m) }, PlStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(pl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_pointers_are_reported() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { pl_model_new(ptr::null(), &mut m) }, PlStatus::NullPointer);
    assert!(last_error().contains("params"));
    let mut x = 0.0;
    assert_eq!(unsafe { pl_gamma_opt(ptr::null(), ptr::null(), &mut x) }, PlStatus::NullPointer);
    unsafe { pl_model_free(ptr::null_mut()) };
}

#[test]
fn invalid_params_rejected_and_model_unchanged() {
    let m = model(10.0, 3.0);
    let mut bad = pl_params_reference(10.0, 3.0);
    bad.gamma_m = -1.0;
    assert_eq!(unsafe { pl_model_set_params(m, &bad) }, PlStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let mut got = bad;
    assert_eq!(unsafe { pl_model_get_params(m, &mut got) }, PlStatus::Ok);
    assert_eq!(got, pl_params_reference(10.0, 3.0));
    assert!(last_error().is_empty());
    assert_eq!(unsafe { pl_model_set_convention(m, 7) }, PlStatus::InvalidArgument);
    unsafe { pl_model_free(m) };
}

#[test]
fn fixed_points_and_buffer_size() {
    let m = model(10.0, 3.0);
    let mut count = 0usize;
    assert_eq!(
        unsafe { pl_fixed_points(m, ptr::null_mut(), 0, &mut count) },
        PlStatus::BufferTooSmall
    );
    assert!(count >= 1);
    let mut buf = vec![PlFixedPoint::default(); count];
    assert_eq!(unsafe { pl_fixed_points(m, buf.as_mut_ptr(), count, &mut count) }, PlStatus::Ok);
    let fp = buf.iter().find(|f| f.stable == 1).expect("stable fixed point at (10, 3)");
    assert!(fp.residual < 1e-8);
    assert!(fp.max_re < 0.0);

    let (mut re, mut im) = ([0.0; 6], [0.0; 6]);
    assert_eq!(
        unsafe { pl_stability_eigenvalues(m, &fp.state, re.as_mut_ptr(), im.as_mut_ptr()) },
        PlStatus::Ok
    );
    assert!((re[0] - fp.max_re).abs() < 1e-12);
    assert!(re.windows(2).all(|w| w[0] >= w[1]));
    unsafe { pl_model_free(m) };
}

#[test]
fn thresholds_on_path_one() {
    let m = model(10.0, 3.0);
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(unsafe { pl_threshold_gamma(m, 10.0, &mut a) }, PlStatus::Ok);
    assert_eq!(unsafe { pl_threshold_eigen(m, 10.0, &mut b) }, PlStatus::Ok);
    assert!(a > 4.5 && a < 5.01, "{a}");
    assert!((a - b).abs() < 1e-3);
    unsafe { pl_model_free(m) };
}

#[test]
fn steady_covariance_and_entanglement() {
    let m = model(10.0, 3.0);
    let mut v = [0.0; 36];
    assert_eq!(unsafe { pl_steady_covariance(m, v.as_mut_ptr()) }, PlStatus::Ok);
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(v[6 * i + j], v[6 * j + i]);
        }
    }
    let (mut e, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { pl_steady_entanglement(m, &mut e, &mut r) }, PlStatus::Ok);
    assert!(e > 0.0 && r > 0.0);
    assert_eq!(unsafe { pl_steady_entanglement(m, &mut e, ptr::null_mut()) }, PlStatus::Ok);

    // two-mode block of the returned covariance gives the same value
    let mut w = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            w[4 * i + j] = v[6 * (i + 2) + (j + 2)];
        }
    }
    let mut e2 = 0.0;
    assert_eq!(unsafe { pl_log_negativity(w.as_ptr(), &mut e2) }, PlStatus::Ok);
    assert!((e - e2).abs() < 1e-12);
    unsafe { pl_model_free(m) };
}

#[test]
fn lasing_point_has_no_steady_covariance() {
    let m = model(10.0, 8.0);
    let mut v = [0.0; 36];
    assert_eq!(unsafe { pl_steady_covariance(m, v.as_mut_ptr()) }, PlStatus::NotHurwitz);
    assert!(!last_error().is_empty());
    unsafe { pl_model_free(m) };
}

#[test]
fn two_mode_squeezed_state() {
    let r: f64 = 0.5;
    let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
    let w = [
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, -s, //
        s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    ];
    let mut e = 0.0;
    assert_eq!(unsafe { pl_log_negativity(w.as_ptr(), &mut e) }, PlStatus::Ok);
    assert!((e - 2.0 * r).abs() < 1e-9, "{e}");

    // indefinite: det W < 0
    let unphysical = [
        1.0, 0.0, 2.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        2.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ];
    assert_eq!(unsafe { pl_log_negativity(unphysical.as_ptr(), &mut e) }, PlStatus::NonPhysical);
}

#[test]
fn simulated_limit_cycle() {
    let m = model(10.0, 8.0);
    let mut a = PlAttractor::default();
    assert_eq!(unsafe { pl_simulate_attractor(m, 1, &mut a) }, PlStatus::Ok);
    assert_eq!(a.kind, 2);
    let t = 2.0 * std::f64::consts::PI / 20.0;
    assert!((a.period - t).abs() / t < 0.01);
    unsafe { pl_model_free(m) };
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/phonon_lab.h"))
        .unwrap();
    for name in [
        "pl_version",
        "pl_last_error_message",
        "pl_model_new",
        "pl_model_free",
        "pl_fixed_points",
        "pl_steady_covariance",
        "pl_log_negativity",
        "pl_simulate_attractor",
        "typedef struct PlModel PlModel",
        "PL_STATUS_NOT_HURWITZ = 4",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
