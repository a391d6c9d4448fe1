use std::ffi::CStr;
use std::ptr;

use telegraph_ffi::*;

fn model(a: f64, b: f64) -> *mut TgModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tg_model_new(a, b, &mut m) }, TgStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tg_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn formulas_match_core() {
    let m = model(1.0, 2.0);
    let (mut lc, mut psi, mut c) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(tg_lambda_c(m, &mut lc), TgStatus::Ok);
        assert_eq!(tg_psi(m, 0.0, &mut psi), TgStatus::Ok);
        assert_eq!(tg_c_lambda(m, lc, &mut c), TgStatus::Ok);
    }
    assert!((lc - (2f64.sqrt() - 1.0).powi(2) / 2.0).abs() < 1e-15);
    assert_eq!(psi, 1.0);
    assert!((c - 0.5).abs() < 1e-12);
    let mut k = TgBoundConstants::default();
    assert_eq!(unsafe { tg_bound_constants(m, &mut k) }, TgStatus::Ok);
    assert_eq!(k.c_reflected, 3.0);
    assert_eq!(k.r, 0.75);
    unsafe {
        assert_eq!(tg_psi(m, 1.0, &mut psi), TgStatus::Ok);
        tg_model_free(m);
    }
    assert!(psi.is_infinite());
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { tg_model_new(2.0, 1.0, &mut m) },
        TgStatus::InvalidRates
    );
    assert!(m.is_null());
    assert!(last_error().contains("invalid rates"));

    let d = model(1.0, 1.0);
    let mut x = 0.0;
    assert_eq!(unsafe { tg_lambda_c(d, &mut x) }, TgStatus::Degenerate);
    assert_eq!(
        unsafe { tg_lambda_c(ptr::null(), &mut x) },
        TgStatus::NullPointer
    );
    assert_eq!(
        unsafe { tg_lambda_c(d, ptr::null_mut()) },
        TgStatus::Degenerate
    );
    unsafe { tg_model_free(d) };
}

#[test]
fn simulated_path_is_deterministic_and_valid() {
    let m = model(1.0, 2.0);
    let run = || {
        let mut p = ptr::null_mut();
        let s = unsafe { tg_simulate(m, TgProcess::Reflected, 1.0, -1, 20.0, 3, 0, &mut p) };
        assert_eq!(s, TgStatus::Ok);
        p
    };
    let (p1, p2) = (run(), run());
    let n = unsafe { tg_path_event_count(p1) };
    assert!(n > 0);
    assert_eq!(n, unsafe { tg_path_event_count(p2) });
    let mut prev = 0.0;
    for i in 0..n {
        let (mut e1, mut e2) = (TgEvent::default(), TgEvent::default());
        unsafe {
            assert_eq!(tg_path_event(p1, i, &mut e1), TgStatus::Ok);
            assert_eq!(tg_path_event(p2, i, &mut e2), TgStatus::Ok);
        }
        assert_eq!(
            (e1.time, e1.position, e1.velocity),
            (e2.time, e2.position, e2.velocity)
        );
        assert!(e1.time > prev && e1.position >= 0.0);
        prev = e1.time;
    }
    let mut e = TgEvent::default();
    assert_eq!(
        unsafe { tg_path_event(p1, n, &mut e) },
        TgStatus::InvalidArgument
    );
    let mut s = TgState::default();
    assert_eq!(unsafe { tg_path_eval(p1, 0.5, &mut s) }, TgStatus::Ok);
    assert_eq!((s.position, s.velocity), (0.5, -1));
    assert_eq!(
        unsafe { tg_path_eval(p1, 21.0, &mut s) },
        TgStatus::OutOfDomain
    );
    unsafe {
        tg_path_free(p1);
        tg_path_free(p2);
        tg_model_free(m);
    }
}

#[test]
fn excursions_and_estimates() {
    let m = model(1.0, 2.0);
    let mut xs = vec![0.0; 20_000];
    assert_eq!(
        unsafe { tg_excursion_lengths(m, 1, xs.len(), xs.as_mut_ptr()) },
        TgStatus::Ok
    );
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 2.0).abs() < 0.1);

    let mut e = TgEstimate::default();
    let s = unsafe { tg_invariant_estimate(m, TgIntegrand::VelocityUp, 0.0, 20_000, 2, &mut e) };
    assert_eq!(s, TgStatus::Ok);
    assert!((e.mean - 0.5).abs() <= 4.0 * e.std_error);
    let s = unsafe { tg_invariant_estimate(m, TgIntegrand::Moment, 1.5, 100, 2, &mut e) };
    assert_eq!(s, TgStatus::InvalidArgument);
    unsafe { tg_model_free(m) };
}

#[test]
fn coupled_legs_agree_after_coalescence() {
    let m = model(1.0, 2.0);
    for kind in [TgProcess::Reflected, TgProcess::Unreflected] {
        let x2 = if kind == TgProcess::Reflected {
            0.0
        } else {
            -1.0
        };
        let mut c = ptr::null_mut();
        let s = unsafe { tg_couple(m, kind, 1.0, 1, x2, 1, 200.0, 4, 0, &mut c) };
        assert_eq!(s, TgStatus::Ok);
        let mut t = TgCouplingTimes::default();
        assert_eq!(unsafe { tg_coupling_times(c, &mut t) }, TgStatus::Ok);
        assert!(t.coalescence_time <= t.horizon);
        let (mut s1, mut s2) = (TgState::default(), TgState::default());
        unsafe {
            assert_eq!(tg_coupling_eval(c, 1, t.horizon, &mut s1), TgStatus::Ok);
            assert_eq!(tg_coupling_eval(c, 2, t.horizon, &mut s2), TgStatus::Ok);
            assert_eq!(
                tg_coupling_eval(c, 3, 0.0, &mut s2),
                TgStatus::InvalidArgument
            );
            tg_coupling_free(c);
        }
        assert_eq!((s1.position, s1.velocity), (s2.position, s2.velocity));
    }
    unsafe { tg_model_free(m) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(tg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
