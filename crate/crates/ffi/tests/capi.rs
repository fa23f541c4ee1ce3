use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fracdiff_ffi::*;

fn last_code() -> String {
    let p = fd_last_error_code();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn operator(n: usize) -> *mut FdOperator {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { fd_operator_dirichlet(std::f64::consts::PI, n, &mut op) }, FdStatus::Ok);
    op
}

fn model(op: *const FdOperator, orders: &[f64], coeffs: &[f64]) -> *mut FdModel {
    let mut m = ptr::null_mut();
    let status = unsafe { fd_model_new(op, orders.as_ptr(), coeffs.as_ptr(), orders.len(), &mut m) };
    assert_eq!(status, FdStatus::Ok);
    m
}

#[test]
fn eigenvalues_of_the_laplacian() {
    let op = operator(6);
    assert_eq!(unsafe { fd_operator_mode_count(op) }, 6);
    let mut buf = [0.0; 6];
    let mut len = 0;
    unsafe {
        assert_eq!(fd_operator_eigenvalues(op, buf.as_mut_ptr(), 6, &mut len), FdStatus::Ok);
        assert_eq!(len, 6);
        for (k, v) in buf.iter().enumerate() {
            assert!((v - ((k + 1) * (k + 1)) as f64).abs() < 1e-12);
        }
        let mut short = [0.0; 2];
        assert_eq!(fd_operator_eigenvalues(op, short.as_mut_ptr(), 2, &mut len), FdStatus::BufferTooSmall);
        assert_eq!(len, 6);
        assert_eq!(last_code(), "buffer_too_small");
        fd_operator_free(op);
    }
}

#[test]
fn single_mode_decays_like_mittag_leffler() {
    let op = operator(8);
    let m = model(op, &[0.5], &[1.0]);
    let x0 = 1.0f64;
    let times = [0.0, 0.1, 0.5, 1.0];
    let mut u = [0.0; 4];
    unsafe {
        let a = [1.0];
        let status = fd_solve_trace(m, a.as_ptr(), 1, ptr::null(), 0, 0.0, 1.0, x0, times.as_ptr(), 4, u.as_mut_ptr());
        assert_eq!(status, FdStatus::Ok);
        for (t, v) in times.iter().zip(&u) {
            let mut e = 0.0;
            assert_eq!(fd_mittag_leffler(0.5, 1.0, -t.sqrt(), &mut e), FdStatus::Ok);
            let phi = (2.0 / std::f64::consts::PI).sqrt() * x0.sin();
            assert!((v - e * phi).abs() < 1e-10, "t = {t}: {v} vs {}", e * phi);
        }
        fd_model_free(m);
        fd_operator_free(op);
    }
}

#[test]
fn model_outlives_operator_handle() {
    let op = operator(4);
    let m = model(op, &[0.7, 0.3], &[1.0, 0.5]);
    unsafe { fd_operator_free(op) };
    let times = [0.5];
    let mut u = [0.0];
    let a = [0.0, 1.0];
    let status = unsafe { fd_solve_trace(m, a.as_ptr(), 2, ptr::null(), 0, 0.0, 1.0, 1.0, times.as_ptr(), 1, u.as_mut_ptr()) };
    assert_eq!(status, FdStatus::Ok);
    assert!(u[0].is_finite() && u[0].abs() < 2.0f64.sin());
    unsafe { fd_model_free(m) };
}

#[test]
fn invalid_inputs_map_to_status_codes() {
    let op = operator(4);
    let mut m = ptr::null_mut();
    unsafe {
        let orders = [0.3, 0.7];
        let coeffs = [1.0, 1.0];
        assert_eq!(fd_model_new(op, orders.as_ptr(), coeffs.as_ptr(), 2, &mut m), FdStatus::InvalidInput);
        assert!(m.is_null());
        assert!(!fd_last_error_message().is_null());
        assert_eq!(fd_model_new(ptr::null(), orders.as_ptr(), coeffs.as_ptr(), 2, &mut m), FdStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(fd_mittag_leffler(0.5, 1.0, -1.0, &mut v), FdStatus::Ok);
        assert!(fd_last_error_code().is_null());
        assert_eq!(fd_mittag_leffler(1.5, 1.0, -1.0, &mut v), FdStatus::InvalidInput);
        fd_operator_free(op);
        fd_operator_free(ptr::null_mut());
        fd_model_free(ptr::null_mut());
        fd_identification_free(ptr::null_mut());
        fd_string_free(ptr::null_mut());
    }
}

#[test]
fn kappa_four_pairs_doubled_modes() {
    let op = operator(10);
    let mut pairs = [0usize; 20];
    let mut count = 0;
    unsafe {
        assert_eq!(fd_kappa_match(op, 4.0, 0.0, pairs.as_mut_ptr(), 10, &mut count), FdStatus::Ok);
        assert_eq!(count, 5);
        for k in 0..count {
            assert_eq!(pairs[2 * k], 2 * (k + 1));
            assert_eq!(pairs[2 * k + 1], k + 1);
        }
        assert_eq!(fd_kappa_match(op, 4.0, 0.0, pairs.as_mut_ptr(), 1, &mut count), FdStatus::BufferTooSmall);
        assert_eq!(count, 5);
        assert_eq!(fd_kappa_match(op, 2.0, 0.0, pairs.as_mut_ptr(), 10, &mut count), FdStatus::Ok);
        assert_eq!(count, 0);
        fd_operator_free(op);
    }
}

#[test]
fn identify_two_term_trace() {
    let op = operator(16);
    let m = model(op, &[0.8, 0.4], &[1.0, 0.5]);
    let n = 200;
    let times: Vec<f64> = std::iter::once(0.0)
        .chain((0..n - 1).map(|i| 1e-6 * 1e4f64.powf(i as f64 / (n - 2) as f64)))
        .collect();
    let mut u = vec![0.0; n];
    let a = [1.0];
    unsafe {
        let status = fd_solve_trace(m, a.as_ptr(), 1, ptr::null(), 0, 0.0, 1.0, 1.0, times.as_ptr(), n, u.as_mut_ptr());
        assert_eq!(status, FdStatus::Ok);
        let mut id = ptr::null_mut();
        let status = fd_identify(times.as_ptr(), u.as_ptr(), n, 1.0, f64::NAN, &mut id);
        assert_eq!(status, FdStatus::Ok, "{:?}", CStr::from_ptr(fd_last_error_message()));
        assert_eq!(fd_identification_term_count(id), 2);
        let mut orders = [0.0; 4];
        let mut len = 0;
        assert_eq!(fd_identification_orders(id, orders.as_mut_ptr(), 4, &mut len), FdStatus::Ok);
        assert_eq!(len, 2);
        assert!((orders[0] - 0.8).abs() < 1e-3 && (orders[1] - 0.4).abs() < 1e-2, "{orders:?}");
        let mut ratios = [0.0; 4];
        assert_eq!(fd_identification_ratios(id, ratios.as_mut_ptr(), 4, &mut len), FdStatus::Ok);
        assert_eq!(ratios[0], 1.0);
        let mut json = ptr::null_mut();
        assert_eq!(fd_identification_json(id, &mut json), FdStatus::Ok);
        let text = CString::from_raw(json).into_string().unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["m_hat"], 2);
        fd_identification_free(id);
        fd_model_free(m);
        fd_operator_free(op);
    }
}

#[test]
fn constant_trace_is_a_hypothesis_failure() {
    let times: Vec<f64> = (1..=100).map(|i| i as f64 * 1e-4).collect();
    let u = vec![0.25; 100];
    let mut id = ptr::null_mut();
    let status = unsafe { fd_identify(times.as_ptr(), u.as_ptr(), 100, 1.0, f64::NAN, &mut id) };
    assert_eq!(status, FdStatus::Hypothesis);
    assert!(id.is_null());
    assert_eq!(last_code(), "signal_below_floor");
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fracdiff.h")).unwrap();
    let source = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let mut count = 0;
    for line in source.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 15);
    for ty in ["typedef struct FdOperator FdOperator", "typedef struct FdModel FdModel", "FD_STATUS_HYPOTHESIS = 4"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(&src, "#include \"fracdiff.h\"\nint main(void) { return fd_operator_mode_count(NULL) == 0 ? 0 : 1; }\n").unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&dir)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc);
        }
    }
    Err(())
}
