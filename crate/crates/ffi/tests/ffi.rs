use std::ffi::{c_char, CStr, CString};
use std::ptr;

use nodalfrac_ffi::*;

fn last_error() -> String {
    unsafe {
        let n = nf_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; n.max(1)];
        nf_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn reduced_matrix_roundtrip() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(nf_reduced_new(1.0, 2.0, 3.0, -3.0, -1.0, -2.0, &mut m), NfStatus::Ok);
        let mut values = [0.0; 3];
        let mut vectors = [0.0; 9];
        assert_eq!(nf_reduced_eigen(m, values.as_mut_ptr(), vectors.as_mut_ptr()), NfStatus::Ok);
        assert!(values[0] < values[1] && values[1] < values[2]);
        assert!((values.iter().sum::<f64>() - 6.0).abs() < 1e-12);
        let mut lambda = 0.0;
        let mut v = [0.0; 3];
        let mut gap = 0.0;
        assert_eq!(nf_reduced_ground_state(m, &mut lambda, v.as_mut_ptr(), &mut gap), NfStatus::Ok);
        assert_eq!(lambda, values[0]);
        assert!(v.iter().all(|x| *x > 0.0) && gap > 0.0);
        nf_reduced_free(m);
        nf_reduced_free(ptr::null_mut());
    }
}

#[test]
fn invalid_input_sets_message() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(nf_reduced_new(0.0, 0.0, 0.0, 1.0, -1.0, -1.0, &mut m), NfStatus::InvalidInput);
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(nf_reduced_new(0.0, 0.0, 0.0, -1.0, -0.5, -1.0, ptr::null_mut()), NfStatus::NullPointer);
        let mut changes = 0usize;
        let zeros = [0.0; 4];
        assert_eq!(nf_count_sign_changes(zeros.as_ptr(), 4, 1e-8, &mut changes), NfStatus::InvalidInput);
        let v = [1.0, -1.0, 0.0, 2.0];
        assert_eq!(nf_count_sign_changes(v.as_ptr(), 4, 1e-8, &mut changes), NfStatus::Ok);
        assert_eq!(changes, 2);
        assert_eq!(nf_last_error_message(ptr::null_mut(), 0), 0);
    }
}

#[test]
fn well_problem_solves() {
    unsafe {
        let centers = [-0.5, 0.0, 0.5];
        let values = [10.0, 0.0, 10.0];
        let mut p = ptr::null_mut();
        assert_eq!(
            nf_well_problem_new(centers.as_ptr(), values.as_ptr(), 3, 0.05, 0.5, 200, &mut p),
            NfStatus::Ok
        );
        let mut n_full = 0;
        let mut n_wells = 0;
        assert_eq!(nf_well_grid_len(p, 0, &mut n_full), NfStatus::Ok);
        assert_eq!(nf_well_grid_len(p, 1, &mut n_wells), NfStatus::Ok);
        assert_eq!((n_full, n_wells), (400, 60));

        let mut inf = [0.0; 3];
        let mut fin = [0.0; 3];
        let mut u = vec![0.0; 3 * n_full];
        assert_eq!(nf_well_solve_infinite(p, 3, inf.as_mut_ptr(), ptr::null_mut(), 0), NfStatus::Ok);
        assert_eq!(nf_well_solve_finite(p, 1e-3, 3, fin.as_mut_ptr(), u.as_mut_ptr(), u.len()), NfStatus::Ok);
        for i in 0..3 {
            assert!(fin[i] <= inf[i] + 1e-9);
        }
        let mut changes = 0;
        assert_eq!(nf_count_sign_changes(u[n_full..].as_ptr(), n_full, 1e-8, &mut changes), NfStatus::Ok);
        assert_eq!(changes, 2);
        assert_eq!(
            nf_well_solve_finite(p, 1e-3, 3, fin.as_mut_ptr(), u.as_mut_ptr(), 10),
            NfStatus::BufferTooSmall
        );
        nf_well_problem_free(p);
    }
}

#[test]
fn counterexample_json() {
    unsafe {
        let config = CString::new(r#"{"V": [10, 0, 10], "v2_factor": 0, "grid_n": 200}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(nf_counterexample_run_json(config.as_ptr(), &mut out), NfStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        nf_string_free(out);
        assert_eq!(json["status"], "pass");
        assert_eq!(json["second_changes"], 2);

        let bad = CString::new("{\"s\": ").unwrap();
        assert_eq!(nf_counterexample_run_json(bad.as_ptr(), &mut out), NfStatus::InvalidInput);
        assert!(last_error().contains("config"));
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/nodalfrac.h");
    let text = std::fs::read_to_string(header).expect("header generated by the build script");
    for name in ["nf_reduced_new", "nf_well_solve_finite", "nf_counterexample_run_json", "NF_STATUS_PANIC"] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available; syntax check skipped");
        return;
    };
    assert!(status.success());
}
