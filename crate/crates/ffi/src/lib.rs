//! C ABI for `nodalfrac`.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`NfStatus`]; on failure a message is
//!   stored per thread and can be read with [`nf_last_error_message`].
//! - Objects are opaque handles created by `nf_*_new` and released by the
//!   matching `nf_*_free`; passing `NULL` to a free function is a no-op.
//! - Output arrays are caller-allocated; their capacity is passed explicitly.
//! - Strings returned by the library must be released with [`nf_string_free`].
//! - Panics never cross the boundary; they are reported as `NF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nodalfrac::config::ExperimentConfig;
use nodalfrac::discretize::IntervalUnion;
use nodalfrac::matmodel::{
    assemble_reduced, count_sign_changes, eigendecompose, ground_state_positivity, ReducedMatrix,
};
use nodalfrac::wells::{counterexample_run, solve_finite_well, solve_infinite_well, WellProblem, WellSpectrum};
use nodalfrac::Error;

/// Result codes of the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was `NULL`.
    NullPointer = 1,
    /// An argument violated a precondition.
    InvalidInput = 2,
    /// A numerical failure (degeneracy, loss of definiteness, …).
    Numerical = 3,
    /// A caller-provided buffer is too small.
    BufferTooSmall = 4,
    /// An internal panic was caught.
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> NfStatus {
    set_error(err.to_string());
    if err.is_input_error() {
        NfStatus::InvalidInput
    } else {
        NfStatus::Numerical
    }
}

/// Runs `f`, converting errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), NfStatus>>(f: F) -> NfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NfStatus::Panic
        }
    }
}

fn lift<T>(r: nodalfrac::Result<T>) -> Result<T, NfStatus> {
    r.map_err(|e| status_of(&e))
}

fn null(name: &str) -> NfStatus {
    set_error(format!("{name} is NULL"));
    NfStatus::NullPointer
}

fn too_small(name: &str, need: usize, have: usize) -> NfStatus {
    set_error(format!("{name} holds {have} values, {need} are required"));
    NfStatus::BufferTooSmall
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the message length including the NUL, or 0
/// when there is no error. `buf` may be `NULL` to query the length.
///
/// # Safety
///
/// `buf` must be `NULL` or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn nf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Reduced matrix model
// ---------------------------------------------------------------------------

/// Opaque handle to a validated 3×3 reduced matrix.
pub struct NfReducedMatrix(ReducedMatrix);

/// Creates the reduced matrix `[[u, c, b], [c, v, a], [b, a, w]]`
/// (`a`: wells 2–3, `b`: wells 1–3, `c`: wells 1–2).
///
/// # Safety
///
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nf_reduced_new(
    u: f64,
    v: f64,
    w: f64,
    a: f64,
    b: f64,
    c: f64,
    out: *mut *mut NfReducedMatrix,
) -> NfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = lift(assemble_reduced(u, v, w, a, b, c))?;
        *out = Box::into_raw(Box::new(NfReducedMatrix(m)));
        Ok(())
    })
}

/// Releases a reduced matrix.
///
/// # Safety
///
/// `m` must be `NULL` or a handle from [`nf_reduced_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_reduced_free(m: *mut NfReducedMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Ascending eigenvalues (`values[3]`) and unit eigenvectors (`vectors[9]`,
/// eigenvector `j` at `vectors[3j..3j+3]`).
///
/// # Safety
///
/// `m` must be a live handle; `values` valid for 3 writes, `vectors` for 9.
#[no_mangle]
pub unsafe extern "C" fn nf_reduced_eigen(m: *const NfReducedMatrix, values: *mut f64, vectors: *mut f64) -> NfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        if vectors.is_null() {
            return Err(null("vectors"));
        }
        for (j, pair) in eigendecompose(&m.0).iter().enumerate() {
            *values.add(j) = pair.value;
            for i in 0..3 {
                *vectors.add(3 * j + i) = pair.vector[i];
            }
        }
        Ok(())
    })
}

/// Ground state: simple minimum eigenvalue with a strictly positive unit
/// eigenvector, and the gap to the next eigenvalue.
///
/// # Safety
///
/// `m` must be a live handle; `lambda` and `gap` valid for one write,
/// `vector` for 3.
#[no_mangle]
pub unsafe extern "C" fn nf_reduced_ground_state(
    m: *const NfReducedMatrix,
    lambda: *mut f64,
    vector: *mut f64,
    gap: *mut f64,
) -> NfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("m"))?;
        if lambda.is_null() || vector.is_null() || gap.is_null() {
            return Err(null("output pointer"));
        }
        let g = lift(ground_state_positivity(&m.0))?;
        *lambda = g.lambda_min;
        *gap = g.gap;
        ptr::copy_nonoverlapping(g.vector.as_ptr(), vector, 3);
        Ok(())
    })
}

/// Sign changes of `values[0..len]`; entries below `tau_rel · max|values|`
/// count as zero.
///
/// # Safety
///
/// `values` must be valid for `len` reads; `changes` for one write.
#[no_mangle]
pub unsafe extern "C" fn nf_count_sign_changes(
    values: *const f64,
    len: usize,
    tau_rel: f64,
    changes: *mut usize,
) -> NfStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if changes.is_null() {
            return Err(null("changes"));
        }
        let slice = std::slice::from_raw_parts(values, len);
        *changes = lift(count_sign_changes(slice, tau_rel))?.changes;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Well problems
// ---------------------------------------------------------------------------

/// Opaque handle to a well problem (geometry, values, order, resolution).
pub struct NfWellProblem(WellProblem);

/// Creates a problem with `k` wells `(centers[i] − eps, centers[i] + eps)`,
/// well values `values[i]`, order `s` and `n_per_unit` cells per unit length.
///
/// # Safety
///
/// `centers` and `values` must be valid for `k` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nf_well_problem_new(
    centers: *const f64,
    values: *const f64,
    k: usize,
    eps: f64,
    s: f64,
    n_per_unit: usize,
    out: *mut *mut NfWellProblem,
) -> NfStatus {
    guard(|| {
        if centers.is_null() || values.is_null() || out.is_null() {
            return Err(null("centers, values or out"));
        }
        let c = std::slice::from_raw_parts(centers, k).to_vec();
        let v = std::slice::from_raw_parts(values, k).to_vec();
        let wells = lift(IntervalUnion::new(c, eps))?;
        let p = lift(WellProblem::new(wells, v, s, n_per_unit))?;
        *out = Box::into_raw(Box::new(NfWellProblem(p)));
        Ok(())
    })
}

/// Releases a well problem.
///
/// # Safety
///
/// `p` must be `NULL` or a handle from [`nf_well_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_well_problem_free(p: *mut NfWellProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of grid nodes: on `I` for the finite well (`infinite == 0`), on
/// the wells otherwise.
///
/// # Safety
///
/// `p` must be a live handle; `len` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nf_well_grid_len(p: *const NfWellProblem, infinite: i32, len: *mut usize) -> NfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        let grid = if infinite != 0 { lift(p.0.well_grid())? } else { lift(p.0.full_grid())? };
        *len = grid.len();
        Ok(())
    })
}

unsafe fn export_spectrum(
    spec: &WellSpectrum,
    eigenvalues: *mut f64,
    eigenfunctions: *mut f64,
    capacity: usize,
) -> Result<(), NfStatus> {
    let m = spec.pairs.len();
    let n = spec.grid.len();
    for (j, pair) in spec.pairs.iter().enumerate() {
        *eigenvalues.add(j) = pair.value;
    }
    if !eigenfunctions.is_null() {
        if capacity < m * n {
            return Err(too_small("eigenfunctions", m * n, capacity));
        }
        for (j, pair) in spec.pairs.iter().enumerate() {
            ptr::copy_nonoverlapping(pair.u.as_ptr(), eigenfunctions.add(j * n), n);
        }
    }
    Ok(())
}

/// Lowest `m` eigenpairs of the finite well with barrier `1/delta`.
///
/// Writes `m` eigenvalues; when `eigenfunctions` is non-NULL also writes the
/// eigenfunctions (grid on `I`, see [`nf_well_grid_len`]) row after row,
/// requiring `capacity ≥ m · len`.
///
/// # Safety
///
/// `p` must be a live handle; `eigenvalues` valid for `m` writes;
/// `eigenfunctions` `NULL` or valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn nf_well_solve_finite(
    p: *const NfWellProblem,
    delta: f64,
    m: usize,
    eigenvalues: *mut f64,
    eigenfunctions: *mut f64,
    capacity: usize,
) -> NfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if eigenvalues.is_null() {
            return Err(null("eigenvalues"));
        }
        let spec = lift(solve_finite_well(&p.0, delta, m))?;
        export_spectrum(&spec, eigenvalues, eigenfunctions, capacity)
    })
}

/// Lowest `m` eigenpairs of the infinite well (grid on the wells); output
/// layout as in [`nf_well_solve_finite`].
///
/// # Safety
///
/// As for [`nf_well_solve_finite`].
#[no_mangle]
pub unsafe extern "C" fn nf_well_solve_infinite(
    p: *const NfWellProblem,
    m: usize,
    eigenvalues: *mut f64,
    eigenfunctions: *mut f64,
    capacity: usize,
) -> NfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        if eigenvalues.is_null() {
            return Err(null("eigenvalues"));
        }
        let spec = lift(solve_infinite_well(&p.0, m))?;
        export_spectrum(&spec, eigenvalues, eigenfunctions, capacity)
    })
}

// ---------------------------------------------------------------------------
// Counterexample
// ---------------------------------------------------------------------------

/// Runs the counterexample for an experiment config given as JSON (`NULL`
/// for the defaults) and returns the verdict as a JSON string, to be freed
/// with [`nf_string_free`].
///
/// # Safety
///
/// `config_json` must be `NULL` or a NUL-terminated string; `out_json` valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn nf_counterexample_run_json(config_json: *const c_char, out_json: *mut *mut c_char) -> NfStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let config = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            let text = CStr::from_ptr(config_json).to_str().map_err(|_| {
                set_error("config is not valid UTF-8");
                NfStatus::InvalidInput
            })?;
            lift(ExperimentConfig::parse(text))?
        };
        lift(config.validate())?;
        let verdict = lift(counterexample_run(&config.counterexample()))?;
        let json = serde_json::to_string(&verdict).map_err(|e| {
            set_error(e.to_string());
            NfStatus::Numerical
        })?;
        *out_json = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
///
/// `s` must be `NULL` or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
