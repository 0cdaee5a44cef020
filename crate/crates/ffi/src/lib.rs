//! C ABI for the solver core: opaque handles, integer status codes, and a
//! thread-local last-error message. Every function is panic-safe; panics are
//! caught and reported as `PAREIG_ERR_INTERNAL`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pareig::coeff::{AffinePotential, ParamVector};
use pareig::qmc::{cbc_construct, PodWeights};
use pareig::solver::{
    gap_report, linearized_ground_t, solve_ground, GroundState, ProblemSpec, SolveOptions,
};
use pareig::spatial::Grid;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PareigStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolveFailed = 3,
    BufferTooSmall = 4,
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg.into());
}

fn fail(status: PareigStatus, msg: impl Into<String>) -> PareigStatus {
    set_error(msg);
    status
}

fn guarded(body: impl FnOnce() -> PareigStatus) -> PareigStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across FFI boundary".to_string());
            fail(PareigStatus::Internal, msg)
        }
    }
}

/// Opaque problem handle: grid, potential, nonlinearity, solver options.
pub struct PareigProblem {
    spec: ProblemSpec,
    opts: SolveOptions,
}

/// Opaque converged ground state.
pub struct PareigGroundState {
    inner: GroundState,
}

/// Mode family selector for `pareig_problem_new_1d`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PareigModeFamily {
    Bump = 0,
    Sine = 1,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len`); returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn pareig_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Static version string, NUL-terminated.
#[no_mangle]
pub extern "C" fn pareig_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a 1D problem on the unit interval with `cells` mesh cells, the
/// algebraic potential family `(c, theta_dec, b0_margin, s_max)`, and
/// nonlinearity `eta u^p`. The handle must be freed with
/// `pareig_problem_free`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn pareig_problem_new_1d(
    cells: usize,
    eta: f64,
    p: u32,
    c: f64,
    theta_dec: f64,
    b0_margin: f64,
    s_max: usize,
    family: PareigModeFamily,
    out: *mut *mut PareigProblem,
) -> PareigStatus {
    guarded(|| {
        if out.is_null() {
            return fail(PareigStatus::NullPointer, "out pointer is null");
        }
        if cells < 2 || s_max == 0 {
            return fail(
                PareigStatus::InvalidArgument,
                "need cells >= 2 and s_max >= 1",
            );
        }
        let pot = match family {
            PareigModeFamily::Bump => {
                AffinePotential::algebraic_bump(c, theta_dec, s_max, b0_margin)
            }
            PareigModeFamily::Sine => {
                AffinePotential::algebraic_sine(c, theta_dec, s_max, b0_margin)
            }
        };
        let pot = match pot {
            Ok(p) => p,
            Err(e) => return fail(PareigStatus::InvalidArgument, e.to_string()),
        };
        let grid = Grid::unit_interval(cells);
        let opts = SolveOptions::for_grid(&grid);
        match ProblemSpec::with_unit_diffusion(grid, pot, eta, p) {
            Ok(spec) => {
                let handle = Box::new(PareigProblem { spec, opts });
                unsafe { *out = Box::into_raw(handle) };
                PareigStatus::Ok
            }
            Err(e) => fail(PareigStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Frees a problem handle; null is ignored.
///
/// # Safety
/// `problem` must have come from `pareig_problem_new_1d` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn pareig_problem_free(problem: *mut PareigProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Overrides the solver tolerance (relative nonlinear residual).
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_problem_set_tolerance(
    problem: *mut PareigProblem,
    tol: f64,
) -> PareigStatus {
    guarded(|| {
        if problem.is_null() {
            return fail(PareigStatus::NullPointer, "problem handle is null");
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return fail(PareigStatus::InvalidArgument, "tolerance must be positive");
        }
        unsafe { (*problem).opts.tol = tol };
        PareigStatus::Ok
    })
}

/// Number of interior grid nodes (the length of eigenfunction buffers).
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_problem_len(problem: *const PareigProblem) -> usize {
    if problem.is_null() {
        return 0;
    }
    unsafe { (*problem).spec.grid().len() }
}

/// Solves the ground state at the parameter point `y[0..y_len]` (each
/// coordinate in [-1/2, 1/2]; `y` may be null when `y_len` is zero). On
/// success `*out` owns a state handle.
///
/// # Safety
/// `y` must point to `y_len` doubles (or be null with `y_len == 0`); `out`
/// must be a valid slot.
#[no_mangle]
pub unsafe extern "C" fn pareig_solve_ground(
    problem: *const PareigProblem,
    y: *const f64,
    y_len: usize,
    out: *mut *mut PareigGroundState,
) -> PareigStatus {
    guarded(|| {
        if problem.is_null() || out.is_null() || (y.is_null() && y_len > 0) {
            return fail(PareigStatus::NullPointer, "null handle or buffer");
        }
        let problem = unsafe { &*problem };
        let coords = if y_len == 0 {
            Vec::new()
        } else {
            unsafe { std::slice::from_raw_parts(y, y_len) }.to_vec()
        };
        let y = match ParamVector::new(coords) {
            Ok(v) => v,
            Err(e) => return fail(PareigStatus::InvalidArgument, e.to_string()),
        };
        match solve_ground(&problem.spec, &y, &problem.opts) {
            Ok(gs) => {
                unsafe { *out = Box::into_raw(Box::new(PareigGroundState { inner: gs })) };
                PareigStatus::Ok
            }
            Err(e) => fail(PareigStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Frees a ground-state handle; null is ignored.
///
/// # Safety
/// `state` must have come from `pareig_solve_ground` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_free(state: *mut PareigGroundState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Ground eigenvalue; NaN on a null handle.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_lambda(state: *const PareigGroundState) -> f64 {
    if state.is_null() {
        return f64::NAN;
    }
    unsafe { (*state).inner.lambda }
}

/// Ground energy; NaN on a null handle.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_energy(state: *const PareigGroundState) -> f64 {
    if state.is_null() {
        return f64::NAN;
    }
    unsafe { (*state).inner.energy }
}

/// Final nonlinear residual norm; NaN on a null handle.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_residual(state: *const PareigGroundState) -> f64 {
    if state.is_null() {
        return f64::NAN;
    }
    unsafe { (*state).inner.residual }
}

/// Number of eigenfunction samples held by the state.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_len(state: *const PareigGroundState) -> usize {
    if state.is_null() {
        return 0;
    }
    unsafe { (*state).inner.u.values().len() }
}

/// Copies the eigenfunction samples (interior nodes, lexicographic order)
/// into `buf`.
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pareig_ground_state_copy_u(
    state: *const PareigGroundState,
    buf: *mut f64,
    len: usize,
) -> PareigStatus {
    guarded(|| {
        if state.is_null() || buf.is_null() {
            return fail(PareigStatus::NullPointer, "null handle or buffer");
        }
        let values = unsafe { (*state).inner.u.values() };
        if len < values.len() {
            return fail(
                PareigStatus::BufferTooSmall,
                format!("need {} slots, got {}", values.len(), len),
            );
        }
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
        PareigStatus::Ok
    })
}

/// Ground eigenvalue of the second linearization and the gap diagnostics at
/// a converged state: `lambda_t`, `gap = lambda_t - lambda`, and the
/// positivity witness.
///
/// # Safety
/// Handles must be live; output pointers may be null to skip a field.
#[no_mangle]
pub unsafe extern "C" fn pareig_gap(
    problem: *const PareigProblem,
    state: *const PareigGroundState,
    lambda_t: *mut f64,
    gap: *mut f64,
    witness: *mut f64,
) -> PareigStatus {
    guarded(|| {
        if problem.is_null() || state.is_null() {
            return fail(PareigStatus::NullPointer, "null handle");
        }
        let problem = unsafe { &*problem };
        let state = unsafe { &*state };
        match gap_report(&problem.spec, &state.inner, problem.opts.tol) {
            Ok(report) => {
                unsafe {
                    if !lambda_t.is_null() {
                        *lambda_t = report.lambda_t;
                    }
                    if !gap.is_null() {
                        *gap = report.gap;
                    }
                    if !witness.is_null() {
                        *witness = report.lower_witness;
                    }
                }
                PareigStatus::Ok
            }
            Err(e) => fail(PareigStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Smallest eigenvalue of the second linearization `T` alone.
///
/// # Safety
/// Handles must be live; `out` must be a valid slot.
#[no_mangle]
pub unsafe extern "C" fn pareig_lambda_t(
    problem: *const PareigProblem,
    state: *const PareigGroundState,
    out: *mut f64,
) -> PareigStatus {
    guarded(|| {
        if problem.is_null() || state.is_null() || out.is_null() {
            return fail(PareigStatus::NullPointer, "null handle");
        }
        let problem = unsafe { &*problem };
        let state = unsafe { &*state };
        match linearized_ground_t(&problem.spec, &state.inner, problem.opts.tol) {
            Ok(pair) => {
                unsafe { *out = pair.value };
                PareigStatus::Ok
            }
            Err(e) => fail(PareigStatus::SolveFailed, e.to_string()),
        }
    })
}

/// Component-by-component generating vector for a prime modulus `n` and
/// weight parameters `beta[0..s]`, `theta in (1/2, 1]`; writes `s`
/// components into `z_out`.
///
/// # Safety
/// `beta` must point to `s` doubles and `z_out` to `s` writable u64 slots.
#[no_mangle]
pub unsafe extern "C" fn pareig_cbc_generating_vector(
    n: u64,
    beta: *const f64,
    s: usize,
    theta: f64,
    z_out: *mut u64,
) -> PareigStatus {
    guarded(|| {
        if beta.is_null() || z_out.is_null() {
            return fail(PareigStatus::NullPointer, "null buffer");
        }
        if s == 0 {
            return fail(PareigStatus::InvalidArgument, "s must be positive");
        }
        let beta = unsafe { std::slice::from_raw_parts(beta, s) };
        let weights = match PodWeights::new(beta, theta) {
            Ok(w) => w,
            Err(e) => return fail(PareigStatus::InvalidArgument, e.to_string()),
        };
        match cbc_construct(n, s, &weights) {
            Ok(rule) => {
                unsafe {
                    ptr::copy_nonoverlapping(rule.components().as_ptr(), z_out, s);
                }
                PareigStatus::Ok
            }
            Err(e) => fail(PareigStatus::InvalidArgument, e.to_string()),
        }
    })
}
