//! C ABI over the solver suite: opaque handles, integer status codes, and
//! a thread-local last-error message. The header is generated into
//! `include/impulse_solve.h` at build time.
//!
//! Conventions: every fallible call returns [`IsStatus`]; out-pointers are
//! written only on `Ok`; handles are freed exactly once with their `_free`
//! function; panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use impulse_solve::exact1d::{self, Exact1DSolution};
use impulse_solve::fp::{solve_stationary, DensityField, FpConfig};
use impulse_solve::hjb::{value_iteration, HjbConfig, ValueField};
use impulse_solve::jumpgrid::{build_jump_grid, GridMode, GridSpec};
use impulse_solve::mc::{estimate_objective, ObjectiveRun, ThresholdPolicy};
use impulse_solve::model::ModelParams;
use impulse_solve::numerics::InterpMode;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsStatus {
    IsOk = 0,
    IsNullPointer = 1,
    IsInvalidArgument = 2,
    IsParseError = 3,
    IsSolverError = 4,
    IsNoBracket = 5,
    IsPanic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(status: IsStatus, message: impl ToString) -> IsStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.to_string());
    status
}

fn guard<F: FnOnce() -> IsStatus>(f: F) -> IsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => set_error(IsStatus::IsPanic, "internal panic"),
    }
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`); returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null.
#[no_mangle]
pub unsafe extern "C" fn is_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn is_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque model-parameter handle.
pub struct IsParams(ModelParams);

/// Parses model parameters from a JSON document (the same schema the CLI
/// consumes under the `model` key).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn is_params_from_json(
    json: *const c_char,
    out: *mut *mut IsParams,
) -> IsStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return set_error(IsStatus::IsParseError, format!("not utf-8: {e}")),
        };
        let params: ModelParams = match serde_json::from_str(text) {
            Ok(p) => p,
            Err(e) => return set_error(IsStatus::IsParseError, e),
        };
        if let Err(e) = params.validate() {
            return set_error(IsStatus::IsInvalidArgument, e);
        }
        *out = Box::into_raw(Box::new(IsParams(params)));
        IsStatus::IsOk
    })
}

/// # Safety
/// `params` must come from [`is_params_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn is_params_free(params: *mut IsParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Opaque closed-form 1-D solution handle.
pub struct IsExact1dSolution(Exact1DSolution);

/// Flat summary of the closed-form solution.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IsExact1dSummary {
    pub x_bar: f64,
    pub phi0: f64,
    pub phi_plus0: f64,
    pub phi1: f64,
    pub q: f64,
    pub r: f64,
}

/// # Safety
/// `params` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn is_exact1d_solve(
    params: *const IsParams,
    out: *mut *mut IsExact1dSolution,
) -> IsStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        match exact1d::solve_quintet(&(*params).0) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(IsExact1dSolution(sol)));
                IsStatus::IsOk
            }
            Err(e @ exact1d::Exact1dError::NoBracket { .. }) => set_error(IsStatus::IsNoBracket, e),
            Err(e) => set_error(IsStatus::IsInvalidArgument, e),
        }
    })
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn is_exact1d_summary(
    sol: *const IsExact1dSolution,
    out: *mut IsExact1dSummary,
) -> IsStatus {
    guard(|| {
        if sol.is_null() || out.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        let s = &(*sol).0;
        *out = IsExact1dSummary {
            x_bar: s.x_bar,
            phi0: s.phi0,
            phi_plus0: s.phi_plus0,
            phi1: s.phi1,
            q: s.q,
            r: s.r,
        };
        IsStatus::IsOk
    })
}

/// Closed-form value function at `x`; NaN on a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_exact1d_value(sol: *const IsExact1dSolution, x: f64) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    exact1d::exact_value(x, &(*sol).0)
}

/// Closed-form interior density at `x`; NaN on a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_exact1d_density(sol: *const IsExact1dSolution, x: f64) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    exact1d::exact_density(x, &(*sol).0)
}

/// # Safety
/// `sol` must come from [`is_exact1d_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn is_exact1d_solution_free(sol: *mut IsExact1dSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Opaque converged value field.
pub struct IsValueField(ValueField);

/// Solves the optimality equation by value iteration.
///
/// `two_d` selects the full grid (nonzero) or the 1-D reduction; `rho` <= 0
/// picks the default pseudo-time rule for the mode.
///
/// # Safety
/// `params` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn is_hjb_solve(
    params: *const IsParams,
    n: usize,
    l_bins: usize,
    rho: f64,
    tol: f64,
    max_iter: usize,
    two_d: c_int,
    out: *mut *mut IsValueField,
) -> IsStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        let mode = if two_d != 0 { GridMode::TwoD } else { GridMode::OneD };
        let h = 1.0 / n.max(1) as f64;
        let rho = if rho > 0.0 {
            rho
        } else if mode == GridMode::OneD {
            h
        } else {
            10.0 * h.powf(1.5)
        };
        let spec = GridSpec { n, l_bins, rho, dt: h, mode };
        let grid = match build_jump_grid(&spec, &(*params).0) {
            Ok(g) => g,
            Err(e) => return set_error(IsStatus::IsInvalidArgument, e),
        };
        let cfg = HjbConfig { tol, max_iter, interp: InterpMode::Weno };
        match value_iteration(&spec, &grid, &(*params).0, &cfg) {
            Ok(field) => {
                *out = Box::into_raw(Box::new(IsValueField(field)));
                IsStatus::IsOk
            }
            Err(e) => set_error(IsStatus::IsSolverError, e),
        }
    })
}

/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_n(field: *const IsValueField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.n
}

/// Number of y rows: 1 for the 1-D reduction, n + 1 otherwise.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_rows(field: *const IsValueField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.ny_rows
}

/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_iterations(field: *const IsValueField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.iterations
}

/// Value at vertex (i, j); NaN outside the grid.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_phi(field: *const IsValueField, i: usize, j: usize) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if i > f.n || j >= f.ny_rows {
        return f64::NAN;
    }
    f.phi_at(i, j)
}

/// Replenishment amount at vertex (i, j); NaN outside the grid.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_eta(field: *const IsValueField, i: usize, j: usize) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if i > f.n || j >= f.ny_rows {
        return f64::NAN;
    }
    f.eta_at(i, j)
}

/// Detected threshold of row j (-1 means the row never replenishes); NaN
/// outside the grid.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_threshold(field: *const IsValueField, j: usize) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if j >= f.ny_rows {
        return f64::NAN;
    }
    f.x_bar[j]
}

/// # Safety
/// `field` must come from [`is_hjb_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn is_value_field_free(field: *mut IsValueField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Opaque stationary density field.
pub struct IsDensityField(DensityField);

/// Integrates the density to its stationary state under per-row threshold
/// levels (`thresholds_len` of 1 broadcasts a single level to every row;
/// otherwise it must equal the number of cell rows). `dt` <= 0 picks the
/// default increment for the mode.
///
/// # Safety
/// `params` must be a live handle; `thresholds` must point to
/// `thresholds_len` doubles; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn is_fp_solve(
    params: *const IsParams,
    n: usize,
    l_bins: usize,
    dt: f64,
    tol: f64,
    max_steps: usize,
    two_d: c_int,
    thresholds: *const f64,
    thresholds_len: usize,
    out: *mut *mut IsDensityField,
) -> IsStatus {
    guard(|| {
        if params.is_null() || out.is_null() || thresholds.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        let mode = if two_d != 0 { GridMode::TwoD } else { GridMode::OneD };
        let h = 1.0 / n.max(1) as f64;
        let dt = if dt > 0.0 {
            dt
        } else if mode == GridMode::OneD {
            2.0 * h
        } else {
            h
        };
        let spec = GridSpec { n, l_bins, rho: h, dt, mode };
        let grid = match build_jump_grid(&spec, &(*params).0) {
            Ok(g) => g,
            Err(e) => return set_error(IsStatus::IsInvalidArgument, e),
        };
        let raw = std::slice::from_raw_parts(thresholds, thresholds_len);
        let levels = if raw.len() == grid.ny_cell_rows {
            raw.to_vec()
        } else if raw.len() == 1 {
            vec![raw[0]; grid.ny_cell_rows]
        } else {
            return set_error(
                IsStatus::IsInvalidArgument,
                format!("thresholds_len {} (want 1 or {})", raw.len(), grid.ny_cell_rows),
            );
        };
        let cfg = FpConfig { tol, max_steps, face: InterpMode::Linear, per_time_tol: false };
        match solve_stationary(
            &spec,
            &grid,
            &(*params).0,
            &levels,
            DensityField::uniform(&grid),
            &cfg,
        ) {
            Ok(field) => {
                *out = Box::into_raw(Box::new(IsDensityField(field)));
                IsStatus::IsOk
            }
            Err(e) => set_error(IsStatus::IsSolverError, e),
        }
    })
}

/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_n(field: *const IsDensityField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.n
}

/// Number of cell rows: 1 for the 1-D reduction, n otherwise.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_rows(field: *const IsDensityField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.ny_cells
}

/// Cell-average density of cell (i, j), zero-based; NaN outside the grid.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_p(
    field: *const IsDensityField,
    i: usize,
    j: usize,
) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if i >= f.n || j >= f.ny_cells {
        return f64::NAN;
    }
    f.p_at(i + 1, j + 1)
}

/// Depleted-edge weight density of row j (zero-based); NaN outside.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_q(field: *const IsDensityField, j: usize) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if j >= f.ny_cells {
        return f64::NAN;
    }
    f.q[j]
}

/// Full-edge weight density of row j (zero-based); NaN outside.
///
/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_r(field: *const IsDensityField, j: usize) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    let f = &(*field).0;
    if j >= f.ny_cells {
        return f64::NAN;
    }
    f.r[j]
}

/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_mass(field: *const IsDensityField) -> f64 {
    if field.is_null() {
        return f64::NAN;
    }
    (*field).0.mass()
}

/// # Safety
/// `field` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_steps(field: *const IsDensityField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).0.steps
}

/// # Safety
/// `field` must come from [`is_fp_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn is_density_field_free(field: *mut IsDensityField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Monte-Carlo estimate of the discounted objective from `(x0, y0)` under
/// a flat threshold policy; writes the sample mean and its standard error.
///
/// # Safety
/// `params` must be a live handle; both out-pointers must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn is_mc_objective(
    params: *const IsParams,
    x_bar: f64,
    x0: f64,
    y0: f64,
    paths: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    out_mean: *mut f64,
    out_std_err: *mut f64,
) -> IsStatus {
    guard(|| {
        if params.is_null() || out_mean.is_null() || out_std_err.is_null() {
            return set_error(IsStatus::IsNullPointer, "null argument");
        }
        if paths < 2 || dt <= 0.0 || horizon <= 0.0 {
            return set_error(IsStatus::IsInvalidArgument, "need paths >= 2, dt > 0, horizon > 0");
        }
        let run = ObjectiveRun { paths, dt, horizon, seed };
        let est = estimate_objective(x0, y0, &(*params).0, &ThresholdPolicy::Scalar(x_bar), &run);
        *out_mean = est.mean;
        *out_std_err = est.std_err;
        IsStatus::IsOk
    })
}
