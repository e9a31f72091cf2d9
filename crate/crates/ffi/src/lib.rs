//! C ABI over the `stokes-saddle` channel assembly and solvers.
//!
//! Every function returns an [`SspStatus`]. On failure the message of the
//! last error on the calling thread is available from
//! [`ssp_last_error_message`]. Handles come from
//! [`ssp_system_assemble_channel`] and are released with
//! [`ssp_system_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stokes_saddle::bench::{solve_system, Outer};
use stokes_saddle::fem::{channel_system, export_system, Condensation, SaddleSystem, StokesParams};
use stokes_saddle::krylov::KrylovConfig;
use stokes_saddle::precond::{certified_beta, Mode, DEFAULT_SEED};
use stokes_saddle::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotConverged = 4,
    Breakdown = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SspOuter {
    Rgmres = 0,
    Fgmres = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SspPrecond {
    Pr = 0,
    Pgr = 1,
}

/// Opaque assembled saddle-point system.
pub struct SspSystem {
    inner: SaddleSystem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SspSolveOptions {
    pub outer: SspOuter,
    pub precond: SspPrecond,
    /// Regularization parameter; zero or negative selects the automatic value.
    pub beta: f64,
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SspSolveStats {
    pub iterations: usize,
    /// 1 when the outer method met its tolerance.
    pub converged: i32,
    pub beta: f64,
    pub res: f64,
    pub rres: f64,
    pub inner_a_solves: usize,
    pub wall_time: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SspStatus {
    match err {
        Error::DimensionMismatch { .. } => SspStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::ChannelMismatch(_) => SspStatus::InvalidArgument,
        Error::NotConverged { .. } => SspStatus::NotConverged,
        Error::Breakdown { .. } => SspStatus::Breakdown,
        Error::Io(_) | Error::MatrixMarket { .. } => SspStatus::Io,
        _ => SspStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SspStatus, String)>) -> SspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SspStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SspStatus::Panic
        }
    }
}

fn lib(err: Error) -> (SspStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (SspStatus, String) {
    (SspStatus::NullPointer, format!("{what} is null"))
}

/// Assembles the channel problem on an `nx × ny × nz` box mesh of
/// `(0, 2.2) × (0, 0.41)²`. `unscaled_c` nonzero selects the unscaled bubble
/// block. Writes a new handle to `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_assemble_channel(
    nx: usize,
    ny: usize,
    nz: usize,
    alpha: f64,
    nu: f64,
    unscaled_c: i32,
    out: *mut *mut SspSystem,
) -> SspStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let condensation = if unscaled_c != 0 {
            Condensation::Unscaled
        } else {
            Condensation::Mini
        };
        let params = StokesParams::new(alpha, nu).with_condensation(condensation);
        let sys = channel_system([nx, ny, nz], &params).map_err(lib)?;
        let handle = Box::into_raw(Box::new(SspSystem { inner: sys }));
        // SAFETY: `out` is non-null and writable per the contract.
        unsafe { *out = handle };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sys` must be null or a handle from [`ssp_system_assemble_channel`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_free(sys: *mut SspSystem) {
    if !sys.is_null() {
        // SAFETY: ownership returns to Rust exactly once per the contract.
        drop(unsafe { Box::from_raw(sys) });
    }
}

unsafe fn system<'a>(sys: *const SspSystem) -> Result<&'a SaddleSystem, (SspStatus, String)> {
    // SAFETY: caller guarantees `sys` is null or a live handle.
    unsafe { sys.as_ref() }.map(|s| &s.inner).ok_or_else(|| null("system"))
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (SspStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (SspStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn check_len(expected: usize, got: usize) -> Result<(), (SspStatus, String)> {
    if expected == got {
        Ok(())
    } else {
        Err((
            SspStatus::DimensionMismatch,
            format!("buffer length {got}, system dimension {expected}"),
        ))
    }
}

/// Velocity unknowns per component and pressure unknowns.
///
/// # Safety
/// `sys` must be a live handle; `n_u` and `n_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_dims(sys: *const SspSystem, n_u: *mut usize, n_p: *mut usize) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        if n_u.is_null() || n_p.is_null() {
            return Err(null("dimension output"));
        }
        // SAFETY: both pointers are non-null and writable per the contract.
        unsafe {
            *n_u = s.n_u();
            *n_p = s.n_p();
        }
        Ok(())
    })
}

/// `y = 𝒜 x` with `x`, `y` of length `3 n_u + n_p`, ordered
/// `(u₁, u₂, u₃, p)`.
///
/// # Safety
/// `x` and `y` must hold `len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_apply(sys: *const SspSystem, x: *const f64, y: *mut f64, len: usize) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        check_len(s.dim(), len)?;
        let x = unsafe { slice_in(x, len, "x") }?;
        let y = unsafe { slice_out(y, len, "y") }?;
        s.apply_flat(x, y).map_err(lib)
    })
}

/// Copies the right-hand side `d` into `out`.
///
/// # Safety
/// `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_rhs(sys: *const SspSystem, out: *mut f64, len: usize) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        check_len(s.dim(), len)?;
        let out = unsafe { slice_out(out, len, "out") }?;
        out.copy_from_slice(s.rhs.as_slice());
        Ok(())
    })
}

/// Writes the blocks as Matrix Market files plus metadata into `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn ssp_system_export(sys: *const SspSystem, dir: *const c_char) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        if dir.is_null() {
            return Err(null("dir"));
        }
        // SAFETY: NUL-terminated per the contract.
        let dir = unsafe { CStr::from_ptr(dir) }
            .to_str()
            .map_err(|e| (SspStatus::InvalidArgument, format!("dir is not UTF-8: {e}")))?;
        export_system(Path::new(dir), s).map_err(lib)
    })
}

/// Heuristic β raised, if necessary, to satisfy the estimated
/// positive-definiteness certificate.
///
/// # Safety
/// `beta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssp_beta_auto(sys: *const SspSystem, beta: *mut f64) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        if beta.is_null() {
            return Err(null("beta"));
        }
        let b = certified_beta(s, 1.1, DEFAULT_SEED).map_err(lib)?.beta;
        // SAFETY: non-null and writable per the contract.
        unsafe { *beta = b };
        Ok(())
    })
}

/// Restarted GMRES with P_Gr, `tol = 1e-6`, restart 20, 200 iterations,
/// automatic β.
#[no_mangle]
pub extern "C" fn ssp_solve_options_default() -> SspSolveOptions {
    let cfg = KrylovConfig::default();
    SspSolveOptions {
        outer: SspOuter::Rgmres,
        precond: SspPrecond::Pgr,
        beta: 0.0,
        tol: cfg.tol,
        restart: cfg.restart,
        max_iters: cfg.max_iters,
    }
}

/// Solves `𝒜 x = d` from `x = 0`. The solution is written to `x` even when
/// the outer method stops unconverged; `SSP_STATUS_NOT_CONVERGED` is
/// returned in that case. `stats` may be null.
///
/// # Safety
/// `opts` must be readable, `x` must hold `len` writable doubles and
/// `stats` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ssp_solve(
    sys: *const SspSystem,
    opts: *const SspSolveOptions,
    x: *mut f64,
    len: usize,
    stats: *mut SspSolveStats,
) -> SspStatus {
    guard(|| {
        let s = unsafe { system(sys) }?;
        // SAFETY: readable per the contract.
        let o = unsafe { opts.as_ref() }.ok_or_else(|| null("opts"))?;
        check_len(s.dim(), len)?;
        let out = unsafe { slice_out(x, len, "x") }?;
        let cfg = KrylovConfig {
            tol: o.tol,
            restart: o.restart,
            max_iters: o.max_iters,
            ..KrylovConfig::default()
        };
        let beta = if o.beta > 0.0 {
            o.beta
        } else {
            certified_beta(s, 1.1, DEFAULT_SEED).map_err(lib)?.beta
        };
        let outer = match o.outer {
            SspOuter::Rgmres => Outer::Rgmres,
            SspOuter::Fgmres => Outer::Fgmres,
        };
        let mode = match o.precond {
            SspPrecond::Pr => Mode::Pr,
            SspPrecond::Pgr => Mode::Pgr,
        };
        let (sol, rep) = solve_system(s, outer, mode, beta, &cfg).map_err(lib)?;
        out.copy_from_slice(&sol);
        let (res, rres) = s.residual_norms(&sol).map_err(lib)?;
        if !stats.is_null() {
            // SAFETY: non-null and writable per the contract.
            unsafe {
                *stats = SspSolveStats {
                    iterations: rep.iterations,
                    converged: i32::from(rep.converged),
                    beta,
                    res,
                    rres,
                    inner_a_solves: rep.inner.a_solves,
                    wall_time: rep.wall_time,
                };
            }
        }
        if rep.converged {
            Ok(())
        } else {
            Err((
                SspStatus::NotConverged,
                format!("outer method stopped after {} iterations, rres {rres:e}", rep.iterations),
            ))
        }
    })
}

/// Copies the last error message of the calling thread into `buf`
/// (NUL-terminated, truncated to `len − 1` bytes) and returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ssp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` holds `len > n` bytes per the contract.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}
