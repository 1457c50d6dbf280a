//! C ABI for the nstree library.
//!
//! Fields cross the boundary as opaque `NstreeField` handles owned by the
//! caller and released with [`nstree_field_free`]. Every fallible function
//! returns an [`NstreeStatus`]; on failure a message is available from
//! [`nstree_last_error`] on the same thread. Output pointers are written
//! only on success. Panics are caught and reported as
//! `NSTREE_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;

use nstree::expand::{solution_series, ExpandConfig};
use nstree::field::snapshot::{read_snapshot, write_snapshot};
use nstree::field::{
    divergence_defect, heat_propagate, leray_project, mean_mode, random_divfree, rel_l2_diff,
    sobolev_norm, taylor_green, FieldFlags, GridSpec, SpectralVectorField,
};
use nstree::hierarchy::SimplexQuadrature;
use nstree::refsolver::{solve_etd, solve_picard, SolverConfig};
use nstree::treecomb::{catalan, forest_count_formula};
use nstree::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NstreeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    CapExceeded = 3,
    Io = 4,
    Numerical = 5,
    BufferSize = 6,
    Panic = 7,
}

/// Opaque spectral velocity field.
pub struct NstreeField {
    inner: SpectralVectorField,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> NstreeStatus {
    match err {
        Error::CapExceeded { .. } => NstreeStatus::CapExceeded,
        Error::Io(_) | Error::Json(_) | Error::Format(_) => NstreeStatus::Io,
        Error::BlowUp { .. }
        | Error::Stability(_)
        | Error::NonContraction { .. }
        | Error::SmallTimeRegime { .. }
        | Error::Quadrature(_)
        | Error::DegenerateFit(_) => NstreeStatus::Numerical,
        Error::SizeMismatch { .. } => NstreeStatus::BufferSize,
        _ => NstreeStatus::InvalidArgument,
    }
}

struct Failure(NstreeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NstreeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NstreeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NstreeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("panic: {msg}"));
            NstreeStatus::Panic
        }
    }
}

unsafe fn field_ref<'a>(
    f: *const NstreeField,
    what: &str,
) -> Result<&'a SpectralVectorField, Failure> {
    f.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn emit(out: *mut *mut NstreeField, u: SpectralVectorField) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(NstreeField { inner: u }));
    Ok(())
}

fn grid(n: u32, dealias: bool) -> Result<GridSpec, Failure> {
    Ok(GridSpec::with_dealias(n as usize, dealias)?)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn nstree_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nstree_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Taylor–Green field of the given amplitude on an N³ grid.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_taylor_green(
    n: u32,
    dealias: bool,
    amplitude: f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| emit(out, taylor_green(grid(n, dealias)?, amplitude)?))
}

/// Seeded random divergence-free field with spectrum ∝ |k|^−decay and the
/// given L² norm.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_random_divfree(
    n: u32,
    dealias: bool,
    seed: u64,
    decay: f64,
    norm: f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| emit(out, random_divfree(grid(n, dealias)?, seed, decay, norm)?))
}

#[no_mangle]
pub unsafe extern "C" fn nstree_field_clone(
    f: *const NstreeField,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| emit(out, field_ref(f, "field")?.clone()))
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_free(f: *mut NstreeField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub unsafe extern "C" fn nstree_field_grid_n(f: *const NstreeField, out: *mut u32) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        let out = out.as_mut().ok_or_else(|| null("output"))?;
        *out = u.grid().n() as u32;
        Ok(())
    })
}

/// Sobolev norm ‖(1+|k|²)^{α/2} û‖; α = 0 gives the L² norm.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_norm(
    f: *const NstreeField,
    alpha: f64,
    out: *mut f64,
) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        *out.as_mut().ok_or_else(|| null("output"))? = sobolev_norm(u, alpha);
        Ok(())
    })
}

/// max |k·û(k)| / max |k||û(k)|.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_divergence_defect(
    f: *const NstreeField,
    out: *mut f64,
) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        *out.as_mut().ok_or_else(|| null("output"))? = divergence_defect(u);
        Ok(())
    })
}

/// ‖a − b‖ / ‖b‖ in L².
#[no_mangle]
pub unsafe extern "C" fn nstree_field_rel_l2_diff(
    a: *const NstreeField,
    b: *const NstreeField,
    out: *mut f64,
) -> NstreeStatus {
    guard(|| {
        let d = rel_l2_diff(field_ref(a, "first field")?, field_ref(b, "second field")?)?;
        *out.as_mut().ok_or_else(|| null("output"))? = d;
        Ok(())
    })
}

/// e^{tΔ} applied to the field.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_heat(
    f: *const NstreeField,
    t: f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| emit(out, heat_propagate(field_ref(f, "field")?, t)?))
}

/// Leray projection onto divergence-free fields.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_leray(
    f: *const NstreeField,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| emit(out, leray_project(field_ref(f, "field")?)))
}

/// Number of doubles in the coefficient buffer: 6·N³.
#[no_mangle]
pub unsafe extern "C" fn nstree_field_coefficient_len(
    f: *const NstreeField,
    out: *mut usize,
) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        *out.as_mut().ok_or_else(|| null("output"))? = 2 * u.coeffs().len();
        Ok(())
    })
}

/// Copies the coefficients as interleaved (re, im) doubles, component by
/// component, each in FFT order: index (i₁·N + i₂)·N + i₃ with
/// i = k mod N. `len` must equal [`nstree_field_coefficient_len`].
#[no_mangle]
pub unsafe extern "C" fn nstree_field_copy_coefficients(
    f: *const NstreeField,
    buf: *mut f64,
    len: usize,
) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let want = 2 * u.coeffs().len();
        if len != want {
            return Err(Failure(
                NstreeStatus::BufferSize,
                format!("buffer holds {len} doubles, need {want}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (pair, z) in dst.chunks_exact_mut(2).zip(u.coeffs()) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Builds a field from a buffer in the layout of
/// [`nstree_field_copy_coefficients`].
#[no_mangle]
pub unsafe extern "C" fn nstree_field_from_coefficients(
    n: u32,
    dealias: bool,
    buf: *const f64,
    len: usize,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| {
        let g = grid(n, dealias)?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let want = 6 * g.len();
        if len != want {
            return Err(Failure(
                NstreeStatus::BufferSize,
                format!("buffer holds {len} doubles, need {want}"),
            ));
        }
        let src = std::slice::from_raw_parts(buf, len);
        let coeffs: Vec<Complex64> = src
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        let mut u = SpectralVectorField::from_coeffs(g, coeffs, FieldFlags::default())?;
        u.flags = FieldFlags {
            divergence_free: divergence_defect(&u) < 1e-12,
            mean_zero: mean_mode(&u).iter().all(|z| z.norm() == 0.0),
        };
        emit(out, u)
    })
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NstreeStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

/// Writes the binary snapshot and its JSON sidecar (`<path>.json`).
#[no_mangle]
pub unsafe extern "C" fn nstree_field_write_snapshot(
    f: *const NstreeField,
    path: *const c_char,
) -> NstreeStatus {
    guard(|| {
        let u = field_ref(f, "field")?;
        write_snapshot(
            path_arg(path)?,
            u,
            serde_json::json!({ "writer": "nstree-ffi" }),
        )?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn nstree_field_read_snapshot(
    path: *const c_char,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| {
        let (u, _) = read_snapshot(path_arg(path)?)?;
        emit(out, u)
    })
}

/// The n-th Catalan number, the count of marked binary trees with n
/// vertices.
#[no_mangle]
pub unsafe extern "C" fn nstree_catalan(n: u32, out: *mut u64) -> NstreeStatus {
    guard(|| {
        let v = u64::try_from(catalan(n as usize)).map_err(|_| {
            Failure(
                NstreeStatus::CapExceeded,
                format!("catalan({n}) exceeds 64 bits"),
            )
        })?;
        *out.as_mut().ok_or_else(|| null("output"))? = v;
        Ok(())
    })
}

/// Number of ordered k-tuples of marked binary trees with n vertices in total.
#[no_mangle]
pub unsafe extern "C" fn nstree_forest_count(n: u32, k: u32, out: *mut u64) -> NstreeStatus {
    guard(|| {
        let v = u64::try_from(forest_count_formula(n as usize, k as usize)).map_err(|_| {
            Failure(
                NstreeStatus::CapExceeded,
                format!("forest count ({n}, {k}) exceeds 64 bits"),
            )
        })?;
        *out.as_mut().ok_or_else(|| null("output"))? = v;
        Ok(())
    })
}

fn solver_config(dt: f64) -> Result<SolverConfig, Failure> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Failure(
            NstreeStatus::InvalidArgument,
            format!("time step must be positive, got {dt}"),
        ));
    }
    Ok(SolverConfig {
        dt,
        ..SolverConfig::default()
    })
}

/// Navier–Stokes solution at time t by second-order exponential time
/// differencing with step dt. Requires a dealiased grid.
#[no_mangle]
pub unsafe extern "C" fn nstree_solve_etd(
    f: *const NstreeField,
    t: f64,
    dt: f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| {
        emit(
            out,
            solve_etd(field_ref(f, "field")?, t, &solver_config(dt)?)?,
        )
    })
}

/// Navier–Stokes solution at time t by Picard iteration of the mild form.
#[no_mangle]
pub unsafe extern "C" fn nstree_solve_picard(
    f: *const NstreeField,
    t: f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| {
        emit(
            out,
            solve_picard(field_ref(f, "field")?, t, &SolverConfig::default())?,
        )
    })
}

/// Partial sum of the tree series through `max_order` at time t, with
/// `nodes` Gauss–Legendre points per time integral. When `term_norms` is
/// not null it receives the L² norm of each order, `max_order + 1` values.
#[no_mangle]
pub unsafe extern "C" fn nstree_solution_series(
    f: *const NstreeField,
    t: f64,
    max_order: u32,
    nodes: u32,
    term_norms: *mut f64,
    out: *mut *mut NstreeField,
) -> NstreeStatus {
    guard(|| {
        let u0 = field_ref(f, "field")?;
        let q = SimplexQuadrature::gauss(nodes as usize);
        q.validate()?;
        let (report, partial) = solution_series(
            u0,
            t,
            max_order as usize,
            &q,
            None,
            &ExpandConfig::default(),
        )?;
        if !term_norms.is_null() {
            let dst = std::slice::from_raw_parts_mut(term_norms, report.rows.len());
            for (d, row) in dst.iter_mut().zip(&report.rows) {
                *d = row.term_l2;
            }
        }
        emit(out, partial)
    })
}
