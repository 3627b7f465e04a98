//! C ABI over `hypoctrl`.
//!
//! Every fallible call returns an [`HcStatus`]; on failure the message is kept
//! per thread and read back with [`hc_last_error`]. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hypoctrl::geometry::{IntervalUnion1D, MovingSupport, Region};
use hypoctrl::hum_control::{solve_null_control, ControlModel, ControlProblem, SolveOptions};
use hypoctrl::lebeau_robbiano::{cost_constant, density_sequence, verify_sequence, LRParams, TimeSet};
use hypoctrl::propagator::{propagate_fourier, FieldInit, GridSpec, OUSpec, PropagateOptions, SpectralField};
use hypoctrl::scenario::run_scenario;
use hypoctrl::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Numerical = 5,
    UnknownScenario = 6,
    Config = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> HcStatus {
    match e {
        Error::InvalidArgument { .. } | Error::EmptySequence => HcStatus::InvalidArgument,
        Error::DimensionMismatch(_) => HcStatus::DimensionMismatch,
        Error::NonFinite(_) => HcStatus::NonFinite,
        Error::UnknownScenario(_) => HcStatus::UnknownScenario,
        Error::Config(_) => HcStatus::Config,
        Error::Io(_) => HcStatus::Io,
        _ => HcStatus::Numerical,
    }
}

fn fail(status: HcStatus, msg: impl Into<String>) -> HcStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), HcStatus>) -> HcStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HcStatus::Panic, "panic inside hypoctrl"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, HcStatus>;
}

impl<T> OrStatus<T> for hypoctrl::Result<T> {
    fn or_status(self) -> Result<T, HcStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), HcStatus> {
    if p.is_null() {
        Err(fail(HcStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, HcStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| fail(HcStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], HcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Runs a named scenario, writing `result.json` and CSV files into `out_dir`.
/// `config_path` may be null for defaults.
///
/// # Safety
/// String arguments must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hc_run_scenario(name: *const c_char, config_path: *const c_char, out_dir: *const c_char, seed: u64) -> HcStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let out = c_str(out_dir, "out_dir")?;
        let cfg = if config_path.is_null() { None } else { Some(c_str(config_path, "config_path")?) };
        run_scenario(name, cfg.map(Path::new), Path::new(out), seed).or_status()?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HcCostConstant {
    pub gamma: f64,
    pub beta: f64,
    pub alpha_exp: f64,
    pub c_min: f64,
    pub mu_star: f64,
}

/// Optimal cost constant for `c1' = c2' = 1`, `m2 = 0`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn hc_cost_constant(a: f64, b: f64, m1: f64, c1: f64, c2: f64, out: *mut HcCostConstant) -> HcStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = LRParams::simple(a, b, m1, c1, c2).or_status()?;
        let c = cost_constant(&p).or_status()?;
        *out = HcCostConstant { gamma: c.gamma, beta: c.beta, alpha_exp: c.alpha_exp, c_min: c.c_min, mu_star: c.mu_star };
        Ok(())
    })
}

/// Opaque finite union of time intervals.
pub struct HcTimeSet(TimeSet);

/// Builds a time set from `n` pairs laid out as `lo0, hi0, lo1, hi1, …`.
///
/// # Safety
/// `bounds` must be valid for `2n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_time_set_new(bounds: *const f64, n: usize, out: *mut *mut HcTimeSet) -> HcStatus {
    guard(|| {
        non_null(out, "out")?;
        let b = slice(bounds, 2 * n, "bounds")?;
        let ts = TimeSet::new(b.chunks(2).map(|c| (c[0], c[1])).collect()).or_status()?;
        *out = Box::into_raw(Box::new(HcTimeSet(ts)));
        Ok(())
    })
}

/// # Safety
/// `ts` must be null or a handle from [`hc_time_set_new`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hc_time_set_free(ts: *mut HcTimeSet) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

/// # Safety
/// `ts` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_time_set_measure(ts: *const HcTimeSet, out: *mut f64) -> HcStatus {
    guard(|| {
        non_null(ts, "ts")?;
        non_null(out, "out")?;
        *out = (*ts).0.measure();
        Ok(())
    })
}

/// Density sequence `t_0 > … > t_{j_max}` accumulating at `t_star`. Writes up to
/// `cap` points into `out_t` and the point count into `out_len`; returns
/// `BufferTooSmall` (with `out_len` set) when `cap` is short. `out_valid` receives
/// 1 when the sequence passes the exact property check.
///
/// # Safety
/// `ts` must be a live handle; `out_t` valid for `cap` doubles; `out_len` and
/// `out_valid` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_density_sequence(
    ts: *const HcTimeSet,
    t_star: f64,
    r: f64,
    j_max: usize,
    out_t: *mut f64,
    cap: usize,
    out_len: *mut usize,
    out_valid: *mut i32,
) -> HcStatus {
    guard(|| {
        non_null(ts, "ts")?;
        non_null(out_len, "out_len")?;
        non_null(out_valid, "out_valid")?;
        let e = &(*ts).0;
        let seq = density_sequence(e, t_star, r, j_max).or_status()?;
        *out_len = seq.t.len();
        *out_valid = verify_sequence(e, &seq).all() as i32;
        if cap < seq.t.len() {
            return Err(fail(HcStatus::BufferTooSmall, format!("need {} slots, got {cap}", seq.t.len())));
        }
        non_null(out_t, "out_t")?;
        ptr::copy_nonoverlapping(seq.t.as_ptr(), out_t, seq.t.len());
        Ok(())
    })
}

/// Opaque sampled Fourier-side field.
pub struct HcField(SpectralField);

/// Reads a field in the binary layout written by the library.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_field_read(path: *const c_char, out: *mut *mut HcField) -> HcStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = c_str(path, "path")?;
        let f = File::open(path).map_err(|e| fail(HcStatus::Io, e.to_string()))?;
        let field = SpectralField::read_binary(BufReader::new(f)).or_status()?;
        *out = Box::into_raw(Box::new(HcField(field)));
        Ok(())
    })
}

/// Writes a field in the library's binary layout.
///
/// # Safety
/// `field` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hc_field_write(field: *const HcField, path: *const c_char) -> HcStatus {
    guard(|| {
        non_null(field, "field")?;
        let path = c_str(path, "path")?;
        let f = File::create(path).map_err(|e| fail(HcStatus::Io, e.to_string()))?;
        let mut w = BufWriter::new(f);
        (*field).0.write_binary(&mut w).or_status()?;
        w.flush().map_err(|e| fail(HcStatus::Io, e.to_string()))
    })
}

/// # Safety
/// `field` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hc_field_free(field: *mut HcField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Dimension and total sample count.
///
/// # Safety
/// `field` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hc_field_shape(field: *const HcField, out_dim: *mut usize, out_len: *mut usize) -> HcStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(out_dim, "out_dim")?;
        non_null(out_len, "out_len")?;
        *out_dim = (*field).0.dim();
        *out_len = (*field).0.samples().len();
        Ok(())
    })
}

/// Discrete `L²` norm of the samples.
///
/// # Safety
/// `field` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_field_norm(field: *const HcField, out: *mut f64) -> HcStatus {
    guard(|| {
        non_null(field, "field")?;
        non_null(out, "out")?;
        *out = (*field).0.norm();
        Ok(())
    })
}

/// Copies samples as interleaved `re, im` pairs; `cap` counts doubles.
///
/// # Safety
/// `field` must be a live handle; `out` valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_field_samples(field: *const HcField, out: *mut f64, cap: usize) -> HcStatus {
    guard(|| {
        non_null(field, "field")?;
        let s = (*field).0.samples();
        if cap < 2 * s.len() {
            return Err(fail(HcStatus::BufferTooSmall, format!("need {} doubles, got {cap}", 2 * s.len())));
        }
        non_null(out, "out")?;
        for (i, z) in s.iter().enumerate() {
            *out.add(2 * i) = z.re;
            *out.add(2 * i + 1) = z.im;
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HcModel {
    /// Heat equation in `d` dimensions.
    Heat = 0,
    /// Kolmogorov `∂_t + v∂_x − ∂_v²` in two dimensions.
    Kolmogorov = 1,
}

/// Evolves the Fourier transform of `exp(−|x−z|²/(2α))` from `t0` to `t1` on the
/// default grid. `center` holds `dim` entries; `dim` must be 2 for Kolmogorov.
///
/// # Safety
/// `center` valid for `dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_propagate_gaussian(
    model: HcModel,
    dim: usize,
    horizon: f64,
    center: *const f64,
    alpha: f64,
    t0: f64,
    t1: f64,
    out: *mut *mut HcField,
) -> HcStatus {
    guard(|| {
        non_null(out, "out")?;
        let z = slice(center, dim, "center")?;
        if dim == 0 {
            return Err(fail(HcStatus::InvalidArgument, "dim must be positive"));
        }
        let spec = match model {
            HcModel::Heat => OUSpec::heat(dim, horizon),
            HcModel::Kolmogorov if dim == 2 => OUSpec::kolmogorov(horizon),
            HcModel::Kolmogorov => return Err(fail(HcStatus::DimensionMismatch, "Kolmogorov model is two-dimensional")),
        };
        let init = FieldInit::Gaussian { center: z.to_vec(), alpha };
        let p = propagate_fourier(&spec, &init, t0, t1, &GridSpec::default_for(dim), PropagateOptions::default()).or_status()?;
        *out = Box::into_raw(Box::new(HcField(p.field)));
        Ok(())
    })
}

/// Opaque HUM null-control problem.
pub struct HcControlProblem(ControlProblem);

/// Heat equation on a torus of length `length` with `modes` grid points, controlled
/// from the periodic set `∪_k [k·period, k·period + duty·period]`, horizon `T`
/// split into `n_t` slices.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hc_control_heat_new(
    length: f64,
    modes: usize,
    period: f64,
    duty: f64,
    horizon: f64,
    n_t: usize,
    out: *mut *mut HcControlProblem,
) -> HcStatus {
    guard(|| {
        non_null(out, "out")?;
        if !(period > 0.0) || !(duty > 0.0 && duty <= 1.0) {
            return Err(fail(HcStatus::InvalidArgument, "need period > 0 and 0 < duty ≤ 1"));
        }
        let support = MovingSupport::Static { region: Region::interval_union(IntervalUnion1D::periodic(period, 0.0, duty * period)) };
        let p = ControlProblem::new(ControlModel::Heat1D { length, modes }, support, horizon, n_t).or_status()?;
        *out = Box::into_raw(Box::new(HcControlProblem(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`hc_control_heat_new`], freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hc_control_free(p: *mut HcControlProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of grid points of the state.
///
/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_control_state_len(p: *const HcControlProblem, out: *mut usize) -> HcStatus {
    guard(|| {
        non_null(p, "p")?;
        non_null(out, "out")?;
        *out = (*p).0.state_len();
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HcControlReport {
    pub cost: f64,
    pub dual_cost: f64,
    pub residual: f64,
    pub iterations: usize,
    pub success: i32,
}

/// Solves for the minimal-norm control steering the real initial state `f0`
/// (length = state length) to zero.
///
/// # Safety
/// `p` must be a live handle; `f0` valid for `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hc_control_solve(p: *const HcControlProblem, f0: *const f64, len: usize, tol: f64, out: *mut HcControlReport) -> HcStatus {
    guard(|| {
        non_null(p, "p")?;
        non_null(out, "out")?;
        let f0: Vec<Complex64> = slice(f0, len, "f0")?.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let r = solve_null_control(&(*p).0, &f0, &SolveOptions { tol, ..Default::default() }).or_status()?;
        *out = HcControlReport {
            cost: r.cost,
            dual_cost: r.dual_cost,
            residual: r.residual,
            iterations: r.iterations,
            success: r.success as i32,
        };
        Ok(())
    })
}
