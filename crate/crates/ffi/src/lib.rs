//! C interface to the sub-band DPD simulator.
//!
//! Objects are exposed as opaque handles created by `sbdpd_*_new`/`load`
//! functions and released with the matching `sbdpd_*_free`. Every fallible
//! call returns an [`SbdpdStatus`]; the message of the most recent failure on
//! the calling thread is available through [`sbdpd_last_error`].
//!
//! Complex arrays are interleaved `[re, im]` pairs of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64 as C64;
use subband_dpd::basis::{gen_basis, orthogonalize, BasisSet, OrthoTransform, SubBandId};
use subband_dpd::error::DpdError;
use subband_dpd::learn::{block_adaptive_update, sample_adaptive_step};
use subband_dpd::metrics::{flops_model, FlopsKind};
use subband_dpd::pa::{builtin_fixture, PaModel, PowerAmplifier};
use subband_dpd::scenario::{run, write_artifacts, RunReport, Scenario};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbdpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Order = 4,
    Band = 5,
    Shape = 6,
    Numeric = 7,
    Divergence = 8,
    UnsupportedOrder = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// One complex sample.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbdpdComplex {
    pub re: f64,
    pub im: f64,
}

/// Running complexity figures.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbdpdComplexity {
    pub basis_flops: u64,
    pub filtering_flops: u64,
    pub total_flops: u64,
    pub rate_hz: f64,
    pub gflops: f64,
}

/// IMR and spur power of one learned sub-band.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbdpdSubBandResult {
    /// IM order, 3 to 9.
    pub order: u32,
    /// +1 or -1.
    pub sign: i32,
    pub imr_before_dbc: f64,
    pub imr_after_dbc: f64,
    pub spur_before_dbm: f64,
    pub spur_after_dbm: f64,
}

/// Behavioral PA model.
pub struct SbdpdPa(PaModel);

/// Basis columns of one sub-band.
pub struct SbdpdBasis(BasisSet);

/// Lower-triangular orthonormalizing transform.
pub struct SbdpdTransform(OrthoTransform);

/// A loaded scenario that can be configured and run.
pub struct SbdpdScenario(Scenario);

/// Outcome of a scenario run.
pub struct SbdpdReport(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &DpdError) -> SbdpdStatus {
    match e {
        DpdError::Config { .. } => SbdpdStatus::Config,
        DpdError::Order(_) => SbdpdStatus::Order,
        DpdError::Band(_) => SbdpdStatus::Band,
        DpdError::Shape(_) => SbdpdStatus::Shape,
        DpdError::Divergence { .. } => SbdpdStatus::Divergence,
        DpdError::UnsupportedOrder(_) => SbdpdStatus::UnsupportedOrder,
        DpdError::Io(_) => SbdpdStatus::Io,
        DpdError::InvalidInput(_) | DpdError::Overlap { .. } => SbdpdStatus::InvalidArgument,
        DpdError::Rate(_)
        | DpdError::Design(_)
        | DpdError::Align(_)
        | DpdError::DegenerateBasis { .. }
        | DpdError::ZeroDivide(_) => SbdpdStatus::Numeric,
    }
}

enum Fail {
    Status(SbdpdStatus, String),
    Dpd(DpdError),
}

impl From<DpdError> for Fail {
    fn from(e: DpdError) -> Self {
        Fail::Dpd(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(SbdpdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Status(SbdpdStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SbdpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbdpdStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Dpd(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SbdpdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_in<'a>(p: *const SbdpdComplex, n: usize, what: &str) -> Result<&'a [C64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p.cast::<C64>(), n))
}

unsafe fn slice_out<'a>(p: *mut SbdpdComplex, n: usize, what: &str) -> Result<&'a mut [C64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p.cast::<C64>(), n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

fn sub_band(order: u32, sign: i32) -> Result<SubBandId, Fail> {
    match sign {
        1 => Ok(SubBandId::plus(order)?),
        -1 => Ok(SubBandId::minus(order)?),
        _ => Err(invalid(format!("sign must be +1 or -1, got {sign}"))),
    }
}

/// Copies `text` with a terminating NUL into `buf`. `needed` receives the
/// required size including the NUL, also when the buffer is too small.
unsafe fn copy_text(
    text: &str,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> Result<(), Fail> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err(Fail::Status(
            SbdpdStatus::BufferTooSmall,
            format!("buffer holds {len} bytes, {} needed", bytes.len() + 1),
        ));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
    *buf.add(bytes.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbdpd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbdpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- PA ----

/// Loads a PA fixture file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_pa_load(path: *const c_char, out: *mut *mut SbdpdPa) -> SbdpdStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        put(out, SbdpdPa(PaModel::load(Path::new(p))?))
    })
}

/// Returns a shipped fixture: `memoryless3`, `memoryless5` or `ph9`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_pa_builtin(
    name: *const c_char,
    out: *mut *mut SbdpdPa,
) -> SbdpdStatus {
    guard(|| {
        let n = str_arg(name, "name")?;
        put(out, SbdpdPa(builtin_fixture(n)?))
    })
}

/// Highest nonlinearity order of the model, 0 for a null handle.
///
/// # Safety
/// `pa` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_pa_order(pa: *const SbdpdPa) -> u32 {
    pa.as_ref().map_or(0, |p| p.0.order())
}

/// Drives the PA with `n` input samples and writes `n` outputs. The model
/// starts from zero history on every call.
///
/// # Safety
/// `input` and `output` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_pa_apply(
    pa: *const SbdpdPa,
    input: *const SbdpdComplex,
    n: usize,
    output: *mut SbdpdComplex,
) -> SbdpdStatus {
    guard(|| {
        let pa = handle(pa, "pa")?;
        let x = slice_in(input, n, "input")?;
        let y = pa.0.apply_samples(x);
        slice_out(output, n, "output")?.copy_from_slice(&y);
        Ok(())
    })
}

/// # Safety
/// `pa` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_pa_free(pa: *mut SbdpdPa) {
    if !pa.is_null() {
        drop(Box::from_raw(pa));
    }
}

// ---- basis and transform ----

/// Generates the basis of sub-band `order`/`sign` up to DPD order `q` from
/// the two carrier baseband sequences of length `n`.
///
/// # Safety
/// `x1` and `x2` must each hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_basis_new(
    x1: *const SbdpdComplex,
    x2: *const SbdpdComplex,
    n: usize,
    order: u32,
    sign: i32,
    q: u32,
    rate_hz: f64,
    out: *mut *mut SbdpdBasis,
) -> SbdpdStatus {
    guard(|| {
        let sb = sub_band(order, sign)?;
        let a = slice_in(x1, n, "x1")?;
        let b = slice_in(x2, n, "x2")?;
        put(out, SbdpdBasis(gen_basis(a, b, sb, q, rate_hz)?))
    })
}

/// Number of basis columns, 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_basis_columns(basis: *const SbdpdBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.n_columns())
}

/// Samples per column, 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_basis_len(basis: *const SbdpdBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.len())
}

/// Copies column `col` into `out`, which must hold `n` = column length elements.
///
/// # Safety
/// `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_basis_column(
    basis: *const SbdpdBasis,
    col: usize,
    out: *mut SbdpdComplex,
    n: usize,
) -> SbdpdStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.0;
        let c = b
            .columns
            .get(col)
            .ok_or_else(|| invalid(format!("column {col} out of range")))?;
        if n != c.len() {
            return Err(Fail::Dpd(DpdError::Shape(format!(
                "column has {} samples, buffer {n}",
                c.len()
            ))));
        }
        slice_out(out, n, "out")?.copy_from_slice(c);
        Ok(())
    })
}

/// # Safety
/// `basis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_basis_free(basis: *mut SbdpdBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Computes the orthonormalizing transform of `basis`.
///
/// # Safety
/// `basis` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_transform_new(
    basis: *const SbdpdBasis,
    out: *mut *mut SbdpdTransform,
) -> SbdpdStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.0;
        let (_, w) = orthogonalize(b)?;
        put(out, SbdpdTransform(w))
    })
}

/// Transform dimension, 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_transform_dim(w: *const SbdpdTransform) -> usize {
    w.as_ref().map_or(0, |w| w.0.dim())
}

/// Copies the row-major dim x dim matrix into `out`.
///
/// # Safety
/// `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_transform_entries(
    w: *const SbdpdTransform,
    out: *mut SbdpdComplex,
    n: usize,
) -> SbdpdStatus {
    guard(|| {
        let w = &handle(w, "transform")?.0;
        let rows = w.rows();
        if n != rows.len() {
            return Err(Fail::Dpd(DpdError::Shape(format!(
                "transform has {} entries, buffer {n}",
                rows.len()
            ))));
        }
        slice_out(out, n, "out")?.copy_from_slice(rows);
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_transform_free(w: *mut SbdpdTransform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

// ---- adaptation ----

/// One NLMS update over a block of `m` regressor rows of width `k`
/// (row-major in `rows`) and their errors. `alpha` is updated in place.
/// With `m == 1` this is the per-sample update.
///
/// # Safety
/// `alpha` must hold `k`, `rows` `m * k` and `error` `m` elements.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_nlms_update(
    alpha: *mut SbdpdComplex,
    k: usize,
    rows: *const SbdpdComplex,
    error: *const SbdpdComplex,
    m: usize,
    mu: f64,
    regularizer: f64,
) -> SbdpdStatus {
    guard(|| {
        if k == 0 || m == 0 {
            return Err(invalid("empty update"));
        }
        let a = slice_out(alpha, k, "alpha")?;
        let r = slice_in(rows, m * k, "rows")?;
        let e = slice_in(error, m, "error")?;
        let next = if m == 1 {
            sample_adaptive_step(a, r, e[0], mu, regularizer)?
        } else {
            let rows: Vec<Vec<C64>> = r.chunks(k).map(<[C64]>::to_vec).collect();
            block_adaptive_update(a, &rows, e, mu, regularizer)?
        };
        a.copy_from_slice(&next);
        Ok(())
    })
}

// ---- complexity ----

/// Complexity of ninth-order processing with memory depth `memory` at
/// `rate_hz`. `sub_band_order` is 3, 5, 7 or 9, or 0 for full-band DPD.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_flops(
    sub_band_order: u32,
    q: u32,
    memory: u64,
    rate_hz: f64,
    out: *mut SbdpdComplexity,
) -> SbdpdStatus {
    guard(|| {
        let kind = match sub_band_order {
            0 => FlopsKind::FullBand,
            m => FlopsKind::SubBand(m),
        };
        let r = flops_model(kind, q, memory, rate_hz)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = SbdpdComplexity {
            basis_flops: r.basis_flops,
            filtering_flops: r.filtering_flops,
            total_flops: r.total_flops,
            rate_hz: r.rate_hz,
            gflops: r.gflops,
        };
        Ok(())
    })
}

// ---- scenarios ----

/// Loads a scenario file, or a shipped one named `preset:<name>`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_scenario_load(
    path: *const c_char,
    out: *mut *mut SbdpdScenario,
) -> SbdpdStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        put(out, SbdpdScenario(Scenario::load(Path::new(p))?))
    })
}

/// # Safety
/// `sc` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_scenario_set_seed(sc: *mut SbdpdScenario, seed: u64) -> SbdpdStatus {
    guard(|| {
        sc.as_mut().ok_or_else(|| null("scenario"))?.0.seed = seed;
        Ok(())
    })
}

/// Runs the scenario: learns every target and evaluates the result.
///
/// # Safety
/// `sc` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_scenario_run(
    sc: *const SbdpdScenario,
    out: *mut *mut SbdpdReport,
) -> SbdpdStatus {
    guard(|| {
        let sc = &handle(sc, "scenario")?.0;
        put(out, SbdpdReport(run(sc)?))
    })
}

/// # Safety
/// `sc` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_scenario_free(sc: *mut SbdpdScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Number of learned sub-bands, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_sub_bands(r: *const SbdpdReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.summary.sub_bands.len())
}

/// Results for learned sub-band `index`, in learning order.
///
/// # Safety
/// `r` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_sub_band(
    r: *const SbdpdReport,
    index: usize,
    out: *mut SbdpdSubBandResult,
) -> SbdpdStatus {
    guard(|| {
        let s = &handle(r, "report")?.0.summary;
        let b = s
            .sub_bands
            .get(index)
            .ok_or_else(|| invalid(format!("sub-band index {index} out of range")))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = SbdpdSubBandResult {
            order: b.sub_band.order(),
            sign: b.sub_band.sign().as_f64() as i32,
            imr_before_dbc: b.imr_before_dbc,
            imr_after_dbc: b.imr_after_dbc,
            spur_before_dbm: b.spur_before_dbm,
            spur_after_dbm: b.spur_after_dbm,
        };
        Ok(())
    })
}

/// Per-carrier EVM in percent, without and with DPD. Each array holds two values.
///
/// # Safety
/// `before` and `after` must each hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_evm(
    r: *const SbdpdReport,
    before: *mut f64,
    after: *mut f64,
) -> SbdpdStatus {
    guard(|| {
        let s = &handle(r, "report")?.0.summary;
        if before.is_null() || after.is_null() {
            return Err(null("evm buffer"));
        }
        ptr::copy_nonoverlapping(s.evm_before_pct.as_ptr(), before, 2);
        ptr::copy_nonoverlapping(s.evm_after_pct.as_ptr(), after, 2);
        Ok(())
    })
}

/// Writes the summary as TOML into `buf`. See [`SbdpdStatus::BufferTooSmall`];
/// `needed` (may be null) receives the size including the NUL.
///
/// # Safety
/// `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_summary_toml(
    r: *const SbdpdReport,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> SbdpdStatus {
    guard(|| {
        let s = &handle(r, "report")?.0.summary;
        copy_text(&s.to_toml_string(), buf, len, needed)
    })
}

/// Writes summary, spectra and learning histories into directory `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_write(
    r: *const SbdpdReport,
    dir: *const c_char,
) -> SbdpdStatus {
    guard(|| {
        let rep = &handle(r, "report")?.0;
        let d = str_arg(dir, "dir")?;
        write_artifacts(rep, Path::new(d))?;
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbdpd_report_free(r: *mut SbdpdReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
