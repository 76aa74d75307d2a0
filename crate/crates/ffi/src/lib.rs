//! C ABI for nlslab.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_parse`/`nlslab_run` call and released by the matching `*_free`.
//! Fallible functions return an [`NlsStatus`]; on failure the message is
//! available from [`nlslab_last_error`] on the same thread until the next
//! failing call. Panics never unwind into C: they are reported as
//! `NLS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlslab::config::RunConfig;
use nlslab::cutoffs::CutoffFamily;
use nlslab::detector::VerdictKind;
use nlslab::experiment::{run, RunArtifacts, RunContext};
use nlslab::ground_state::{find_ground_state, thresholds_with_rho, GroundState};
use nlslab::{NlsError, NormSet, RadialGrid};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsVerdict {
    ScatteringConsistent = 0,
    Blowup = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlsNorms {
    pub mass: f64,
    pub kinetic: f64,
    pub l4_fourth: f64,
    pub energy: f64,
    pub sup_abs: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlsThresholds {
    pub em_threshold: f64,
    pub k_threshold: f64,
    pub gn_constant: f64,
    pub delta_prime: f64,
    pub rho: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlsCutoffValues {
    pub chi: f64,
    pub phi: f64,
    pub phi1: f64,
    pub psi: f64,
}

/// One sampled row of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlsRow {
    pub t: f64,
    pub norms: NlsNorms,
    pub action: f64,
    pub flux: f64,
    pub interaction: f64,
    pub virial: f64,
}

/// Opaque ground state.
pub struct NlsGroundState(GroundState);
/// Opaque run configuration.
pub struct NlsConfig(RunConfig);
/// Opaque cutoff family.
pub struct NlsCutoffs(CutoffFamily);
/// Opaque finished run: series, summary and final checkpoint.
pub struct NlsRun(RunArtifacts);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: NlsStatus, msg: impl Into<String>) -> NlsStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &NlsError) -> NlsStatus {
    match e {
        NlsError::Config { .. } => NlsStatus::Config,
        NlsError::Io(_) => NlsStatus::Io,
        NlsError::InvalidGrid(_) | NlsError::InvalidParameter(_) | NlsError::InvalidField(_) => {
            NlsStatus::InvalidArgument
        }
        _ => NlsStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), NlsStatus>) -> NlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(NlsStatus::Panic, msg)
        }
    }
}

fn lift<T>(r: nlslab::Result<T>) -> Result<T, NlsStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, NlsStatus> {
    if p.is_null() {
        return Err(fail(NlsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NlsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, NlsStatus> {
    p.as_ref()
        .ok_or_else(|| fail(NlsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, NlsStatus> {
    p.as_mut()
        .ok_or_else(|| fail(NlsStatus::NullPointer, format!("{what} is null")))
}

fn norms_c(n: &NormSet) -> NlsNorms {
    NlsNorms {
        mass: n.mass,
        kinetic: n.kinetic,
        l4_fourth: n.l4_fourth,
        energy: n.energy,
        sup_abs: n.sup_abs,
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlslab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Ground state on the free-space grid `[0, r_max]` with `n` nodes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_new(
    tol: f64,
    r_max: f64,
    n: usize,
    out: *mut *mut NlsGroundState,
) -> NlsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let grid = lift(RadialGrid::new(0.0, r_max, n))?;
        let gs = lift(find_ground_state(tol, &grid))?;
        *out = Box::into_raw(Box::new(NlsGroundState(gs)));
        Ok(())
    })
}

/// `Q(0)`, or NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle from [`nlslab_ground_state_new`].
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_a0(gs: *const NlsGroundState) -> f64 {
    gs.as_ref().map_or(f64::NAN, |g| g.0.a0())
}

/// `Q(r)` with the exponential tail beyond the grid, or NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle from [`nlslab_ground_state_new`].
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_value(gs: *const NlsGroundState, r: f64) -> f64 {
    gs.as_ref().map_or(f64::NAN, |g| g.0.q(r))
}

/// # Safety
/// `gs` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_norms(gs: *const NlsGroundState, out: *mut NlsNorms) -> NlsStatus {
    guard(|| {
        let gs = ref_arg(gs, "ground state")?;
        *out_arg(out, "out")? = norms_c(gs.0.norms());
        Ok(())
    })
}

/// # Safety
/// `gs` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_thresholds(
    gs: *const NlsGroundState,
    delta_prime: f64,
    rho: f64,
    out: *mut NlsThresholds,
) -> NlsStatus {
    guard(|| {
        let gs = ref_arg(gs, "ground state")?;
        let out = out_arg(out, "out")?;
        let tc = lift(thresholds_with_rho(&gs.0, delta_prime, rho))?;
        *out = NlsThresholds {
            em_threshold: tc.em_threshold,
            k_threshold: tc.k_threshold,
            gn_constant: tc.gn_constant,
            delta_prime: tc.delta_prime,
            rho: tc.rho,
        };
        Ok(())
    })
}

/// # Safety
/// `gs` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlslab_ground_state_free(gs: *mut NlsGroundState) {
    if !gs.is_null() {
        drop(Box::from_raw(gs));
    }
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_config_parse(text: *const c_char, out: *mut *mut NlsConfig) -> NlsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = lift(RunConfig::parse(str_arg(text, "text")?))?;
        *out = Box::into_raw(Box::new(NlsConfig(cfg)));
        Ok(())
    })
}

/// Sets one key; the configuration is left unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nlslab_config_set(cfg: *mut NlsConfig, key: *const c_char, value: *const c_char) -> NlsStatus {
    guard(|| {
        let cfg = out_arg(cfg, "config")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut next = cfg.0.clone();
        next.set(key, value)
            .map_err(|msg| fail(NlsStatus::Config, format!("key `{key}`: {msg}")))?;
        lift(next.validate())?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlslab_config_free(cfg: *mut NlsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_cutoffs_new(radius: f64, eta: f64, n_tab: usize, out: *mut *mut NlsCutoffs) -> NlsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cf = lift(CutoffFamily::build(radius, eta, n_tab))?;
        *out = Box::into_raw(Box::new(NlsCutoffs(cf)));
        Ok(())
    })
}

/// `χ, φ, φ₁, ψ` at radius `r`.
///
/// # Safety
/// `cf` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_cutoffs_eval(cf: *const NlsCutoffs, r: f64, out: *mut NlsCutoffValues) -> NlsStatus {
    guard(|| {
        let cf = &ref_arg(cf, "cutoffs")?.0;
        *out_arg(out, "out")? = NlsCutoffValues {
            chi: cf.chi(r),
            phi: cf.phi(r),
            phi1: cf.phi1(r),
            psi: cf.psi(r),
        };
        Ok(())
    })
}

/// # Safety
/// `cf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlslab_cutoffs_free(cf: *mut NlsCutoffs) {
    if !cf.is_null() {
        drop(Box::from_raw(cf));
    }
}

/// Runs the configuration from its initial data.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run(cfg: *const NlsConfig, out: *mut *mut NlsRun) -> NlsStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "config")?.0;
        let out = out_arg(out, "out")?;
        let ctx = lift(RunContext::for_config(cfg, false))?;
        let art = lift(run(cfg, &ctx, None))?;
        *out = Box::into_raw(Box::new(NlsRun(art)));
        Ok(())
    })
}

/// Number of sampled rows, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_rows(run: *const NlsRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.output.series.rows.len())
}

/// # Safety
/// `run` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_row(run: *const NlsRun, index: usize, out: *mut NlsRow) -> NlsStatus {
    guard(|| {
        let rows = &ref_arg(run, "run")?.0.output.series.rows;
        let out = out_arg(out, "out")?;
        let r = rows.get(index).ok_or_else(|| {
            fail(
                NlsStatus::InvalidArgument,
                format!("row {index} out of range (run has {})", rows.len()),
            )
        })?;
        *out = NlsRow {
            t: r.t,
            norms: norms_c(&r.norms),
            action: r.action,
            flux: r.flux,
            interaction: r.interaction,
            virial: r.virial,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_verdict(run: *const NlsRun, out: *mut NlsVerdict) -> NlsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        *out_arg(out, "out")? = match run.0.summary.verdict.kind {
            VerdictKind::ScatteringConsistent => NlsVerdict::ScatteringConsistent,
            VerdictKind::Blowup => NlsVerdict::Blowup,
            VerdictKind::Inconclusive => NlsVerdict::Inconclusive,
        };
        Ok(())
    })
}

unsafe fn copy_text(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), NlsStatus> {
    let len = text.len() + 1;
    if let Some(n) = needed.as_mut() {
        *n = len;
    }
    if buf.is_null() || cap < len {
        return Err(fail(
            NlsStatus::BufferTooSmall,
            format!("buffer holds {cap} bytes, {len} needed"),
        ));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Copies the series CSV into `buf`, NUL-terminated. `needed` (if not null)
/// receives the required size including the terminator; call with a null
/// `buf` to query it.
///
/// # Safety
/// `run` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_series_csv(
    run: *const NlsRun,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> NlsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        copy_text(&run.0.output.series.to_csv(), buf, cap, needed)
    })
}

/// Copies the summary JSON, with the same buffer protocol as
/// [`nlslab_run_series_csv`].
///
/// # Safety
/// `run` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_summary_json(
    run: *const NlsRun,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> NlsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let json = serde_json::to_string(&run.0.summary)
            .map_err(|e| fail(NlsStatus::Numerical, e.to_string()))?;
        copy_text(&json, buf, cap, needed)
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_free(run: *mut NlsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, NlsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(nlslab_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "boom");
    }

    #[test]
    fn interior_nul_does_not_lose_the_message() {
        set_error("a\0b".into());
        let msg = unsafe { CStr::from_ptr(nlslab_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }
}
