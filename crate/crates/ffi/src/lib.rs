//! C ABI for the sqzmem toolkit.
//!
//! Objects are opaque heap handles created by `sqz_*_new`-style functions and
//! released with the matching `sqz_*_free`. Every fallible call returns a
//! [`SqzStatus`]; on failure the message is available from
//! [`sqz_last_error`] on the same thread until the next failing call.
//! Results are written through caller-provided out pointers, which are left
//! untouched on failure. Panics never cross the boundary.
//!
//! Quadratures are in shot-noise units (vacuum variance 1) throughout.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sqzmem::error::ErrorCategory;
use sqzmem::gaussian::{apply_noisy_channel, estimate_excess_noise, gaussian_fidelity};
use sqzmem::raman::{retrieved_mode_channel, ControlPulse, MemoryParams, Retrieval};
use sqzmem::tomography::{gaussian_to_fock, mle_reconstruct, uhlmann_fidelity, wigner_evaluate, MleConfig, QuadratureSample};
use sqzmem::{cli, ChannelParams, Error, GaussianState, TemporalMode};

/// Status codes. The error categories mirror the command line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqzStatus {
    Ok = 0,
    /// Invalid argument, I/O or other failure.
    ErrOther = 1,
    /// Scenario or schema error.
    ErrSchema = 2,
    /// Numerical solver failure.
    ErrSolver = 3,
    /// Estimation failure (empty data, rank deficiency, truncation).
    ErrEstimation = 4,
    /// Output directory locked by another run.
    ErrLocked = 5,
    /// A required pointer argument was null.
    ErrNullPointer = 6,
    /// A string argument was not valid UTF-8.
    ErrUtf8 = 7,
    /// Internal panic caught at the boundary.
    ErrPanic = 8,
}

/// Opaque single-mode Gaussian state.
pub struct SqzGaussianState(GaussianState);

/// Opaque noisy loss channel `V -> eta V + 1 - eta + delta`.
pub struct SqzChannel(ChannelParams);

/// Opaque truncated Fock-basis density matrix.
pub struct SqzDensityMatrix(sqzmem::tomography::DensityMatrix);

/// Gaussian envelope on `[0, duration]`, sampled on the memory time grid.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SqzPulseShape {
    pub center: f64,
    pub fwhm: f64,
    /// Peak amplitude; ignored for the signal mode, which is normalized.
    pub peak: f64,
}

/// Raman memory configuration in normalized units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SqzMemoryConfig {
    pub g_s: f64,
    pub g_a: f64,
    pub delta_k: f64,
    pub length: f64,
    pub n_z: usize,
    pub n_t: usize,
    /// Nonzero selects backward retrieval.
    pub backward: i32,
    pub duration: f64,
    pub write: SqzPulseShape,
    pub read: SqzPulseShape,
    pub signal: SqzPulseShape,
}

enum FfiError {
    Core(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for FfiError {
    fn from(e: Error) -> Self {
        FfiError::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> SqzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqzStatus::Ok,
        Ok(Err(FfiError::Core(e))) => {
            set_last_error(e.to_string());
            match e.category() {
                ErrorCategory::Schema => SqzStatus::ErrSchema,
                ErrorCategory::Solver => SqzStatus::ErrSolver,
                ErrorCategory::Estimation => SqzStatus::ErrEstimation,
                ErrorCategory::Locked => SqzStatus::ErrLocked,
                ErrorCategory::Other => SqzStatus::ErrOther,
            }
        }
        Ok(Err(FfiError::Null(name))) => {
            set_last_error(format!("null pointer argument: {name}"));
            SqzStatus::ErrNullPointer
        }
        Ok(Err(FfiError::Utf8(name))) => {
            set_last_error(format!("argument {name} is not valid UTF-8"));
            SqzStatus::ErrUtf8
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            SqzStatus::ErrPanic
        }
    }
}

unsafe fn r<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(name))
}

unsafe fn w<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &'static str) -> Result<&'a [T], FfiError> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(name))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sqz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// State with principal variances `v_min <= v_max` (SNU), the squeezed axis
/// at `angle` radians.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_new(v_min: f64, v_max: f64, angle: f64, out: *mut *mut SqzGaussianState) -> SqzStatus {
    guard(|| {
        let out = w(out, "out")?;
        *out = Box::into_raw(Box::new(SqzGaussianState(GaussianState::new(v_min, v_max, angle)?)));
        Ok(())
    })
}

/// State with the given squeezing and anti-squeezing in dB below and above
/// shot noise.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_squeezed(
    squeeze_db: f64,
    antisqueeze_db: f64,
    angle: f64,
    out: *mut *mut SqzGaussianState,
) -> SqzStatus {
    guard(|| {
        let out = w(out, "out")?;
        let s = GaussianState::squeezed_vacuum(squeeze_db, antisqueeze_db, angle)?;
        *out = Box::into_raw(Box::new(SqzGaussianState(s)));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_free(state: *mut SqzGaussianState) {
    free(state)
}

/// Principal variances and squeezing angle.
///
/// # Safety
/// `state` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_variances(
    state: *const SqzGaussianState,
    v_min: *mut f64,
    v_max: *mut f64,
    angle: *mut f64,
) -> SqzStatus {
    guard(|| {
        let s = &r(state, "state")?.0;
        let (a, b, c) = (w(v_min, "v_min")?, w(v_max, "v_max")?, w(angle, "angle")?);
        (*a, *b, *c) = (s.v_min(), s.v_max(), s.angle());
        Ok(())
    })
}

/// Quadrature variance at local-oscillator phase `theta`.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_quadrature_variance(
    state: *const SqzGaussianState,
    theta: f64,
    out: *mut f64,
) -> SqzStatus {
    guard(|| {
        *w(out, "out")? = r(state, "state")?.0.quadrature_variance(theta);
        Ok(())
    })
}

/// Squeezing and anti-squeezing in dB relative to shot noise.
///
/// # Safety
/// `state` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_db(
    state: *const SqzGaussianState,
    squeeze_db: *mut f64,
    antisqueeze_db: *mut f64,
) -> SqzStatus {
    guard(|| {
        let s = &r(state, "state")?.0;
        let (a, b) = (w(squeeze_db, "squeeze_db")?, w(antisqueeze_db, "antisqueeze_db")?);
        (*a, *b) = (s.squeezing_db(), s.antisqueezing_db());
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sqz_channel_new(eta: f64, delta: f64, out: *mut *mut SqzChannel) -> SqzStatus {
    guard(|| {
        let out = w(out, "out")?;
        *out = Box::into_raw(Box::new(SqzChannel(ChannelParams::new(eta, delta)?)));
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_channel_free(channel: *mut SqzChannel) {
    free(channel)
}

/// # Safety
/// `channel` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_channel_params(channel: *const SqzChannel, eta: *mut f64, delta: *mut f64) -> SqzStatus {
    guard(|| {
        let c = &r(channel, "channel")?.0;
        let (a, b) = (w(eta, "eta")?, w(delta, "delta")?);
        (*a, *b) = (c.eta(), c.delta());
        Ok(())
    })
}

/// Output state of `channel` for input `state`, as a new handle.
///
/// # Safety
/// `state` and `channel` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_channel_apply(
    channel: *const SqzChannel,
    state: *const SqzGaussianState,
    out: *mut *mut SqzGaussianState,
) -> SqzStatus {
    guard(|| {
        let c = &r(channel, "channel")?.0;
        let s = &r(state, "state")?.0;
        let out = w(out, "out")?;
        *out = Box::into_raw(Box::new(SqzGaussianState(apply_noisy_channel(s, c))));
        Ok(())
    })
}

/// Closed-form fidelity between two zero-mean Gaussian states.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_gaussian_fidelity(
    a: *const SqzGaussianState,
    b: *const SqzGaussianState,
    out: *mut f64,
) -> SqzStatus {
    guard(|| {
        *w(out, "out")? = gaussian_fidelity(&r(a, "a")?.0, &r(b, "b")?.0);
        Ok(())
    })
}

/// Phase-averaged excess noise from input and output variance curves sampled
/// at the same `n` phases.
///
/// # Safety
/// The four arrays must hold `n` values each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_estimate_excess_noise(
    theta: *const f64,
    v_in: *const f64,
    v_out: *const f64,
    n: usize,
    eta: f64,
    v_vac: f64,
    out: *mut f64,
) -> SqzStatus {
    guard(|| {
        let t = slice(theta, n, "theta")?;
        let vi = slice(v_in, n, "v_in")?;
        let vo = slice(v_out, n, "v_out")?;
        let out = w(out, "out")?;
        let a: Vec<(f64, f64)> = t.iter().copied().zip(vi.iter().copied()).collect();
        let b: Vec<(f64, f64)> = t.iter().copied().zip(vo.iter().copied()).collect();
        *out = estimate_excess_noise(&a, &b, eta, v_vac)?;
        Ok(())
    })
}

/// Fock-basis density matrix of `state`, optionally sent through `channel`
/// (may be null), truncated at photon number `cutoff - 1`.
///
/// # Safety
/// `state` must be a live handle, `channel` null or live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_gaussian_to_fock(
    state: *const SqzGaussianState,
    channel: *const SqzChannel,
    cutoff: usize,
    out: *mut *mut SqzDensityMatrix,
) -> SqzStatus {
    guard(|| {
        let s = &r(state, "state")?.0;
        let c = channel.as_ref().map(|c| &c.0);
        let out = w(out, "out")?;
        *out = Box::into_raw(Box::new(SqzDensityMatrix(gaussian_to_fock(s, c, cutoff)?)));
        Ok(())
    })
}

/// Maximum-likelihood reconstruction from `n` homodyne samples `x[i]` (SNU)
/// at phases `theta[i]`. `iterations` bounds the iterative updates.
///
/// # Safety
/// `x` and `theta` must hold `n` values; `out` and `converged` (may be null)
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_mle_reconstruct(
    x: *const f64,
    theta: *const f64,
    n: usize,
    cutoff: usize,
    iterations: usize,
    converged: *mut i32,
    out: *mut *mut SqzDensityMatrix,
) -> SqzStatus {
    guard(|| {
        let xs = slice(x, n, "x")?;
        let ts = slice(theta, n, "theta")?;
        let out = w(out, "out")?;
        let samples = xs
            .iter()
            .zip(ts)
            .map(|(&x, &t)| QuadratureSample::from_snu(x, t))
            .collect::<sqzmem::Result<Vec<_>>>()?;
        let cfg = MleConfig {
            cutoff,
            iterations,
            ..MleConfig::default()
        };
        let res = mle_reconstruct(&samples, &cfg)?;
        if let Some(c) = converged.as_mut() {
            *c = i32::from(res.converged);
        }
        *out = Box::into_raw(Box::new(SqzDensityMatrix(res.rho)));
        Ok(())
    })
}

/// # Safety
/// `rho` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_density_free(rho: *mut SqzDensityMatrix) {
    free(rho)
}

/// Dimension of the truncated Fock space.
///
/// # Safety
/// `rho` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_density_cutoff(rho: *const SqzDensityMatrix, out: *mut usize) -> SqzStatus {
    guard(|| {
        *w(out, "out")? = r(rho, "rho")?.0.cutoff();
        Ok(())
    })
}

/// Matrix element `<m|rho|n>`.
///
/// # Safety
/// `rho` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_density_element(
    rho: *const SqzDensityMatrix,
    m: usize,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> SqzStatus {
    guard(|| {
        let d = &r(rho, "rho")?.0;
        let (a, b) = (w(re, "re")?, w(im, "im")?);
        if m >= d.cutoff() || n >= d.cutoff() {
            return Err(Error::InvalidParameter(format!("element ({m}, {n}) outside cutoff {}", d.cutoff())).into());
        }
        let z = d.get(m, n);
        (*a, *b) = (z.re, z.im);
        Ok(())
    })
}

/// Uhlmann fidelity between two density matrices of equal cutoff.
///
/// # Safety
/// `a` and `b` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_uhlmann_fidelity(
    a: *const SqzDensityMatrix,
    b: *const SqzDensityMatrix,
    out: *mut f64,
) -> SqzStatus {
    guard(|| {
        let f = uhlmann_fidelity(&r(a, "a")?.0, &r(b, "b")?.0)?;
        *w(out, "out")? = f;
        Ok(())
    })
}

/// Wigner function at `n` phase-space points `(x[i], p[i])` in the
/// vacuum-1/2 convention, written to `values`.
///
/// # Safety
/// `x`, `p` and `values` must hold `n` values; `rho` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sqz_density_wigner(
    rho: *const SqzDensityMatrix,
    x: *const f64,
    p: *const f64,
    n: usize,
    values: *mut f64,
) -> SqzStatus {
    guard(|| {
        let d = &r(rho, "rho")?.0;
        let xs = slice(x, n, "x")?;
        let ps = slice(p, n, "p")?;
        if n > 0 && values.is_null() {
            return Err(FfiError::Null("values"));
        }
        for i in 0..n {
            let g = wigner_evaluate(d, &xs[i..=i], &ps[i..=i])?;
            *values.add(i) = g.values[0];
        }
        Ok(())
    })
}

/// Effective channel of the memory for the retrieved mode: solves the write
/// and read dynamics and reports transmission `eta` and excess noise `delta`.
///
/// # Safety
/// `config` must point to a valid configuration; `eta` and `delta` writable.
#[no_mangle]
pub unsafe extern "C" fn sqz_memory_channel(config: *const SqzMemoryConfig, eta: *mut f64, delta: *mut f64) -> SqzStatus {
    guard(|| {
        let c = r(config, "config")?;
        let (e, d) = (w(eta, "eta")?, w(delta, "delta")?);
        let params = MemoryParams {
            g_s: c.g_s,
            g_a: c.g_a,
            delta_k: c.delta_k,
            length: c.length,
            n_z: c.n_z,
            n_t: c.n_t,
            retrieval: if c.backward != 0 { Retrieval::Backward } else { Retrieval::Forward },
        };
        let pulse = |s: &SqzPulseShape| ControlPulse::gaussian(c.n_t, c.duration, s.center, s.fwhm, s.peak);
        let mode = TemporalMode::gaussian(c.n_t, c.duration, c.signal.center, c.signal.fwhm)?;
        let ch = retrieved_mode_channel(&params, &pulse(&c.write)?, &pulse(&c.read)?, &mode)?;
        (*e, *d) = (ch.eta, ch.delta);
        Ok(())
    })
}

/// Runs one scenario command (for example `"full-pipeline"`) and commits the
/// artifacts to `out_dir`.
///
/// # Safety
/// `scenario_path`, `command` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sqz_run_scenario(
    scenario_path: *const c_char,
    command: *const c_char,
    out_dir: *const c_char,
) -> SqzStatus {
    guard(|| {
        let path = string(scenario_path, "scenario_path")?;
        let name = string(command, "command")?;
        let out = string(out_dir, "out_dir")?;
        let cmd = cli::Command::from_name(name)
            .ok_or_else(|| Error::Scenario(format!("unknown command '{name}'")))?;
        if cmd == cli::Command::Plot {
            cli::replot(Path::new(out))?;
        } else {
            let sc = cli::prepare(Path::new(path), cmd, None)?;
            cli::run_scenario(&sc, cmd, Path::new(out))?;
        }
        Ok(())
    })
}
