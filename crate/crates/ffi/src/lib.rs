//! C ABI over `mfteam`.
//!
//! Models and synthesis results are opaque heap handles that must be released
//! with their `_free` function. Every fallible call returns an [`MfStatus`];
//! on failure a message is available from [`mf_last_error_message`] on the
//! same thread. Matrices are copied out row-major into caller buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mfteam::model::{self, ModelSpec};
use mfteam::sim::{self, DisturbancePolicy, DisturbanceTarget, SimConfig};
use mfteam::synthesis::{self, RiccatiSolution, StrategyGains};
use mfteam::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    Infeasible = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfGain {
    LBrev = 0,
    LBar = 1,
    KBrev = 2,
    KBar = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfValueMatrix {
    MBrev = 0,
    MBar = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfDisturbance {
    Zero = 0,
    SinusoidFollowers = 1,
    WorstCase = 2,
}

/// A loaded model.
pub struct MfModel {
    spec: ModelSpec,
}

/// Riccati solution and, when feasible, gains for one model and γ.
pub struct MfSynthesis {
    model: ModelSpec,
    ric: RiccatiSolution,
    gains: Option<StrategyGains>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: MfStatus, msg: impl Into<String>) -> MfStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> MfStatus {
    let status = match &e {
        Error::Parse(_) | Error::Config(_) => MfStatus::ParseError,
        Error::Infeasible { .. } => MfStatus::Infeasible,
        Error::Io(_) | Error::Csv(_) => MfStatus::Internal,
        _ => MfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> MfStatus) -> MfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(MfStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, MfStatus> {
    if p.is_null() {
        return Err(fail(MfStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MfStatus::InvalidArgument, "string is not UTF-8"))
}

fn copy_matrix(m: &DMatrix<f64>, buf: *mut f64, len: usize, rows: *mut usize, cols: *mut usize) -> MfStatus {
    unsafe {
        if !rows.is_null() {
            *rows = m.nrows();
        }
        if !cols.is_null() {
            *cols = m.ncols();
        }
    }
    let need = m.len();
    if buf.is_null() {
        return if len == 0 {
            MfStatus::Ok
        } else {
            fail(MfStatus::NullPointer, "null buffer")
        };
    }
    if len < need {
        return fail(
            MfStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {need}"),
        );
    }
    let out = unsafe { std::slice::from_raw_parts_mut(buf, need) };
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[r * m.ncols() + c] = m[(r, c)];
        }
    }
    MfStatus::Ok
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a TOML model description.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_from_toml(text: *const c_char, out: *mut *mut MfModel) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfStatus::NullPointer, "null output pointer");
        }
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match model::load_model(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(MfModel { spec }));
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a bundled model, `"example1"` or `"example2"`.
///
/// # Safety
/// As for [`mf_model_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn mf_model_bundled(name: *const c_char, out: *mut *mut MfModel) -> MfStatus {
    guard(|| {
        if out.is_null() {
            return fail(MfStatus::NullPointer, "null output pointer");
        }
        let name = match str_arg(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match model::load_bundled(name) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(MfModel { spec }));
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_model_free(model: *mut MfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_model_set_gamma(model: *mut MfModel, gamma: f64) -> MfStatus {
    guard(|| {
        let Some(m) = model.as_mut() else {
            return fail(MfStatus::NullPointer, "null model");
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return from_error(Error::InvalidGamma(gamma));
        }
        m.spec = m.spec.with_gamma(gamma);
        MfStatus::Ok
    })
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mf_model_set_followers(model: *mut MfModel, n: usize) -> MfStatus {
    guard(|| {
        let Some(m) = model.as_mut() else {
            return fail(MfStatus::NullPointer, "null model");
        };
        match m.spec.with_followers(n) {
            Ok(spec) => {
                m.spec = spec;
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Horizon, state and action dimensions, follower count and γ. Any output
/// pointer may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_model_info(
    model: *const MfModel,
    horizon: *mut usize,
    state_dim: *mut usize,
    action_dim: *mut usize,
    n_followers: *mut usize,
    gamma: *mut f64,
) -> MfStatus {
    let Some(m) = model.as_ref() else {
        return fail(MfStatus::NullPointer, "null model");
    };
    let s = &m.spec;
    for (p, v) in [
        (horizon, s.horizon),
        (state_dim, s.state_dim),
        (action_dim, s.action_dim),
        (n_followers, s.n_followers),
    ] {
        if !p.is_null() {
            *p = v;
        }
    }
    if !gamma.is_null() {
        *gamma = s.gamma;
    }
    MfStatus::Ok
}

/// Runs both Riccati recursions. Succeeds for infeasible γ too; query
/// [`mf_synthesis_feasible`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_synthesize(model: *const MfModel, out: *mut *mut MfSynthesis) -> MfStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MfStatus::NullPointer, "null model");
        };
        if out.is_null() {
            return fail(MfStatus::NullPointer, "null output pointer");
        }
        let ric = synthesis::solve_riccati(&m.spec);
        let gains = synthesis::compute_gains(&m.spec, &ric).ok();
        *out = Box::into_raw(Box::new(MfSynthesis {
            model: m.spec.clone(),
            ric,
            gains,
        }));
        MfStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_synthesis_free(s: *mut MfSynthesis) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Feasibility verdict, smallest margin, and the violating step (0 if none).
///
/// # Safety
/// `s` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_synthesis_feasible(
    s: *const MfSynthesis,
    feasible: *mut bool,
    min_margin: *mut f64,
    violation_t: *mut usize,
) -> MfStatus {
    let Some(s) = s.as_ref() else {
        return fail(MfStatus::NullPointer, "null synthesis");
    };
    if !feasible.is_null() {
        *feasible = s.ric.feasible;
    }
    if !min_margin.is_null() {
        *min_margin = s.ric.min_margin();
    }
    if !violation_t.is_null() {
        *violation_t = s.ric.first_violation.or(s.ric.singular_at).unwrap_or(0);
    }
    MfStatus::Ok
}

/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_synthesis_optimal_value(s: *const MfSynthesis, out: *mut f64) -> MfStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(MfStatus::NullPointer, "null synthesis");
        };
        if out.is_null() {
            return fail(MfStatus::NullPointer, "null output pointer");
        }
        match synthesis::optimal_value(&s.model, &s.ric) {
            Ok(v) => {
                *out = v;
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copies gain `which` at step `t` (1-based) into `buf`. `rows`/`cols`
/// receive the shape even when the buffer is too small; pass a null buffer
/// with `len = 0` to query the shape.
///
/// # Safety
/// `s` must be a live handle; `buf` must hold `len` doubles; shape pointers
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn mf_synthesis_gain(
    s: *const MfSynthesis,
    which: MfGain,
    t: usize,
    buf: *mut f64,
    len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> MfStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(MfStatus::NullPointer, "null synthesis");
        };
        let Some(g) = &s.gains else {
            return fail(MfStatus::Infeasible, format!("gamma {} is infeasible", s.ric.gamma));
        };
        if t == 0 || t > g.horizon() {
            return fail(MfStatus::OutOfRange, format!("t={t} outside 1..={}", g.horizon()));
        }
        let m = match which {
            MfGain::LBrev => &g.l_brev[t - 1],
            MfGain::LBar => &g.l_bar[t - 1],
            MfGain::KBrev => &g.k_brev[t - 1],
            MfGain::KBar => &g.k_bar[t - 1],
        };
        copy_matrix(m, buf, len, rows, cols)
    })
}

/// Copies `M̆_t` or `M̄_t`, `t = 1..=T+1`, into `buf`.
///
/// # Safety
/// As for [`mf_synthesis_gain`].
#[no_mangle]
pub unsafe extern "C" fn mf_synthesis_value_matrix(
    s: *const MfSynthesis,
    which: MfValueMatrix,
    t: usize,
    buf: *mut f64,
    len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> MfStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(MfStatus::NullPointer, "null synthesis");
        };
        let series = match which {
            MfValueMatrix::MBrev => &s.ric.m_brev,
            MfValueMatrix::MBar => &s.ric.m_bar,
        };
        if t == 0 || t > series.len() {
            return fail(MfStatus::OutOfRange, format!("t={t} outside 1..={}", series.len()));
        }
        copy_matrix(&series[t - 1], buf, len, rows, cols)
    })
}

/// Bisects the feasibility boundary between an infeasible `lo` and a
/// feasible `hi`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_critical_gamma(
    model: *const MfModel,
    lo: f64,
    hi: f64,
    tol: f64,
    out: *mut f64,
) -> MfStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MfStatus::NullPointer, "null model");
        };
        if out.is_null() {
            return fail(MfStatus::NullPointer, "null output pointer");
        }
        match synthesis::critical_gamma(&m.spec, lo, hi, tol) {
            Ok(c) => {
                *out = c.gamma;
                MfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Monte Carlo mean and standard error of the realized cost under full
/// mean-field sharing. `amplitude` is used by the sinusoidal disturbance only.
///
/// # Safety
/// `s` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mf_simulate_cost(
    s: *const MfSynthesis,
    seed: u64,
    runs: usize,
    disturbance: MfDisturbance,
    amplitude: f64,
    mean: *mut f64,
    stderr: *mut f64,
) -> MfStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(MfStatus::NullPointer, "null synthesis");
        };
        let Some(g) = &s.gains else {
            return fail(MfStatus::Infeasible, format!("gamma {} is infeasible", s.ric.gamma));
        };
        let mut cfg = SimConfig::new(seed, runs);
        cfg.disturbance = match disturbance {
            MfDisturbance::Zero => DisturbancePolicy::Zero,
            MfDisturbance::SinusoidFollowers => DisturbancePolicy::Sinusoid {
                amplitude,
                target: DisturbanceTarget::Followers,
            },
            MfDisturbance::WorstCase => DisturbancePolicy::WorstCaseFeedback,
        };
        let cost = match sim::simulate(&s.model, g, &cfg).and_then(|r| sim::evaluate_cost(&s.model, &r)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        if !mean.is_null() {
            *mean = cost.mean;
        }
        if !stderr.is_null() {
            *stderr = cost.stderr;
        }
        MfStatus::Ok
    })
}
