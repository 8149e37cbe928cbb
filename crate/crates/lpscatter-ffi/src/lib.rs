//! C ABI over `lpscatter`.
//!
//! Every fallible call returns an [`LpsStatus`]. On failure the message is
//! stored per thread and can be read with [`lps_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use lpscatter::closed_form;
use lpscatter::evolution::linear_times;
use lpscatter::grid::{make_grid, DomainKind, Scheme};
use lpscatter::hardy::{oracle_suite, HardyProjector, PvScheme};
use lpscatter::lyapunov::{lyapunov_trace, LyapunovPair};
use lpscatter::packets::reference_packet;
use lpscatter::resonance::{build_resonance_states_with_floor, half_line_setup, projection_bound_report, ResonanceStates};
use lpscatter::smatrix::{ResonanceParams, SMatrixModel};
use lpscatter::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Precondition = 3,
    LinearAlgebra = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpsModel {
    Pure = 0,
    Perturbed = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LpsNorms {
    pub norm_app_sqr: f64,
    pub norm_res_sqr: f64,
    pub ratio: f64,
    pub closed_form_app_sqr: f64,
    pub closed_form_res_sqr: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LpsBound {
    pub lhs: f64,
    pub term1: f64,
    pub term2: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Hardy projectors on a rational full-line grid and the Lyapunov pair on its half line.
pub struct LpsSystem {
    hp: HardyProjector,
    pair: LyapunovPair,
}

/// Resonance states built on an [`LpsSystem`].
pub struct LpsResonance {
    states: ResonanceStates,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> LpsStatus {
    match err {
        Error::Parameter(_) | Error::Usage(_) | Error::Config(_) => LpsStatus::InvalidParameter,
        Error::Precondition(_) => LpsStatus::Precondition,
        Error::LinearAlgebra(_) => LpsStatus::LinearAlgebra,
        Error::Io(_) | Error::Report(_) => LpsStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LpsStatus, String)>) -> LpsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LpsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LpsStatus::Panic
        }
    }
}

fn lift(err: Error) -> (LpsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (LpsStatus, String) {
    (LpsStatus::NullPointer, format!("{what} is null"))
}

/// Length of the last error message in bytes, excluding the terminator; 0 when none.
#[no_mangle]
pub extern "C" fn lps_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf`, truncating to `len - 1` bytes.
/// Returns the number of bytes written, excluding the terminator.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn lps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Builds a system on a rational grid with `n` full-line nodes. A
/// nonpositive `scale` selects the default scale for `e_max`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lps_system_new(n: usize, e_max: f64, center: f64, scale: f64, out: *mut *mut LpsSystem) -> LpsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scale = (scale > 0.0).then_some(scale);
        let grid = make_grid(DomainKind::FullLine, n, e_max, Scheme::Rational { center, scale }).map_err(lift)?;
        let (hp, pair) = half_line_setup(&Arc::new(grid), PvScheme::Auto).map_err(lift)?;
        *out = Box::into_raw(Box::new(LpsSystem { hp, pair }));
        Ok(())
    })
}

/// # Safety
/// `system` must come from [`lps_system_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn lps_system_free(system: *mut LpsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Number of nodes on the half-line grid.
///
/// # Safety
/// `system` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn lps_system_half_len(system: *const LpsSystem) -> usize {
    system.as_ref().map_or(0, |s| s.pair.grid_half.n())
}

/// Copies the half-line nodes into `out`, which must hold `len` values.
///
/// # Safety
/// `system` must be a valid handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lps_system_half_nodes(system: *const LpsSystem, out: *mut f64, len: usize) -> LpsStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let nodes = s.pair.grid_half.nodes();
        if len != nodes.len() {
            return Err((LpsStatus::InvalidParameter, format!("buffer holds {len} values, need {}", nodes.len())));
        }
        ptr::copy_nonoverlapping(nodes.as_ptr(), out, len);
        Ok(())
    })
}

/// Largest relative residual of the rational Hardy oracle suite.
///
/// # Safety
/// `system` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lps_hardy_oracle(system: *const LpsSystem, out: *mut f64) -> LpsStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cases = oracle_suite(&s.hp);
        if cases.is_empty() {
            return Err((LpsStatus::Precondition, "no oracle pole is resolved on this grid".into()));
        }
        *out = cases.iter().fold(0.0_f64, |m, c| m.max(c.residual));
        Ok(())
    })
}

/// `tau(t)` for the reference packet at `len` equally spaced times from `t0`
/// to `t1`, using `M_F` when `forward` is true and `M_B` otherwise.
///
/// # Safety
/// `system` must be a valid handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lps_reference_trace(
    system: *const LpsSystem,
    forward: bool,
    t0: f64,
    t1: f64,
    out: *mut f64,
    len: usize,
) -> LpsStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < 2 || !(t1 > t0) {
            return Err((LpsStatus::InvalidParameter, "need len >= 2 and t1 > t0".into()));
        }
        let m = if forward { &s.pair.m_f } else { &s.pair.m_b };
        let psi = reference_packet(&s.pair.grid_half);
        let tau = lyapunov_trace(m, &psi, &linear_times(t0, t1, len)).map_err(lift)?;
        ptr::copy_nonoverlapping(tau.as_ptr(), out, len);
        Ok(())
    })
}

/// Builds the resonance states for the pole `e0 - i gamma`. A negative
/// `floor` selects the default inverse floor.
///
/// # Safety
/// `system` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lps_resonance_new(
    system: *const LpsSystem,
    e0: f64,
    gamma: f64,
    floor: f64,
    out: *mut *mut LpsResonance,
) -> LpsStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ResonanceParams::new(e0, gamma).map_err(lift)?;
        let floor = if floor < 0.0 { lpscatter::resonance::DEFAULT_INVERSE_FLOOR } else { floor };
        let states = build_resonance_states_with_floor(&s.pair, params, floor).map_err(lift)?;
        *out = Box::into_raw(Box::new(LpsResonance { states }));
        Ok(())
    })
}

/// # Safety
/// `res` must come from [`lps_resonance_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn lps_resonance_free(res: *mut LpsResonance) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Numeric norms next to their closed forms.
///
/// # Safety
/// `res` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lps_resonance_norms(res: *const LpsResonance, out: *mut LpsNorms) -> LpsStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("resonance"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let st = &r.states;
        let ResonanceParams { e0, gamma } = st.params;
        *out = LpsNorms {
            norm_app_sqr: st.norm_app_sqr,
            norm_res_sqr: st.norm_res_sqr,
            ratio: st.ratio,
            closed_form_app_sqr: closed_form::app_norm_sqr(e0, gamma),
            closed_form_res_sqr: closed_form::res_norm_sqr(gamma),
        };
        Ok(())
    })
}

/// Evaluates the eigenvector projection bound for the chosen S-matrix model.
///
/// # Safety
/// All pointers must be valid handles or outputs.
#[no_mangle]
pub unsafe extern "C" fn lps_resonance_bound(
    system: *const LpsSystem,
    res: *const LpsResonance,
    model: LpsModel,
    tol: f64,
    out: *mut LpsBound,
) -> LpsStatus {
    guard(|| {
        let s = system.as_ref().ok_or_else(|| null("system"))?;
        let r = res.as_ref().ok_or_else(|| null("resonance"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(tol >= 0.0) {
            return Err((LpsStatus::InvalidParameter, format!("tolerance must be nonnegative, got {tol}")));
        }
        let p = r.states.params;
        let m = match model {
            LpsModel::Pure => SMatrixModel::pure(p),
            LpsModel::Perturbed => SMatrixModel::perturbed(p),
        };
        let report = projection_bound_report(&r.states, &s.pair, &m, tol).map_err(lift)?;
        *out = LpsBound {
            lhs: report.lhs,
            term1: report.term("term1").unwrap_or(f64::NAN),
            term2: report.term("term2").unwrap_or(f64::NAN),
            rhs: report.rhs_total,
            pass: report.pass,
        };
        Ok(())
    })
}

/// `S(E)` for the chosen model with resonance pole `e0 - i gamma`.
///
/// # Safety
/// `re` and `im` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lps_smatrix_eval(
    e0: f64,
    gamma: f64,
    model: LpsModel,
    energy: f64,
    re: *mut f64,
    im: *mut f64,
) -> LpsStatus {
    guard(|| {
        let re = re.as_mut().ok_or_else(|| null("re"))?;
        let im = im.as_mut().ok_or_else(|| null("im"))?;
        let p = ResonanceParams::new(e0, gamma).map_err(lift)?;
        let m = match model {
            LpsModel::Pure => SMatrixModel::pure(p),
            LpsModel::Perturbed => SMatrixModel::perturbed(p),
        };
        let s = m.eval(energy);
        *re = s.re;
        *im = s.im;
        Ok(())
    })
}

/// Closed-form bound on the background term for the pole `e0 - i gamma`.
#[no_mangle]
pub extern "C" fn lps_background_bound(e0: f64, gamma: f64) -> f64 {
    if !(e0 > 0.0 && gamma > 0.0) {
        return f64::NAN;
    }
    closed_form::background_bound(closed_form::ratio(e0, gamma))
}
