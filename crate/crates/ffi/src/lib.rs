//! C ABI over the phonon-lab engine.
//!
//! A `PlModel` handle owns a parameter set and the drift convention. Every
//! fallible function returns a `PlStatus`; on failure the message is
//! available from `pl_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use phonon_lab::dynamics::{simulate_attractor, AttractorKind, IntegratorConfig};
use phonon_lab::entanglement::steady_state_entanglement;
use phonon_lab::fixed_points::{
    eigen_threshold, find_threshold, gamma_opt, solve_fixed_point, stability_eigenvalues,
};
use phonon_lab::gaussian::{log_negativity, TwoModeCovariance};
use phonon_lab::{ClassicalState, DriftConvention, Error, ModelParams};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Integration, root finding or eigenvalue failure.
    Numerical = 3,
    /// No stable fixed point, so no stationary covariance.
    NotHurwitz = 4,
    NoBracket = 5,
    NonPhysical = 6,
    LinearizationBreakdown = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlParams {
    pub j: f64,
    pub omega_m: f64,
    pub g: f64,
    pub gamma_m: f64,
    pub delta: f64,
    pub lambda: f64,
    pub nbar: f64,
}

/// Mean-field state `(x1, y1, x2, y2, q, p)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlState {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub q: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlFixedPoint {
    pub state: PlState,
    pub residual: f64,
    pub max_re: f64,
    /// 1 when every drift eigenvalue has negative real part.
    pub stable: i32,
}

/// `kind`: 1 = fixed point, 2 = limit cycle. Period and extrema are 0 for
/// fixed points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlAttractor {
    pub kind: i32,
    pub q0: f64,
    pub amplitude: f64,
    pub period: f64,
    pub extrema_per_period: u32,
    pub terminal: PlState,
}

/// Drift conventions accepted by `pl_model_set_convention`.
pub const PL_CONVENTION_QUADRATURE: i32 = 0;
pub const PL_CONVENTION_MEAN_FIELD: i32 = 1;

/// Opaque model handle.
pub struct PlModel {
    params: ModelParams,
    convention: DriftConvention,
    integrator: IntegratorConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::InvalidParams(_) | Error::Config(_) => PlStatus::InvalidArgument,
        Error::NotHurwitz { .. } => PlStatus::NotHurwitz,
        Error::NoBracket(_) => PlStatus::NoBracket,
        Error::NonPhysical(_) => PlStatus::NonPhysical,
        Error::LinearizationBreakdown { .. } => PlStatus::LinearizationBreakdown,
        _ => PlStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), PlStatusError>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PlStatus::Ok
        }
        Ok(Err(PlStatusError(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside phonon-lab");
            PlStatus::Panic
        }
    }
}

struct PlStatusError(PlStatus, String);

impl From<Error> for PlStatusError {
    fn from(e: Error) -> Self {
        PlStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> PlStatusError {
    PlStatusError(PlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn model_ref<'a>(m: *const PlModel) -> Result<&'a PlModel, PlStatusError> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn out_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, PlStatusError> {
    p.as_mut().ok_or_else(|| null(what))
}

impl From<PlParams> for ModelParams {
    fn from(p: PlParams) -> Self {
        ModelParams {
            j: p.j,
            omega_m: p.omega_m,
            g: p.g,
            gamma_m: p.gamma_m,
            delta: p.delta,
            lambda: p.lambda,
            nbar: p.nbar,
        }
    }
}

impl From<ModelParams> for PlParams {
    fn from(p: ModelParams) -> Self {
        PlParams {
            j: p.j,
            omega_m: p.omega_m,
            g: p.g,
            gamma_m: p.gamma_m,
            delta: p.delta,
            lambda: p.lambda,
            nbar: p.nbar,
        }
    }
}

impl From<ClassicalState> for PlState {
    fn from(s: ClassicalState) -> Self {
        PlState {
            x1: s.x1,
            y1: s.y1,
            x2: s.x2,
            y2: s.y2,
            q: s.q,
            p: s.p,
        }
    }
}

impl From<PlState> for ClassicalState {
    fn from(s: PlState) -> Self {
        ClassicalState {
            x1: s.x1,
            y1: s.y1,
            x2: s.x2,
            y2: s.y2,
            q: s.q,
            p: s.p,
        }
    }
}

/// Version string of the engine; static storage.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or "" after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reference rates (J = 10, omega_m = 20, g = 0.02, gamma_m = 0.01, nbar = 0).
#[no_mangle]
pub extern "C" fn pl_params_reference(delta: f64, lambda: f64) -> PlParams {
    ModelParams::reference(delta, lambda).into()
}

/// Creates a model; free it with `pl_model_free`.
///
/// # Safety
/// `params` must point to a valid `PlParams`; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pl_model_new(params: *const PlParams, out: *mut *mut PlModel) -> PlStatus {
    guard(|| {
        let p: ModelParams = (*params.as_ref().ok_or_else(|| null("params"))?).into();
        let out = out_mut(out, "out")?;
        p.validate()?;
        *out = Box::into_raw(Box::new(PlModel {
            params: p,
            convention: DriftConvention::Quadrature,
            integrator: IntegratorConfig::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `pl_model_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pl_model_free(model: *mut PlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Replaces the parameters; the model is unchanged on error.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_model_set_params(model: *mut PlModel, params: *const PlParams) -> PlStatus {
    guard(|| {
        let m = out_mut(model, "model")?;
        let p: ModelParams = (*params.as_ref().ok_or_else(|| null("params"))?).into();
        p.validate()?;
        m.params = p;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_model_get_params(model: *const PlModel, out: *mut PlParams) -> PlStatus {
    guard(|| {
        *out_mut(out, "out")? = model_ref(model)?.params.into();
        Ok(())
    })
}

/// `PL_CONVENTION_QUADRATURE` (default) or `PL_CONVENTION_MEAN_FIELD`.
///
/// # Safety
/// `model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_model_set_convention(model: *mut PlModel, convention: i32) -> PlStatus {
    guard(|| {
        let m = out_mut(model, "model")?;
        m.convention = match convention {
            PL_CONVENTION_QUADRATURE => DriftConvention::Quadrature,
            PL_CONVENTION_MEAN_FIELD => DriftConvention::MeanField,
            other => {
                return Err(PlStatusError(
                    PlStatus::InvalidArgument,
                    format!("unknown convention {other}"),
                ))
            }
        };
        Ok(())
    })
}

/// Writes up to `capacity` fixed points (ascending `q`) and their total
/// number to `count`. Returns `BufferTooSmall` if `capacity < count`;
/// the first `capacity` entries are still written.
///
/// # Safety
/// `out` must hold `capacity` elements (may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn pl_fixed_points(
    model: *const PlModel,
    out: *mut PlFixedPoint,
    capacity: usize,
    count: *mut usize,
) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let count = out_mut(count, "count")?;
        let fps = solve_fixed_point(&m.params)?;
        *count = fps.len();
        if capacity > 0 && out.is_null() {
            return Err(null("out"));
        }
        for (k, fp) in fps.iter().take(capacity).enumerate() {
            *out.add(k) = PlFixedPoint {
                state: fp.state.into(),
                residual: fp.residual,
                max_re: fp.max_real_eigenvalue(),
                stable: i32::from(fp.stable),
            };
        }
        if capacity < fps.len() {
            return Err(PlStatusError(
                PlStatus::BufferTooSmall,
                format!("{} fixed points, room for {capacity}", fps.len()),
            ));
        }
        Ok(())
    })
}

/// Drift-matrix eigenvalues at `state`, real part descending.
///
/// # Safety
/// `re` and `im` must each hold 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_stability_eigenvalues(
    model: *const PlModel,
    state: *const PlState,
    re: *mut f64,
    im: *mut f64,
) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let s = *state.as_ref().ok_or_else(|| null("state"))?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let ev = stability_eigenvalues(&m.params, &s.into())?;
        for (k, z) in ev.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        Ok(())
    })
}

/// Radiation-pressure damping rate at a fixed point.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_gamma_opt(model: *const PlModel, state: *const PlState, out: *mut f64) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let s = *state.as_ref().ok_or_else(|| null("state"))?;
        *out_mut(out, "out")? = gamma_opt(&m.params, &s.into());
        Ok(())
    })
}

/// Threshold drive at detuning `delta` from `gamma_m + gamma_opt = 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_threshold_gamma(model: *const PlModel, delta: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_mut(out, "out")? = find_threshold(&m.params, delta)?;
        Ok(())
    })
}

/// Threshold drive at detuning `delta` where the fixed point loses stability.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_threshold_eigen(model: *const PlModel, delta: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_mut(out, "out")? = eigen_threshold(&m.params, delta)?;
        Ok(())
    })
}

/// Stationary 6x6 covariance (row-major) at the stable fixed point.
///
/// # Safety
/// `out` must hold 36 doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_steady_covariance(model: *const PlModel, out: *mut f64) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let st = steady_state_entanglement(&m.params, m.convention)?;
        for i in 0..6 {
            for j in 0..6 {
                *out.add(6 * i + j) = st.covariance.0[(i, j)];
            }
        }
        Ok(())
    })
}

/// Stationary log negativity and mechanical fluctuation radius.
///
/// # Safety
/// Pointers must be valid; `radius` may be null.
#[no_mangle]
pub unsafe extern "C" fn pl_steady_entanglement(
    model: *const PlModel,
    log_neg: *mut f64,
    radius: *mut f64,
) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_mut(log_neg, "log_neg")?;
        let st = steady_state_entanglement(&m.params, m.convention)?;
        *out = st.log_negativity;
        if let Some(r) = radius.as_mut() {
            *r = st.radius.0;
        }
        Ok(())
    })
}

/// Log negativity of a two-mode covariance `W` (4x4, row-major).
///
/// # Safety
/// `w` must hold 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn pl_log_negativity(w: *const f64, out: *mut f64) -> PlStatus {
    guard(|| {
        if w.is_null() {
            return Err(null("w"));
        }
        let m = TwoModeCovariance::from_row_slice(std::slice::from_raw_parts(w, 16));
        *out_mut(out, "out")? = log_negativity(&m)?;
        Ok(())
    })
}

/// Integrates from a seeded random state and classifies the attractor.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_simulate_attractor(model: *const PlModel, seed: u64, out: *mut PlAttractor) -> PlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_mut(out, "out")?;
        let r = simulate_attractor(&m.params, &m.integrator, seed)?;
        *out = PlAttractor {
            kind: match r.kind {
                AttractorKind::FixedPoint => 1,
                AttractorKind::LimitCycle => 2,
            },
            q0: r.q0,
            amplitude: r.amplitude,
            period: r.period.unwrap_or(0.0),
            extrema_per_period: r.extrema_per_period.unwrap_or(0),
            terminal: r.terminal.into(),
        };
        Ok(())
    })
}
