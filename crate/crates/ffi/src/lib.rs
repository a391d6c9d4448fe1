//! C ABI for the telegraph toolkit.
//!
//! Every fallible function returns a [`TgStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`tg_last_error`] on the same thread until the next failing call.
//! Objects are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use telegraph::coupling::{
    coalescent_couple_reflected, coalescent_couple_unreflected, CouplingResult,
};
use telegraph::excursions::{regenerative_estimate, ExcursionSampler, Integrand};
use telegraph::rng::{domain, try_par_map};
use telegraph::simulate::{simulate_reflected, simulate_unreflected};
use telegraph::{Error, LaplaceValue, ModelParams, PiecewisePath, Process, RngStream, Velocity};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    InvalidRates = 1,
    Degenerate = 2,
    InvalidArgument = 3,
    RecursionCap = 4,
    OutOfDomain = 5,
    NonFinite = 6,
    NullPointer = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgProcess {
    Reflected = 0,
    Unreflected = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgIntegrand {
    /// `1{v = +1}`; the parameter is ignored.
    VelocityUp = 0,
    /// `e^{param·x}`.
    ExpPosition = 1,
    /// `x^param`, param a nonnegative integer.
    Moment = 2,
    /// `1{x <= param}`.
    PositionAtMost = 3,
}

/// Model parameters `(a, b)`.
pub struct TgModel(ModelParams);

/// One simulated trajectory.
pub struct TgPath(PiecewisePath);

/// Two coupled trajectories.
pub struct TgCoupling(CouplingResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgState {
    pub position: f64,
    /// `+1` or `-1`.
    pub velocity: i8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgEvent {
    pub time: f64,
    pub position: f64,
    pub velocity: i8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgBoundConstants {
    pub c: f64,
    pub r: f64,
    pub c_reflected: f64,
}

/// Random times of a coupling; `NAN` when the time lies beyond the horizon.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgCouplingTimes {
    pub crossing_time: f64,
    pub coalescence_time: f64,
    pub crossing_position: f64,
    pub horizon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TgEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TgStatus {
    match e {
        Error::InvalidRates { .. } => TgStatus::InvalidRates,
        Error::Degenerate(_) => TgStatus::Degenerate,
        Error::InvalidArgument(_) | Error::EmptySample | Error::InsufficientDecay { .. } => {
            TgStatus::InvalidArgument
        }
        Error::RecursionCap { .. } => TgStatus::RecursionCap,
        Error::OutOfDomain { .. } => TgStatus::OutOfDomain,
        Error::NonFinite => TgStatus::NonFinite,
        Error::Io(_) => TgStatus::Internal,
    }
}

fn fail(status: TgStatus, msg: impl Into<String>) -> TgStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), TgStatus>) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(TgStatus::Internal, "panic inside telegraph"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TgStatus>;
}

impl<T> OrStatus<T> for telegraph::Result<T> {
    fn or_status(self) -> Result<T, TgStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, TgStatus> {
    p.as_ref()
        .ok_or_else(|| fail(TgStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), TgStatus> {
    if out.is_null() {
        return Err(fail(TgStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

fn velocity(v: i8) -> Result<Velocity, TgStatus> {
    Velocity::from_i8(v).or_status()
}

fn process(p: TgProcess) -> Process {
    match p {
        TgProcess::Reflected => Process::Reflected,
        TgProcess::Unreflected => Process::Unreflected,
    }
}

fn laplace(v: LaplaceValue) -> f64 {
    v.to_f64()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn tg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tg_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version"),
        };
    VERSION.as_ptr()
}

/// Creates a model with rates `0 < a <= b`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_model_new(a: f64, b: f64, out: *mut *mut TgModel) -> TgStatus {
    guard(|| {
        let p = ModelParams::new(a, b).or_status()?;
        write(out, Box::into_raw(Box::new(TgModel(p))))
    })
}

/// # Safety
/// `model` must come from [`tg_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_model_free(model: *mut TgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `λ_c = (√b − √a)²/2`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_lambda_c(model: *const TgModel, out: *mut f64) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.lambda_c().or_status()?)
    })
}

/// Excursion-length transform `ψ(λ)`; `INFINITY` beyond `λ_c`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_psi(model: *const TgModel, lambda: f64, out: *mut f64) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, laplace(m.0.psi(lambda)))
    })
}

/// Hitting exponent `c(λ)`; `INFINITY` beyond `λ_c`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_c_lambda(
    model: *const TgModel,
    lambda: f64,
    out: *mut f64,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, laplace(m.0.c_lambda(lambda)))
    })
}

/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_bound_constants(
    model: *const TgModel,
    out: *mut TgBoundConstants,
) -> TgStatus {
    guard(|| {
        let k = deref(model, "model")?.0.bound_constants().or_status()?;
        write(
            out,
            TgBoundConstants {
                c: k.c,
                r: k.r,
                c_reflected: k.c_refl,
            },
        )
    })
}

/// Total-variation bound at time `t` between starts at `x` and `x_tilde`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_tv_bound(
    model: *const TgModel,
    t: f64,
    x: f64,
    x_tilde: f64,
    kind: TgProcess,
    out: *mut f64,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.tv_bound(t, x, x_tilde, process(kind)).or_status()?)
    })
}

/// `E[e^{λ T̄(x, x̃)}]` for `x >= x_tilde >= 0`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_tbar_laplace(
    model: *const TgModel,
    lambda: f64,
    x: f64,
    x_tilde: f64,
    out: *mut f64,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(
            out,
            laplace(m.0.tbar_laplace(lambda, x, x_tilde).or_status()?),
        )
    })
}

/// Simulates one path on `[0, horizon]` from `(x0, v0)` on stream
/// `(seed, stream)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_simulate(
    model: *const TgModel,
    kind: TgProcess,
    x0: f64,
    v0: i8,
    horizon: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut TgPath,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let v = velocity(v0)?;
        let mut rng = RngStream::new(seed, stream);
        let path = match kind {
            TgProcess::Reflected => simulate_reflected(x0, v, horizon, &m.0, &mut rng),
            TgProcess::Unreflected => simulate_unreflected(x0, v, horizon, &m.0, &mut rng),
        }
        .or_status()?;
        write(out, Box::into_raw(Box::new(TgPath(path))))
    })
}

/// # Safety
/// `path` must come from [`tg_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_path_free(path: *mut TgPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of events of the path, or 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tg_path_event_count(path: *const TgPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.events().len())
}

/// # Safety
/// `path` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_path_event(
    path: *const TgPath,
    index: usize,
    out: *mut TgEvent,
) -> TgStatus {
    guard(|| {
        let p = deref(path, "path")?;
        let e = p.0.events().get(index).ok_or_else(|| {
            fail(
                TgStatus::InvalidArgument,
                format!("event index {index} out of range"),
            )
        })?;
        write(
            out,
            TgEvent {
                time: e.time,
                position: e.position,
                velocity: e.velocity.as_i8(),
            },
        )
    })
}

/// # Safety
/// `path` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_path_horizon(path: *const TgPath, out: *mut f64) -> TgStatus {
    guard(|| write(out, deref(path, "path")?.0.horizon()))
}

/// State of the path at time `t`.
///
/// # Safety
/// `path` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_path_eval(path: *const TgPath, t: f64, out: *mut TgState) -> TgStatus {
    guard(|| {
        let s = deref(path, "path")?.0.eval(t).or_status()?;
        write(
            out,
            TgState {
                position: s.position,
                velocity: s.velocity.as_i8(),
            },
        )
    })
}

/// Fills `out[0..n]` with excursion lengths from the recursive sampler.
/// Results do not depend on the number of threads.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing `n` values.
#[no_mangle]
pub unsafe extern "C" fn tg_excursion_lengths(
    model: *const TgModel,
    seed: u64,
    n: usize,
    out: *mut f64,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if out.is_null() {
            return Err(fail(TgStatus::NullPointer, "output pointer is null"));
        }
        let sampler = ExcursionSampler::new(m.0);
        let lens = try_par_map(seed, domain::EXCURSION, n, |rng, _| {
            sampler.excursion_length(rng)
        })
        .or_status()?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&lens);
        Ok(())
    })
}

/// Regenerative estimate of the invariant mean of an integrand over `n`
/// excursions.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_invariant_estimate(
    model: *const TgModel,
    integrand: TgIntegrand,
    param: f64,
    n: usize,
    seed: u64,
    out: *mut TgEstimate,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let f = match integrand {
            TgIntegrand::VelocityUp => Integrand::VelocityIs(Velocity::Pos),
            TgIntegrand::ExpPosition => Integrand::ExpPosition(param),
            TgIntegrand::PositionAtMost => Integrand::PositionAtMost(param),
            TgIntegrand::Moment => {
                if !(param >= 0.0 && param.fract() == 0.0 && param <= u32::MAX as f64) {
                    return Err(fail(
                        TgStatus::InvalidArgument,
                        format!("moment order must be a nonnegative integer, got {param}"),
                    ));
                }
                Integrand::Moment(param as u32)
            }
        };
        let e = regenerative_estimate(&f, n, &m.0, seed).or_status()?;
        write(
            out,
            TgEstimate {
                mean: e.mean,
                std_error: e.std_error,
                n: e.n as u64,
            },
        )
    })
}

/// Coalescent coupling of two processes on `[0, horizon]`, on stream
/// `(seed, stream)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn tg_couple(
    model: *const TgModel,
    kind: TgProcess,
    x1: f64,
    v1: i8,
    x2: f64,
    v2: i8,
    horizon: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut TgCoupling,
) -> TgStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let (w1, w2) = (velocity(v1)?, velocity(v2)?);
        let mut rng = RngStream::new(seed, stream);
        let r = match kind {
            TgProcess::Reflected => {
                coalescent_couple_reflected(x1, w1, x2, w2, horizon, &m.0, &mut rng)
            }
            TgProcess::Unreflected => {
                coalescent_couple_unreflected(x1, w1, x2, w2, horizon, &m.0, &mut rng)
            }
        }
        .or_status()?;
        write(out, Box::into_raw(Box::new(TgCoupling(r))))
    })
}

/// # Safety
/// `coupling` must come from [`tg_couple`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tg_coupling_free(coupling: *mut TgCoupling) {
    if !coupling.is_null() {
        drop(Box::from_raw(coupling));
    }
}

/// # Safety
/// `coupling` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_coupling_times(
    coupling: *const TgCoupling,
    out: *mut TgCouplingTimes,
) -> TgStatus {
    guard(|| {
        let r = &deref(coupling, "coupling")?.0;
        write(
            out,
            TgCouplingTimes {
                crossing_time: r.crossing_time.unwrap_or(f64::NAN),
                coalescence_time: r.coalescence_time.unwrap_or(f64::NAN),
                crossing_position: r.crossing_position.unwrap_or(f64::NAN),
                horizon: r.horizon,
            },
        )
    })
}

/// State of leg 1 or 2 of the coupling at time `t`.
///
/// # Safety
/// `coupling` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn tg_coupling_eval(
    coupling: *const TgCoupling,
    leg: u32,
    t: f64,
    out: *mut TgState,
) -> TgStatus {
    guard(|| {
        let r = &deref(coupling, "coupling")?.0;
        let path = match leg {
            1 => &r.path_1,
            2 => &r.path_2,
            _ => {
                return Err(fail(
                    TgStatus::InvalidArgument,
                    format!("leg must be 1 or 2, got {leg}"),
                ))
            }
        };
        let s = path.eval(t).or_status()?;
        write(
            out,
            TgState {
                position: s.position,
                velocity: s.velocity.as_i8(),
            },
        )
    })
}
