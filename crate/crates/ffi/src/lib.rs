//! C ABI over `fockrbm`.
//!
//! Objects are opaque handles created by `*_new`/`*_solve`/`*_load` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`FockrbmStatus`]; on failure `fockrbm_last_error` yields a message for the
//! calling thread. Panics are caught at the boundary and reported as
//! `FOCKRBM_STATUS_INTERNAL`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fockrbm::bits::{Spin, SpinBosonConfig};
use fockrbm::checkpoint::Checkpoint;
use fockrbm::exact::{self, SteadyStateResult};
use fockrbm::model::{ConfigPair, ModelParams};
use fockrbm::rbm::{self, RbmParams, RbmShape};
use fockrbm::trainer::{EstimatorMode, TrainConfig, Trainer};
use fockrbm::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FockrbmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or configuration.
    InvalidArgument = 2,
    /// Convergence failure or non-finite numerics.
    Numerical = 3,
    /// File or checkpoint problem.
    Io = 4,
    /// Output buffer too small.
    BufferTooSmall = 5,
    /// Caught panic.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> FockrbmStatus {
    match e.exit_code() {
        2 => FockrbmStatus::InvalidArgument,
        3 => FockrbmStatus::Numerical,
        _ => FockrbmStatus::Io,
    }
}

fn fail(e: Error) -> FockrbmStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn guard(f: impl FnOnce() -> FockrbmStatus) -> FockrbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == FockrbmStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            FockrbmStatus::Internal
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!(stringify!($p), " is null"));
            return FockrbmStatus::NullPointer;
        })+
    };
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the length the full message needs, NUL included.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn fockrbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FockrbmModel {
    pub g0: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub detuning: f64,
}

impl FockrbmModel {
    fn to_rust(self) -> Result<ModelParams, Error> {
        ModelParams::new(self.g0, self.gamma, self.kappa, self.detuning)
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Error> {
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Error::InvalidParameter("path is not valid UTF-8".into()))
}

// ---------------------------------------------------------------- steady state

/// Exact steady state of the truncated model.
pub struct FockrbmSteadyState {
    inner: SteadyStateResult,
}

/// Direct sector solve with `n_fock` Fock levels.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_steady_state_solve(
    model: *const FockrbmModel,
    n_fock: usize,
    out: *mut *mut FockrbmSteadyState,
) -> FockrbmStatus {
    guard(|| {
        non_null!(model, out);
        let r = (*model)
            .to_rust()
            .and_then(|m| exact::projector_steady_state(&m, n_fock));
        match r {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FockrbmSteadyState { inner }));
                FockrbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// ⟨c†c⟩, spin-up and spin-down populations; any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_steady_state_observables(
    ss: *const FockrbmSteadyState,
    n_mean: *mut f64,
    spin_up: *mut f64,
    spin_down: *mut f64,
) -> FockrbmStatus {
    guard(|| {
        non_null!(ss);
        let rho = &(*ss).inner.rho;
        let (up, down) = exact::spin_populations(rho);
        for (p, v) in [
            (n_mean, exact::observable_n(rho)),
            (spin_up, up),
            (spin_down, down),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        FockrbmStatus::Ok
    })
}

/// Writes `P_0..P_{n_fock-1}` into `buf`; `*needed` receives `n_fock`.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_steady_state_populations(
    ss: *const FockrbmSteadyState,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> FockrbmStatus {
    guard(|| {
        non_null!(ss);
        let p = exact::diagonal_populations(&(*ss).inner.rho);
        if !needed.is_null() {
            *needed = p.len();
        }
        if len < p.len() || buf.is_null() {
            set_error(format!("buffer holds {len} values, {} needed", p.len()));
            return FockrbmStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(p.as_ptr(), buf, p.len());
        FockrbmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_steady_state_free(ss: *mut FockrbmSteadyState) {
    if !ss.is_null() {
        drop(Box::from_raw(ss));
    }
}

// ---------------------------------------------------------------- parameters

/// Network parameters.
pub struct FockrbmParams {
    inner: RbmParams,
}

fn boxed_params(inner: RbmParams, out: *mut *mut FockrbmParams) -> FockrbmStatus {
    unsafe { *out = Box::into_raw(Box::new(FockrbmParams { inner })) };
    FockrbmStatus::Ok
}

/// Small random parameters for the given layer sizes.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_new(
    n_spins: usize,
    n_bits: usize,
    n_hidden: usize,
    n_mixing: usize,
    seed: u64,
    out: *mut *mut FockrbmParams,
) -> FockrbmStatus {
    guard(|| {
        non_null!(out);
        match RbmShape::new(n_spins, n_bits, n_hidden, n_mixing) {
            Ok(shape) => boxed_params(rbm::init_params(shape, seed), out),
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_load(
    path: *const c_char,
    out: *mut *mut FockrbmParams,
) -> FockrbmStatus {
    guard(|| {
        non_null!(path, out);
        match path_arg(path).and_then(Checkpoint::load) {
            Ok(c) => boxed_params(c.params, out),
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_save(
    params: *const FockrbmParams,
    path: *const c_char,
    seed: u64,
    iteration: usize,
) -> FockrbmStatus {
    guard(|| {
        non_null!(params, path);
        let ck = Checkpoint {
            params: (*params).inner.clone(),
            seed,
            iteration,
        };
        match path_arg(path).and_then(|p| ck.save(p)) {
            Ok(()) => FockrbmStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of real parameters; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_count(params: *const FockrbmParams) -> usize {
    if params.is_null() {
        return 0;
    }
    (*params).inner.shape().param_count()
}

/// Copies the flat real parameter vector into `buf`.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_get(
    params: *const FockrbmParams,
    buf: *mut f64,
    len: usize,
) -> FockrbmStatus {
    guard(|| {
        non_null!(params, buf);
        let v = (*params).inner.to_real();
        if len < v.len() {
            set_error(format!("buffer holds {len} values, {} needed", v.len()));
            return FockrbmStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        FockrbmStatus::Ok
    })
}

/// Replaces all parameters from a flat vector of exactly `fockrbm_params_count` values.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_set(
    params: *mut FockrbmParams,
    values: *const f64,
    len: usize,
) -> FockrbmStatus {
    guard(|| {
        non_null!(params, values);
        let shape = *(*params).inner.shape();
        let v = std::slice::from_raw_parts(values, len);
        match RbmParams::from_real(shape, v) {
            Ok(p) => {
                (*params).inner = p;
                FockrbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn side(
    spins: *const i8,
    n: u64,
    n_spins: usize,
    n_bits: usize,
) -> Result<SpinBosonConfig, Error> {
    let s = std::slice::from_raw_parts(spins, n_spins)
        .iter()
        .map(|&v| Spin::from_value(v))
        .collect::<Result<Vec<_>, _>>()?;
    SpinBosonConfig::with_occupation(s, n, n_bits)
}

/// `ln ρ(σ, η)` for spins given as ±1 arrays of length `N` and occupations.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_log_rho(
    params: *const FockrbmParams,
    left_spins: *const i8,
    left_n: u64,
    right_spins: *const i8,
    right_n: u64,
    re: *mut f64,
    im: *mut f64,
) -> FockrbmStatus {
    guard(|| {
        non_null!(params, left_spins, right_spins, re, im);
        let p = &(*params).inner;
        let s = p.shape();
        let pair = side(left_spins, left_n, s.n_spins, s.n_bits).and_then(|l| {
            Ok(ConfigPair::new(
                l,
                side(right_spins, right_n, s.n_spins, s.n_bits)?,
            ))
        });
        match pair {
            Ok(cp) => {
                let v = rbm::log_rho(p, &cp);
                *re = v.re;
                *im = v.im;
                FockrbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_params_free(params: *mut FockrbmParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

// ---------------------------------------------------------------- training

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FockrbmTrainConfig {
    pub model: FockrbmModel,
    pub n_spins: usize,
    pub n_bits: usize,
    pub n_hidden: usize,
    pub n_mixing: usize,
    pub learning_rate: f64,
    pub n_samples: usize,
    pub max_iters: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Nonzero selects exhaustive enumeration (n_bits <= 3).
    pub enumerate: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FockrbmIterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub n_mean: f64,
    pub spin_up: f64,
    pub spin_down: f64,
    pub acc_unrestricted: f64,
    pub acc_diagonal: f64,
    pub seconds: f64,
}

/// Training state: parameters, chains and iteration count.
pub struct FockrbmTrainer {
    inner: Trainer,
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_trainer_new(
    cfg: *const FockrbmTrainConfig,
    out: *mut *mut FockrbmTrainer,
) -> FockrbmStatus {
    guard(|| {
        non_null!(cfg, out);
        let c = *cfg;
        let built = c.model.to_rust().and_then(|model| {
            let shape = RbmShape::new(c.n_spins, c.n_bits, c.n_hidden, c.n_mixing)?;
            let tc = TrainConfig {
                learning_rate: c.learning_rate,
                n_samples: c.n_samples,
                max_iters: c.max_iters,
                shape,
                model,
                seed: c.seed,
                checkpoint_every: 0,
                n_chains: c.n_chains,
                mode: if c.enumerate != 0 {
                    EstimatorMode::Enumeration
                } else {
                    EstimatorMode::Sampling
                },
            };
            Trainer::new(tc)
        });
        match built {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FockrbmTrainer { inner }));
                FockrbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// One training iteration; `record` may be null.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_trainer_step(
    trainer: *mut FockrbmTrainer,
    record: *mut FockrbmIterationRecord,
) -> FockrbmStatus {
    guard(|| {
        non_null!(trainer);
        match (*trainer).inner.step() {
            Ok(r) => {
                if !record.is_null() {
                    *record = FockrbmIterationRecord {
                        iteration: r.iteration,
                        cost: r.cost,
                        n_mean: r.n_mean,
                        spin_up: r.spin_up,
                        spin_down: r.spin_down,
                        acc_unrestricted: r.acc_unrestricted,
                        acc_diagonal: r.acc_diagonal,
                        seconds: r.seconds,
                    };
                }
                FockrbmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Completed iterations; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_trainer_iteration(trainer: *const FockrbmTrainer) -> usize {
    if trainer.is_null() {
        return 0;
    }
    (*trainer).inner.iteration()
}

/// Copy of the current parameters as a new handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn fockrbm_trainer_params(
    trainer: *const FockrbmTrainer,
    out: *mut *mut FockrbmParams,
) -> FockrbmStatus {
    guard(|| {
        non_null!(trainer, out);
        boxed_params((*trainer).inner.params().clone(), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn fockrbm_trainer_free(trainer: *mut FockrbmTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}
