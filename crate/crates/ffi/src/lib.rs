//! C ABI for embedding the lock environments and experiment harness in
//! other languages. Handles are opaque pointers owned by this library;
//! every fallible call returns a [`DrlStatus`] code and leaves a
//! thread-local message readable via [`drl_last_error_message`].

use decode_rl::env::BlockEnv;
use decode_rl::harness::{emit_csv, run_experiment, ExperimentConfig};
use decode_rl::latent::value_iteration;
use decode_rl::lock::{LockEnv, LockSpec};
use decode_rl::policy::TabularPolicy;
use decode_rl::rng::derive_rng;
use decode_rl::trajectory::sample_latent_trajectory;
use decode_rl::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible entry point.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    BadConfig = 3,
    ContractViolation = 4,
    IoFailure = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> DrlStatus {
    match err {
        Error::Config(_) | Error::Format { .. } => DrlStatus::BadConfig,
        Error::Io { .. } => DrlStatus::IoFailure,
        Error::Contract(_)
        | Error::InsufficientData { .. }
        | Error::Sequencing(_)
        | Error::DecodingRange { .. } => DrlStatus::ContractViolation,
    }
}

fn guard<F: FnOnce() -> Result<(), (DrlStatus, String)>>(f: F) -> DrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic across FFI boundary".into());
            set_error(&msg);
            DrlStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (DrlStatus, String) {
    (status_of(&e), e.to_string())
}

/// Opaque environment handle.
pub struct DrlEnv {
    env: LockEnv,
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn drl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn env_new(spec: LockSpec, out: *mut *mut DrlEnv) -> DrlStatus {
    guard(|| {
        if out.is_null() {
            return Err((DrlStatus::NullArgument, "out pointer is null".into()));
        }
        let env = LockEnv::new(spec).map_err(lib_err)?;
        let handle = Box::into_raw(Box::new(DrlEnv { env }));
        unsafe { *out = handle };
        Ok(())
    })
}

/// Creates a lock environment with binary observations.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn drl_env_new_bernoulli(
    horizon: u32,
    alpha: f64,
    seed: u64,
    out: *mut *mut DrlEnv,
) -> DrlStatus {
    env_new(LockSpec::bernoulli(horizon as usize, alpha, seed), out)
}

/// Creates a lock environment with Gaussian-noised observations.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn drl_env_new_gaussian(
    horizon: u32,
    alpha: f64,
    sigma: f64,
    seed: u64,
    out: *mut *mut DrlEnv,
) -> DrlStatus {
    env_new(LockSpec::gaussian(horizon as usize, alpha, sigma, seed), out)
}

/// Releases an environment handle. Null is ignored.
///
/// # Safety
/// `env` must be a pointer returned by a `drl_env_new_*` call, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn drl_env_free(env: *mut DrlEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// # Safety
/// `env` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn drl_env_horizon(env: *const DrlEnv) -> u32 {
    unsafe { env.as_ref() }.map_or(0, |e| e.env.horizon() as u32)
}

/// # Safety
/// `env` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn drl_env_obs_dim(env: *const DrlEnv) -> u32 {
    unsafe { env.as_ref() }.map_or(0, |e| e.env.obs_dim() as u32)
}

/// Exact optimal value of the environment's latent dynamics; NaN on a
/// null handle.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn drl_env_optimal_value(env: *const DrlEnv) -> f64 {
    unsafe { env.as_ref() }.map_or(f64::NAN, |e| value_iteration(e.env.mdp()).value)
}

/// Plays `episodes` episodes, each under a fresh uniformly random
/// policy seeded from `seed`, and writes the mean episodic reward to
/// `out_mean`.
///
/// # Safety
/// `env` must be a live handle and `out_mean` writable.
#[no_mangle]
pub unsafe extern "C" fn drl_env_random_policy_mean(
    env: *const DrlEnv,
    episodes: u64,
    seed: u64,
    out_mean: *mut f64,
) -> DrlStatus {
    guard(|| {
        if env.is_null() || out_mean.is_null() {
            return Err((DrlStatus::NullArgument, "null argument".into()));
        }
        if episodes == 0 {
            return Err((
                DrlStatus::ContractViolation,
                "need at least one episode".into(),
            ));
        }
        let env = unsafe { &(*env).env };
        let mut rng = derive_rng(seed, &[0x6666_6969]);
        let mut total = 0.0;
        for i in 0..episodes {
            let pi = TabularPolicy::random(
                &env.states_per_level()[..env.horizon()],
                env.num_actions(),
                &mut derive_rng(seed, &[i, 1]),
            );
            total += sample_latent_trajectory(env, &pi, &mut rng).reward_sum();
        }
        unsafe { *out_mean = total / episodes as f64 };
        Ok(())
    })
}

fn parse_config(config_text: *const c_char) -> Result<ExperimentConfig, (DrlStatus, String)> {
    if config_text.is_null() {
        return Err((DrlStatus::NullArgument, "config text is null".into()));
    }
    let text = unsafe { CStr::from_ptr(config_text) }
        .to_str()
        .map_err(|_| (DrlStatus::InvalidUtf8, "config text is not UTF-8".into()))?;
    ExperimentConfig::parse(text, &[]).map_err(lib_err)
}

/// Runs a full experiment described by a key=value config string and
/// writes the learning-curve CSV to `csv_path`.
///
/// # Safety
/// Both pointers must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn drl_run_experiment_to_file(
    config_text: *const c_char,
    csv_path: *const c_char,
) -> DrlStatus {
    guard(|| {
        let cfg = parse_config(config_text)?;
        if csv_path.is_null() {
            return Err((DrlStatus::NullArgument, "csv path is null".into()));
        }
        let path = unsafe { CStr::from_ptr(csv_path) }
            .to_str()
            .map_err(|_| (DrlStatus::InvalidUtf8, "csv path is not UTF-8".into()))?;
        let records = run_experiment(&cfg).map_err(lib_err)?;
        std::fs::write(path, emit_csv(&records))
            .map_err(|e| (DrlStatus::IoFailure, format!("{path}: {e}")))?;
        Ok(())
    })
}

/// Runs a full experiment and returns the CSV as a newly allocated
/// string in `out_csv`; free it with [`drl_string_free`].
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string and `out_csv`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn drl_run_experiment(
    config_text: *const c_char,
    out_csv: *mut *mut c_char,
) -> DrlStatus {
    guard(|| {
        if out_csv.is_null() {
            return Err((DrlStatus::NullArgument, "out pointer is null".into()));
        }
        let cfg = parse_config(config_text)?;
        let records = run_experiment(&cfg).map_err(lib_err)?;
        let csv = CString::new(emit_csv(&records))
            .map_err(|_| (DrlStatus::Internal, "CSV contained NUL".into()))?;
        unsafe { *out_csv = csv.into_raw() };
        Ok(())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn drl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Runs the built-in invariant suites. Returns the number of failed
/// suites (0 means everything passed), or `u32::MAX` on panic.
#[no_mangle]
pub extern "C" fn drl_selfcheck() -> u32 {
    match catch_unwind(|| {
        decode_rl::harness::selfcheck::run_selfcheck()
            .iter()
            .filter(|r| !r.passed)
            .count() as u32
    }) {
        Ok(failures) => failures,
        Err(_) => {
            set_error("selfcheck panicked");
            u32::MAX
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn env_lifecycle_and_values() {
        let mut handle: *mut DrlEnv = ptr::null_mut();
        let status = unsafe { drl_env_new_bernoulli(5, 0.2, 7, &mut handle) };
        assert_eq!(status, DrlStatus::Ok);
        assert!(!handle.is_null());
        unsafe {
            assert_eq!(drl_env_horizon(handle), 5);
            assert_eq!(drl_env_obs_dim(handle), 8);
            assert!((drl_env_optimal_value(handle) - 0.5).abs() < 1e-10);
            let mut mean = f64::NAN;
            let status = drl_env_random_policy_mean(handle, 200, 3, &mut mean);
            assert_eq!(status, DrlStatus::Ok);
            assert!((0.0..=1.0).contains(&mean));
            drl_env_free(handle);
        }
    }

    #[test]
    fn bad_spec_reports_config_error() {
        let mut handle: *mut DrlEnv = ptr::null_mut();
        let status = unsafe { drl_env_new_bernoulli(5, 1.5, 7, &mut handle) };
        assert_eq!(status, DrlStatus::BadConfig);
        assert!(handle.is_null());
        let msg = unsafe { CStr::from_ptr(drl_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("alpha"));
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status = unsafe { drl_env_new_bernoulli(5, 0.0, 7, ptr::null_mut()) };
        assert_eq!(status, DrlStatus::NullArgument);
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { drl_run_experiment(ptr::null(), &mut out) };
        assert_eq!(status, DrlStatus::NullArgument);
    }

    #[test]
    fn experiment_round_trip_through_c_string() {
        let config = CString::new(
            "algorithm = oracleq-lat\nH = 3\nbudget = 200\nreplicates = 1\n\
             eval_every = 100\neval_episodes = 20\ntiming = off\n",
        )
        .unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { drl_run_experiment(config.as_ptr(), &mut out) };
        assert_eq!(status, DrlStatus::Ok);
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
        assert!(text.starts_with("replicate,trajectories,mean_reward,seconds"));
        assert_eq!(text.lines().count(), 3);
        unsafe { drl_string_free(out) };
    }

    #[test]
    fn invalid_config_reports_error() {
        let config = CString::new("algorithm = nonsense\n").unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { drl_run_experiment(config.as_ptr(), &mut out) };
        assert_eq!(status, DrlStatus::BadConfig);
        let msg = unsafe { CStr::from_ptr(drl_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("nonsense"));
    }
}
