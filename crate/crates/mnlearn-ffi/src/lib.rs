//! C ABI for `mnlearn`.
//!
//! Models and oracles are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`MnlStatus`]; on failure the
//! message is available from [`mnl_last_error_message`] on the same thread.
//! Query counts are 128-bit and cross the boundary as [`MnlCount`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mnlearn::{
    distance_exact, generate_instance, learn_adaptive, learn_balanced, learn_nonadaptive, Error, InstanceKind,
    InstanceSpec, LiveOracle, LogWeightMnl, Model, Oracle, StreamKey,
};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BudgetExhausted = 3,
    BalancedFailure = 4,
    GeometricCap = 5,
    TooLarge = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

/// Learner selection for [`mnl_learn`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnlAlgo {
    Adaptive = 0,
    Balanced = 1,
    Nonadaptive = 2,
}

/// An unsigned 128-bit count split into two 64-bit halves.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MnlCount {
    pub lo: u64,
    pub hi: u64,
}

impl From<u128> for MnlCount {
    fn from(x: u128) -> Self {
        MnlCount { lo: x as u64, hi: (x >> 64) as u64 }
    }
}

impl From<MnlCount> for u128 {
    fn from(c: MnlCount) -> Self {
        (c.hi as u128) << 64 | c.lo as u128
    }
}

/// Opaque choice model.
pub struct MnlModel(Model);

/// Opaque simulated oracle with its query ledger.
pub struct MnlOracle(LiveOracle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MnlStatus {
    match e {
        Error::BudgetExhausted { .. } => MnlStatus::BudgetExhausted,
        Error::BalancedFailure { .. } => MnlStatus::BalancedFailure,
        Error::GeometricCap { .. } => MnlStatus::GeometricCap,
        Error::TooLargeForExact { .. } => MnlStatus::TooLarge,
        Error::Invariant(_) | Error::Io(_) | Error::Csv(_) => MnlStatus::Internal,
        _ => MnlStatus::InvalidArgument,
    }
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (MnlStatus, String)>) -> MnlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MnlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside mnlearn".into());
            MnlStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MnlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (MnlStatus, String) {
    (MnlStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (MnlStatus, String)> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn cstr<'a>(p: *const c_char, name: &str) -> Result<&'a str, (MnlStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (MnlStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (MnlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mnl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an MNL from `n` natural-log weights.
///
/// # Safety
/// `log_weights` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_from_log_weights(
    log_weights: *const f64,
    n: usize,
    out: *mut *mut MnlModel,
) -> MnlStatus {
    guard(|| {
        let w = slice(log_weights, n, "log_weights")?.to_vec();
        let m = LogWeightMnl::new(w).map_err(lib)?;
        emit(out, MnlModel(m.into()))
    })
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_from_json(json: *const c_char, out: *mut *mut MnlModel) -> MnlStatus {
    guard(|| {
        let m = Model::from_json(cstr(json, "json")?).map_err(lib)?;
        emit(out, MnlModel(m))
    })
}

/// Generates an instance from a spec string such as `"power-law:1"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_generate(
    spec: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut MnlModel,
) -> MnlStatus {
    guard(|| {
        let kind: InstanceKind = cstr(spec, "spec")?.parse().map_err(lib)?;
        let m = generate_instance(&InstanceSpec::new(n, kind, seed)).map_err(lib)?;
        emit(out, MnlModel(m))
    })
}

/// Serialises a model to JSON. Release the string with [`mnl_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_to_json(model: *const MnlModel, out: *mut *mut c_char) -> MnlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(m.0.to_json()).map_err(|e| (MnlStatus::Internal, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mnl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a model.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_free(model: *mut MnlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_len(model: *const MnlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n())
}

/// Copies the log weights into `out` (capacity `cap`). Fails for
/// pseudo-MNL models.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_log_weights(model: *const MnlModel, out: *mut f64, cap: usize) -> MnlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let mnl = m.0.as_mnl().ok_or((MnlStatus::InvalidArgument, "model has no weights".to_string()))?;
        let w = mnl.log_weights();
        if cap < w.len() {
            return Err((MnlStatus::BufferTooSmall, format!("need {} doubles", w.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), out, w.len());
        Ok(())
    })
}

/// Writes the choice probabilities on `slate` (length `k`) into `out`.
///
/// # Safety
/// `slate` must hold `k` indices and `out` room for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn mnl_model_slate_distribution(
    model: *const MnlModel,
    slate: *const usize,
    k: usize,
    out: *mut f64,
) -> MnlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let p = m.0.slate_distribution(slice(slate, k, "slate")?).map_err(lib)?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), out, p.len());
        Ok(())
    })
}

/// Creates a simulated oracle for a copy of `model`; `(seed, trial)` fixes
/// every random stream.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_oracle_new(
    model: *const MnlModel,
    seed: u64,
    trial: u64,
    out: *mut *mut MnlOracle,
) -> MnlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        emit(out, MnlOracle(LiveOracle::new(m.0.clone(), StreamKey::new(seed, trial))))
    })
}

/// Releases an oracle.
///
/// # Safety
/// `oracle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mnl_oracle_free(oracle: *mut MnlOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Draws one winner from `slate` (length `k`).
///
/// # Safety
/// `oracle` must be a live handle, `slate` hold `k` indices, `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_oracle_sample(
    oracle: *mut MnlOracle,
    slate: *const usize,
    k: usize,
    out: *mut usize,
) -> MnlStatus {
    guard(|| {
        let o = oracle.as_mut().ok_or_else(|| null("oracle"))?;
        let w = o.0.max_sample(slice(slate, k, "slate")?).map_err(lib)?;
        *out.as_mut().ok_or_else(|| null("out"))? = w;
        Ok(())
    })
}

/// Total queries answered so far; zero for a null handle.
///
/// # Safety
/// `oracle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mnl_oracle_total_queries(oracle: *const MnlOracle) -> MnlCount {
    oracle.as_ref().map_or(MnlCount::default(), |o| o.0.ledger().total().into())
}

/// Largest number of queries made to one pair.
///
/// # Safety
/// `oracle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mnl_oracle_max_pair_queries(oracle: *const MnlOracle) -> MnlCount {
    oracle.as_ref().map_or(MnlCount::default(), |o| o.0.ledger().max_pair_count().into())
}

/// Learns a model from `oracle`. `m` is the per-pair batch size and is only
/// read by the non-adaptive learner.
///
/// # Safety
/// `oracle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_learn(
    oracle: *mut MnlOracle,
    algo: MnlAlgo,
    eps: f64,
    delta: f64,
    m: MnlCount,
    out: *mut *mut MnlModel,
) -> MnlStatus {
    guard(|| {
        let o = oracle.as_mut().ok_or_else(|| null("oracle"))?;
        let mut rng = o.0.key().algo_rng();
        let learned = match algo {
            MnlAlgo::Adaptive => learn_adaptive(&mut o.0, eps, delta, &mut rng),
            MnlAlgo::Balanced => learn_balanced(&mut o.0, eps, delta, &mut rng),
            MnlAlgo::Nonadaptive => learn_nonadaptive(&mut o.0, eps, delta, m.into(), &mut rng),
        }
        .map_err(lib)?;
        emit(out, MnlModel(learned.model.into()))
    })
}

/// Exact total-variation distances between two models over all slates.
///
/// # Safety
/// Both handles must be live; `d1` and `dinf` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mnl_distance_exact(
    a: *const MnlModel,
    b: *const MnlModel,
    d1: *mut f64,
    dinf: *mut f64,
) -> MnlStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        let r = distance_exact(&a.0, &b.0).map_err(lib)?;
        *d1.as_mut().ok_or_else(|| null("d1"))? = r.d1;
        *dinf.as_mut().ok_or_else(|| null("dinf"))? = r.dinf;
        Ok(())
    })
}
