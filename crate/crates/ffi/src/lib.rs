//! C ABI for `challenge-dp`.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns a [`CdpStatus`];
//! on failure a description is available from [`cdp_last_error_message`]
//! on the same thread. Outputs are written through pointer arguments only
//! on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use challenge_dp::counter::PrivateCounter;
use challenge_dp::learners::{FiniteHypothesisClass, Soa};
use challenge_dp::noise::RandomSource;
use challenge_dp::params::{Constants, PrivacyBudget};
use challenge_dp::pop::{Pop, PopConfig, RoundOutcome};
use challenge_dp::sparse::{ChallengeAt, SparseParams};
use challenge_dp::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidState = 3,
    ProtocolViolation = 4,
    ContractViolation = 5,
    ParseError = 6,
    IoError = 7,
    Panic = 8,
}

impl From<&Error> for CdpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parameter(_) => CdpStatus::InvalidParameter,
            Error::State(_) => CdpStatus::InvalidState,
            Error::Protocol(_) => CdpStatus::ProtocolViolation,
            Error::Contract { .. } => CdpStatus::ContractViolation,
            Error::Parse(_) => CdpStatus::ParseError,
            Error::Io(_) => CdpStatus::IoError,
        }
    }
}

/// Binary-tree private counter.
pub struct CdpCounter(PrivateCounter);

/// ChallengeAT sparse-vector mechanism.
pub struct CdpChallengeAt(ChallengeAt);

/// Finite hypothesis class.
pub struct CdpClass(Arc<FiniteHypothesisClass>);

/// Private online predictor with SOA experts.
pub struct CdpPop(Pop<Soa>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|e| {
        let end = e.nul_position();
        CString::new(&e.into_vec()[..end]).unwrap_or_default()
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(CdpStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Failure(CdpStatus::from(&e))
    }
}

fn null(what: &str) -> Failure {
    set_error(format!("{what} is null"));
    Failure(CdpStatus::NullPointer)
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdpStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(_) => {
            set_error("panic inside challenge-dp".into());
            CdpStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn cdp_counter_new(
    horizon: usize,
    epsilon: f64,
    seed: u64,
    noiseless: bool,
    out: *mut *mut CdpCounter,
) -> CdpStatus {
    guard(|| {
        let c = PrivateCounter::new(horizon, epsilon, RandomSource::with_noise(seed, !noiseless))?;
        put(out, boxed(CdpCounter(c)), "out")
    })
}

/// Feeds one bit and writes the released count to `estimate`.
#[no_mangle]
pub unsafe extern "C" fn cdp_counter_feed(
    counter: *mut CdpCounter,
    bit: bool,
    estimate: *mut u64,
) -> CdpStatus {
    guard(|| {
        let c = handle(counter, "counter")?;
        if estimate.is_null() {
            return Err(null("estimate"));
        }
        let v = c.0.feed(bit)?;
        put(estimate, v, "estimate")
    })
}

/// Exact number of ones fed so far; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdp_counter_true_count(counter: *const CdpCounter) -> u64 {
    counter.as_ref().map_or(0, |c| c.0.true_count())
}

#[no_mangle]
pub unsafe extern "C" fn cdp_counter_free(counter: *mut CdpCounter) {
    free(counter)
}

#[no_mangle]
pub unsafe extern "C" fn cdp_challenge_at_new(
    threshold: f64,
    epsilon: f64,
    delta: f64,
    reports: u64,
    horizon: usize,
    seed: u64,
    noiseless: bool,
    out: *mut *mut CdpChallengeAt,
) -> CdpStatus {
    guard(|| {
        let params = SparseParams::new(threshold, epsilon, delta, reports, horizon);
        let cat = ChallengeAt::new(params, RandomSource::with_noise(seed, !noiseless))?;
        put(out, boxed(CdpChallengeAt(cat)), "out")
    })
}

/// Answers one sensitivity-1 query value.
#[no_mangle]
pub unsafe extern "C" fn cdp_challenge_at_step(
    cat: *mut CdpChallengeAt,
    value: f64,
    sigma: *mut bool,
    halted: *mut bool,
) -> CdpStatus {
    guard(|| {
        let c = handle(cat, "cat")?;
        if sigma.is_null() || halted.is_null() {
            return Err(null("output"));
        }
        let a = c.0.step(value)?;
        put(sigma, a.sigma, "sigma")?;
        put(halted, a.halted, "halted")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdp_challenge_at_free(cat: *mut CdpChallengeAt) {
    free(cat)
}

/// Parses a class from the `n=<int> h=<int>` text format.
#[no_mangle]
pub unsafe extern "C" fn cdp_class_parse(
    text: *const c_char,
    out: *mut *mut CdpClass,
) -> CdpStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Error::Parse(format!("class text is not UTF-8: {e}")))?;
        let class = FiniteHypothesisClass::parse(text)?;
        put(out, boxed(CdpClass(Arc::new(class))), "out")
    })
}

/// Threshold functions `x >= c` over `domain` points.
#[no_mangle]
pub unsafe extern "C" fn cdp_class_thresholds(domain: usize, out: *mut *mut CdpClass) -> CdpStatus {
    guard(|| {
        let class = FiniteHypothesisClass::thresholds(domain)?;
        put(out, boxed(CdpClass(Arc::new(class))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cdp_class_ldim(class: *const CdpClass, ldim: *mut u32) -> CdpStatus {
    guard(|| {
        let c = class.as_ref().ok_or_else(|| null("class"))?;
        put(ldim, c.0.ldim(), "ldim")
    })
}

/// Domain size; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdp_class_domain_size(class: *const CdpClass) -> usize {
    class.as_ref().map_or(0, |c| c.0.domain_size())
}

/// Number of hypotheses; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdp_class_len(class: *const CdpClass) -> usize {
    class.as_ref().map_or(0, |c| c.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn cdp_class_free(class: *mut CdpClass) {
    free(class)
}

/// POP over SOA experts of `class`. With `k == 0` the number of experts and
/// positive reports are derived from the class's Littlestone dimension;
/// otherwise `k` (odd) and `reports` are used as given. The class handle may
/// be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn cdp_pop_new(
    class: *const CdpClass,
    k: usize,
    reports: u64,
    epsilon: f64,
    delta: f64,
    beta: f64,
    horizon: usize,
    seed: u64,
    noiseless: bool,
    out: *mut *mut CdpPop,
) -> CdpStatus {
    guard(|| {
        let class = class.as_ref().ok_or_else(|| null("class"))?.0.clone();
        let budget = PrivacyBudget::new(epsilon, delta, beta, horizon);
        let constants = Constants::default();
        let config = if k == 0 {
            PopConfig::for_mistake_bound(class.ldim().max(1), budget, constants)?
        } else {
            PopConfig::new(k, reports, budget, constants)
        };
        let pop = Pop::new(
            config,
            Soa::new(class),
            RandomSource::with_noise(seed, !noiseless),
        )?;
        put(out, boxed(CdpPop(pop)), "out")
    })
}

/// Predicts a label for `x`. When POP halts in this round `halted` is set
/// and no label must be fed.
#[no_mangle]
pub unsafe extern "C" fn cdp_pop_predict(
    pop: *mut CdpPop,
    x: usize,
    label: *mut bool,
    halted: *mut bool,
) -> CdpStatus {
    guard(|| {
        let p = handle(pop, "pop")?;
        if label.is_null() || halted.is_null() {
            return Err(null("output"));
        }
        match p.0.round(x)? {
            RoundOutcome::Predict(y) => {
                put(label, y, "label")?;
                put(halted, false, "halted")
            }
            RoundOutcome::Halted => put(halted, true, "halted"),
        }
    })
}

/// Delivers the true label of the pending round. `mistake` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cdp_pop_feed_label(
    pop: *mut CdpPop,
    y: bool,
    mistake: *mut bool,
) -> CdpStatus {
    guard(|| {
        let p = handle(pop, "pop")?;
        let rec = p.0.feed_label(y)?;
        if !mistake.is_null() {
            mistake.write(rec.mistake);
        }
        Ok(())
    })
}

/// Mistakes so far; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdp_pop_mistakes(pop: *const CdpPop) -> u64 {
    pop.as_ref().map_or(0, |p| p.0.mistakes())
}

/// Number of expert copies; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cdp_pop_k(pop: *const CdpPop) -> usize {
    pop.as_ref().map_or(0, |p| p.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn cdp_pop_free(pop: *mut CdpPop) {
    free(pop)
}
