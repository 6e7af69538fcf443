//! C ABI for `rbvar`.
//!
//! Conventions:
//! * every fallible function returns an [`RbvarStatus`]; results come back
//!   through out-pointers, which are left untouched on failure;
//! * the message of the most recent failure on the calling thread is
//!   available from [`rbvar_last_error_message`];
//! * objects are opaque handles created by `rbvar_*_new`/`rbvar_*_from_*`
//!   and released with the matching `rbvar_*_free` (which accepts NULL);
//! * no Rust panic crosses the boundary — panics map to
//!   [`RbvarStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use rbvar::bounds::{
    variance_bound_small_m_with, variance_bound_spam_derived_with, variance_bound_spam_with,
    variance_bound_spamfree_with, BoundForm, BoundInputs,
};
use rbvar::liouville::{ChannelSpec, OperatorVec, SpamSetting, Superoperator};
use rbvar::pauli::NormalizedPauli;
use rbvar::planner::{self, BoundChoice, PlanRequest, UnitaritySpec};
use rbvar::simulate::{self, DecayDataset, FitMethod, RBConfig};
use rbvar::twirl::{extract_irreps, IrrepDecomposition};
use rbvar::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbvarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The request cannot be met (e.g. no finite sequence count).
    Infeasible = 3,
    /// Outside the supported size or model range.
    Unsupported = 4,
    /// Malformed JSON or UTF-8.
    Parse = 5,
    Internal = 6,
    Panic = 7,
}

/// Which variance bound to evaluate or plan with.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbvarBound {
    Spamfree = 0,
    SmallM = 1,
    /// Small-m bound with `u = 1`.
    SmallMUOne = 2,
    Spam = 3,
    SpamDerived = 4,
    Trivial = 5,
    /// Use `RbvarPlanRequest::variance`.
    Explicit = 6,
}

/// Unitary part of channel metrics.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbvarChannelMetrics {
    pub f: f64,
    pub r: f64,
    pub u: f64,
    pub nonunitality: f64,
}

/// Input of [`rbvar_plan`].  A negative `u` means "use `u_mix`"; a negative
/// `eta` means "not given".
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbvarPlanRequest {
    pub delta: f64,
    pub epsilon: f64,
    pub m: u64,
    pub r: f64,
    pub u: f64,
    pub u_mix: f64,
    pub qubits: u32,
    pub eta: f64,
    pub bound: RbvarBound,
    pub variance: f64,
    /// Non-zero selects the `f^{m−1}` form of the bounds.
    pub printed_form: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbvarPlanResult {
    pub n: u64,
    pub n_raw: f64,
    pub n_trivial: u64,
    pub variance_used: f64,
    pub h: f64,
    pub achieved_delta: f64,
    pub f: f64,
    pub u: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbvarDecayPoint {
    pub m: u64,
    pub mean: f64,
    pub sample_variance: f64,
    pub n: u64,
    /// NaN when not computed.
    pub exact_variance: f64,
    /// NaN when not computed.
    pub exact_mean: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RbvarFit {
    pub a: f64,
    pub f_hat: f64,
    pub r_hat: f64,
    pub residual_rms: f64,
    /// 0 log-linear, 1 Gauss–Newton.
    pub method: u32,
}

/// Opaque channel handle.
pub struct RbvarChannel(Superoperator);

/// Opaque irreducible decomposition handle.
pub struct RbvarIrreps(IrrepDecomposition);

/// Opaque dataset handle.
pub struct RbvarDataset(DecayDataset);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RbvarStatus {
    match e {
        Error::Infeasible { .. } | Error::UnboundedSequences(_) => RbvarStatus::Infeasible,
        Error::TooManyQubits { .. } | Error::Precondition(_) => RbvarStatus::Unsupported,
        Error::Config(_) => RbvarStatus::Parse,
        Error::Io(_) | Error::IrrepExtraction { .. } | Error::Fit(_) => RbvarStatus::Internal,
        _ => RbvarStatus::InvalidArgument,
    }
}

struct Fail(RbvarStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RbvarStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, records failures and converts panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RbvarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RbvarStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            RbvarStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(RbvarStatus::Parse, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rbvar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread (empty if none).  The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbvar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library.
#[no_mangle]
pub unsafe extern "C" fn rbvar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `N = ⌈log(2/δ)/(−log H(V², ε))⌉`.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_sequences_needed(delta: f64, epsilon: f64, variance: f64, out: *mut u64) -> RbvarStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = planner::sequences_needed(delta, epsilon, variance)?;
        Ok(())
    })
}

/// Evaluates one variance bound at `(r, u, d, m, η)`.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_variance_bound(
    bound: RbvarBound,
    r: f64,
    u: f64,
    d: u64,
    m: u64,
    eta: f64,
    printed_form: u8,
    out: *mut f64,
) -> RbvarStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let inp = BoundInputs::new(r, u, d, m, eta)?;
        let form = if printed_form != 0 {
            BoundForm::Printed
        } else {
            BoundForm::Derived
        };
        *out = match bound {
            RbvarBound::Spamfree => variance_bound_spamfree_with(&inp, form),
            RbvarBound::SmallM => variance_bound_small_m_with(&inp, false, form),
            RbvarBound::SmallMUOne => variance_bound_small_m_with(&inp, true, form),
            RbvarBound::Spam => variance_bound_spam_with(&inp, form),
            RbvarBound::SpamDerived => variance_bound_spam_derived_with(&inp, form),
            RbvarBound::Trivial => planner::TRIVIAL_VARIANCE,
            RbvarBound::Explicit => {
                return Err(Fail(
                    RbvarStatus::InvalidArgument,
                    "an explicit variance is not a bound".into(),
                ))
            }
        };
        Ok(())
    })
}

/// Plans the number of sequences.
///
/// # Safety
/// `req` must be NULL or valid for reads, `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_plan(req: *const RbvarPlanRequest, out: *mut RbvarPlanResult) -> RbvarStatus {
    guard(|| {
        let req = *req.as_ref().ok_or_else(|| null("req"))?;
        let out = out_ref(out, "out")?;
        let bound = match req.bound {
            RbvarBound::Spamfree => BoundChoice::Spamfree,
            RbvarBound::SmallM => BoundChoice::SmallM { assume_u_one: false },
            RbvarBound::SmallMUOne => BoundChoice::SmallM { assume_u_one: true },
            RbvarBound::Spam => BoundChoice::Spam,
            RbvarBound::SpamDerived => BoundChoice::SpamDerived,
            RbvarBound::Trivial => BoundChoice::Trivial,
            RbvarBound::Explicit => BoundChoice::Explicit(req.variance),
        };
        let report = planner::plan(&PlanRequest {
            delta: req.delta,
            epsilon: req.epsilon,
            m: req.m,
            r: req.r,
            unitarity: if req.u >= 0.0 {
                UnitaritySpec::Value(req.u)
            } else {
                UnitaritySpec::Mix(req.u_mix)
            },
            qubits: req.qubits,
            eta: (req.eta >= 0.0).then_some(req.eta),
            bound,
            form: if req.printed_form != 0 {
                BoundForm::Printed
            } else {
                BoundForm::Derived
            },
        })?;
        *out = RbvarPlanResult {
            n: report.n,
            n_raw: report.n_raw,
            n_trivial: report.n_trivial,
            variance_used: report.variance_used,
            h: report.h_value,
            achieved_delta: report.achieved_delta,
            f: report.inputs.f,
            u: report.inputs.u,
        };
        Ok(())
    })
}

/// Depolarizing channel with parameter `f` on `qubits` qubits.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_depolarizing(qubits: u32, f: f64, out: *mut *mut RbvarChannel) -> RbvarStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = ChannelSpec::Depolarizing { f: Some(f), r: None };
        *out = boxed(RbvarChannel(spec.build(qubits as usize)?));
        Ok(())
    })
}

/// Channel from its JSON description (the same format the CLI accepts).
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_from_json(
    qubits: u32,
    json: *const c_char,
    out: *mut *mut RbvarChannel,
) -> RbvarStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_ref(out, "out")?;
        let spec: ChannelSpec =
            serde_json::from_str(text).map_err(|e| Fail(RbvarStatus::Parse, format!("channel JSON: {e}")))?;
        *out = boxed(RbvarChannel(spec.build(qubits as usize)?));
        Ok(())
    })
}

/// Channel from a row-major `4^q × 4^q` Pauli transfer matrix in the
/// normalized Pauli basis.
///
/// # Safety
/// `data` must be NULL or point to `len` doubles; `out` NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_from_ptm(
    qubits: u32,
    data: *const f64,
    len: usize,
    out: *mut *mut RbvarChannel,
) -> RbvarStatus {
    guard(|| {
        let data = slice_arg(data, len, "data")?;
        let out = out_ref(out, "out")?;
        let q = qubits as usize;
        if q == 0 || q > rbvar::pauli::MAX_QUBITS / 2 {
            return Err(Fail(RbvarStatus::Unsupported, format!("unsupported qubit count {q}")));
        }
        let n = 1usize << (2 * q);
        if len != n * n {
            return Err(Fail(
                RbvarStatus::InvalidArgument,
                format!("expected {} entries, got {len}", n * n),
            ));
        }
        let m = DMatrix::from_row_slice(n, n, data);
        *out = boxed(RbvarChannel(Superoperator::from_matrix(q, m)?));
        Ok(())
    })
}

/// Releases a channel.
///
/// # Safety
/// `ch` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_free(ch: *mut RbvarChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Fidelity parameter, infidelity, unitarity and non-unitality.
///
/// # Safety
/// `ch` must be NULL or a live handle; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_metrics(ch: *const RbvarChannel, out: *mut RbvarChannelMetrics) -> RbvarStatus {
    guard(|| {
        let ch = ch.as_ref().ok_or_else(|| null("channel"))?;
        let out = out_ref(out, "out")?;
        let m = ch.0.metrics()?;
        *out = RbvarChannelMetrics {
            f: m.f,
            r: m.r,
            u: m.u,
            nonunitality: m.nonunitality,
        };
        Ok(())
    })
}

/// Copies the row-major transfer matrix into `out` (`len` must be `16^q`).
///
/// # Safety
/// `ch` must be NULL or a live handle; `out` NULL or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_channel_ptm(ch: *const RbvarChannel, out: *mut f64, len: usize) -> RbvarStatus {
    guard(|| {
        let ch = ch.as_ref().ok_or_else(|| null("channel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = ch.0.matrix();
        if len != m.len() {
            return Err(Fail(
                RbvarStatus::InvalidArgument,
                format!("expected {} entries, got {len}", m.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Irreducible decomposition of the two-copy Clifford action (q ≤ 2).
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_irreps_new(qubits: u32, out: *mut *mut RbvarIrreps) -> RbvarStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed(RbvarIrreps(extract_irreps(qubits as usize)?));
        Ok(())
    })
}

/// Releases a decomposition.
///
/// # Safety
/// `h` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbvar_irreps_free(h: *mut RbvarIrreps) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of irreducible blocks.
///
/// # Safety
/// `h` must be NULL or a live handle; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_irreps_count(h: *const RbvarIrreps, out: *mut usize) -> RbvarStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("irreps"))?;
        *out_ref(out, "out")? = h.0.blocks().len();
        Ok(())
    })
}

/// Exact variance of `K_m` for gate-independent noise `ch` with ideal state
/// preparation and measurement for the Pauli `target` (a base-4 index
/// `1..4^q` in the I, X, Y, Z ordering, qubit 0 most significant).
///
/// # Safety
/// Handles must be NULL or live; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_exact_variance(
    h: *const RbvarIrreps,
    ch: *const RbvarChannel,
    target: usize,
    m: u64,
    out: *mut f64,
) -> RbvarStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("irreps"))?;
        let ch = ch.as_ref().ok_or_else(|| null("channel"))?;
        let out = out_ref(out, "out")?;
        let spam = SpamSetting::ideal(NormalizedPauli::from_index(ch.0.qubits(), target)?)?;
        *out = h.0.exact_variance(&ch.0, &spam.q, &spam.nu, m)?;
        Ok(())
    })
}

/// Exact variance with explicit effect `Q` and traceless state difference
/// `ν`, both given by their `4^q` coordinates in the normalized Pauli basis.
///
/// # Safety
/// Handles must be NULL or live; `q_coeffs`/`nu_coeffs` NULL or valid for
/// `len` reads; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_exact_variance_spam(
    h: *const RbvarIrreps,
    ch: *const RbvarChannel,
    q_coeffs: *const f64,
    nu_coeffs: *const f64,
    len: usize,
    m: u64,
    out: *mut f64,
) -> RbvarStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("irreps"))?;
        let ch = ch.as_ref().ok_or_else(|| null("channel"))?;
        let qc = slice_arg(q_coeffs, len, "q_coeffs")?;
        let nc = slice_arg(nu_coeffs, len, "nu_coeffs")?;
        let out = out_ref(out, "out")?;
        let q = ch.0.qubits();
        let qv = OperatorVec::new(q, DVector::from_column_slice(qc))?;
        let nv = OperatorVec::new(q, DVector::from_column_slice(nc))?;
        *out = h.0.exact_variance(&ch.0, &qv, &nv, m)?;
        Ok(())
    })
}

/// Runs a simulation described by a JSON configuration.
///
/// # Safety
/// `config_json` must be NULL or NUL-terminated; `out` NULL or valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_simulate_json(config_json: *const c_char, out: *mut *mut RbvarDataset) -> RbvarStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        let out = out_ref(out, "out")?;
        let cfg = RBConfig::from_json_reader(text.as_bytes())?;
        *out = boxed(RbvarDataset(simulate::run_experiment(&cfg)?));
        Ok(())
    })
}

/// Releases a dataset.
///
/// # Safety
/// `ds` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbvar_dataset_free(ds: *mut RbvarDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of sequence lengths in the dataset.
///
/// # Safety
/// `ds` must be NULL or live; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_dataset_len(ds: *const RbvarDataset, out: *mut usize) -> RbvarStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        *out_ref(out, "out")? = ds.0.points.len();
        Ok(())
    })
}

/// The `i`-th per-length summary.
///
/// # Safety
/// `ds` must be NULL or live; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_dataset_point(
    ds: *const RbvarDataset,
    i: usize,
    out: *mut RbvarDecayPoint,
) -> RbvarStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let p = ds.0.points.get(i).ok_or_else(|| {
            Fail(
                RbvarStatus::InvalidArgument,
                format!("index {i} out of range ({} points)", ds.0.points.len()),
            )
        })?;
        *out = RbvarDecayPoint {
            m: p.m,
            mean: p.mean,
            sample_variance: p.sample_variance,
            n: p.n,
            exact_variance: p.exact_variance.unwrap_or(f64::NAN),
            exact_mean: p.exact_mean.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Serializes the dataset to JSON; free the result with
/// [`rbvar_string_free`].
///
/// # Safety
/// `ds` must be NULL or live; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_dataset_to_json(ds: *const RbvarDataset, out: *mut *mut c_char) -> RbvarStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let s = serde_json::to_string(&ds.0).map_err(|e| Fail(RbvarStatus::Internal, e.to_string()))?;
        *out = CString::new(s)
            .map_err(|e| Fail(RbvarStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Fits `A f^m` to the dataset.
///
/// # Safety
/// `ds` must be NULL or live; `out` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbvar_fit(ds: *const RbvarDataset, out: *mut RbvarFit) -> RbvarStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let fit = simulate::fit_decay(&ds.0, 1u64 << ds.0.qubits)?;
        *out = RbvarFit {
            a: fit.a,
            f_hat: fit.f_hat,
            r_hat: fit.r_hat,
            residual_rms: fit.residual_rms,
            method: match fit.method {
                FitMethod::LogLinear => 0,
                FitMethod::GaussNewton => 1,
            },
        };
        Ok(())
    })
}
