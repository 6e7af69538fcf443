//! Number of random sequences needed for a confidence interval of given
//! half-width, from a variance (bound) and a Hoeffding-type concentration
//! inequality.
//!
//! A single-sequence outcome `k_m ∈ [−1/2, 1/2]` is shifted to `[0, 1]`
//! before the concentration inequality for unit-range variables is applied;
//! the shift leaves the variance unchanged.  With
//!
//! `H(V², ε) = (1/(1−ε))^{(1−ε)/(V²+1)} · (V²/(V²+ε))^{(V²+ε)/(V²+1)}`
//!
//! the empirical mean of `N` sequences lies within `ε` of its expectation
//! with probability at least `1 − 2 H^N`, so `N = ⌈log(2/δ)/(−log H)⌉`.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    variance_bound_small_m_with, variance_bound_spam_derived_with, variance_bound_spam_with,
    variance_bound_spamfree_with, BoundForm, BoundInputs,
};
use crate::error::{invalid, Error, Result};

/// Variance of the worst-case unit-range variable.
pub const TRIVIAL_VARIANCE: f64 = 0.25;

fn check_eps_v2(v2: f64, eps: f64) -> Result<()> {
    if !v2.is_finite() || v2 < 0.0 {
        return Err(invalid(
            "V2",
            format!("variance must be finite and non-negative, got {v2}"),
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("epsilon", format!("half-width must lie in (0, 1), got {eps}")));
    }
    if eps + v2 > 1.0 {
        return Err(invalid(
            "epsilon",
            format!(
                "ε + V² = {} exceeds 1, outside the concentration inequality's domain",
                eps + v2
            ),
        ));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(
            "delta",
            format!("failure probability must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(())
}

/// `log H(V², ε)`, computed without forming `H` (which is close to 1 for
/// small `ε`).  Equals `−∞` at `V² = 0`.
pub fn log_hoeffding_h(v2: f64, eps: f64) -> Result<f64> {
    check_eps_v2(v2, eps)?;
    if v2 == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = (1.0 - eps) / (v2 + 1.0);
    let b = (v2 + eps) / (v2 + 1.0);
    Ok(-a * (-eps).ln_1p() - b * (eps / v2).ln_1p())
}

/// `H(V², ε) ∈ [0, 1)`.
pub fn hoeffding_h(v2: f64, eps: f64) -> Result<f64> {
    Ok(log_hoeffding_h(v2, eps)?.exp())
}

/// Real-valued `log(2/δ)/(−log H)` before rounding up.
pub fn sequences_needed_raw(delta: f64, eps: f64, v2: f64) -> Result<f64> {
    check_delta(delta)?;
    let lh = log_hoeffding_h(v2, eps)?;
    if lh >= 0.0 {
        return Err(Error::UnboundedSequences(lh.exp()));
    }
    Ok((2.0 / delta).ln() / -lh)
}

/// `N = ⌈log(2/δ)/(−log H(V², ε))⌉`, at least 1.
pub fn sequences_needed(delta: f64, eps: f64, v2: f64) -> Result<u64> {
    let raw = sequences_needed_raw(delta, eps, v2)?;
    // Guard against 173.0000000001-style round-up from floating error.
    let n = (raw * (1.0 - 4.0 * f64::EPSILON)).ceil();
    if !n.is_finite() || n > u64::MAX as f64 {
        return Err(Error::UnboundedSequences(hoeffding_h(v2, eps)?));
    }
    Ok((n as u64).max(1))
}

/// Failure probability `2 H(V², ε)^N` guaranteed by `N` sequences
/// (capped at 1).
pub fn achieved_confidence(n: u64, eps: f64, v2: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("N", "need at least one sequence"));
    }
    let lh = log_hoeffding_h(v2, eps)?;
    Ok((2f64.ln() + n as f64 * lh).exp().min(1.0))
}

/// Smallest half-width `ε ∈ (0, 1 − V²]` (0 when `V² = 0`) for which `N` sequences reach
/// failure probability `δ`; found by bisection (the failure probability is
/// decreasing in `ε`).
pub fn achieved_halfwidth(n: u64, delta: f64, v2: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(invalid("N", "need at least one sequence"));
    }
    if !v2.is_finite() || !(0.0..1.0).contains(&v2) {
        return Err(invalid("V2", format!("variance must lie in [0, 1), got {v2}")));
    }
    if v2 == 0.0 {
        // Every sequence returns the mean exactly.
        return Ok(0.0);
    }
    let target = delta.ln();
    let log_fail = |eps: f64| -> f64 { 2f64.ln() + n as f64 * log_hoeffding_h(v2, eps).expect("ε in domain") };
    let hi_eps = 1.0 - v2;
    if log_fail(hi_eps) > target {
        return Err(Error::Infeasible { n });
    }
    let (mut lo, mut hi) = (0.0f64, hi_eps);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_fail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// How the unitarity is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitaritySpec {
    /// Explicit `u`.
    Value(f64),
    /// `u = λ + (1 − λ) f²`.
    Mix(f64),
}

/// Which variance to plan with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum BoundChoice {
    Spamfree,
    SmallM {
        assume_u_one: bool,
    },
    /// Theorem-statement SPAM bound; needs `eta`.
    Spam,
    /// Derivation-backed SPAM bound; needs `eta`.
    SpamDerived,
    /// `V² = 1/4`.
    Trivial,
    /// A user-supplied `V²`.
    Explicit(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub delta: f64,
    pub epsilon: f64,
    pub m: u64,
    pub r: f64,
    pub unitarity: UnitaritySpec,
    pub qubits: u32,
    #[serde(default)]
    pub eta: Option<f64>,
    pub bound: BoundChoice,
    #[serde(default)]
    pub form: BoundForm,
}

/// Resolved inputs echoed in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedInputs {
    pub delta: f64,
    pub epsilon: f64,
    pub m: u64,
    pub r: f64,
    pub f: f64,
    pub u: f64,
    pub d: u64,
    pub qubits: u32,
    pub eta: f64,
    pub bound: BoundChoice,
    pub form: BoundForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub inputs: ResolvedInputs,
    pub variance_used: f64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "N_raw")]
    pub n_raw: f64,
    #[serde(rename = "N_trivial")]
    pub n_trivial: u64,
    #[serde(rename = "H")]
    pub h_value: f64,
    /// `2 H^N` at the returned `N`; never above `delta`.
    pub achieved_delta: f64,
    pub notes: Vec<String>,
}

impl PlanReport {
    /// Failure probability guaranteed by `n` sequences at the planned `ε`
    /// and `V²`.
    pub fn achieved_confidence_at(&self, n: u64) -> Result<f64> {
        achieved_confidence(n, self.inputs.epsilon, self.variance_used)
    }
}

/// Largest qubit count accepted by the planner (`d = 2^q` must fit in u64
/// and stay exactly representable).
pub const MAX_PLAN_QUBITS: u32 = 40;

/// Resolves the requested variance and turns it into a sequence count.
pub fn plan(req: &PlanRequest) -> Result<PlanReport> {
    check_delta(req.delta)?;
    if req.qubits == 0 || req.qubits > MAX_PLAN_QUBITS {
        return Err(invalid(
            "qubits",
            format!("must lie in 1..={MAX_PLAN_QUBITS}, got {}", req.qubits),
        ));
    }
    let d = 1u64 << req.qubits;
    let needs_eta = matches!(req.bound, BoundChoice::Spam | BoundChoice::SpamDerived);
    let eta = match (needs_eta, req.eta) {
        (true, None) => return Err(invalid("eta", "the SPAM-aware bounds need a SPAM factor")),
        (_, Some(e)) => e,
        (false, None) => 0.0,
    };
    let f = crate::bounds::depolarizing_parameter(req.r, d);
    let u = match req.unitarity {
        UnitaritySpec::Value(u) => u,
        UnitaritySpec::Mix(lambda) => {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(invalid(
                    "lambda",
                    format!("mixing weight must lie in [0, 1], got {lambda}"),
                ));
            }
            crate::bounds::unitarity_from_mix(lambda, f)
        }
    };
    let mut notes = Vec::new();
    let variance_used = match req.bound {
        BoundChoice::Trivial => TRIVIAL_VARIANCE,
        BoundChoice::Explicit(v) => v,
        choice => {
            let inp = BoundInputs::new(req.r, u, d, req.m, eta)?;
            match choice {
                BoundChoice::Spamfree => variance_bound_spamfree_with(&inp, req.form),
                BoundChoice::SmallM { assume_u_one } => variance_bound_small_m_with(&inp, assume_u_one, req.form),
                BoundChoice::Spam => {
                    notes.push(
                        "spam bound evaluated as stated in the theorem; it is not a valid upper bound for every \
                         single-qubit channel — prefer spam_derived for guarantees"
                            .into(),
                    );
                    variance_bound_spam_with(&inp, req.form)
                }
                BoundChoice::SpamDerived => variance_bound_spam_derived_with(&inp, req.form),
                BoundChoice::Trivial | BoundChoice::Explicit(_) => unreachable!(),
            }
        }
    };
    if variance_used > TRIVIAL_VARIANCE {
        notes.push(format!(
            "variance bound {variance_used:.4e} exceeds the trivial 1/4; the trivial baseline is tighter here"
        ));
    }
    let n_raw = sequences_needed_raw(req.delta, req.epsilon, variance_used)?;
    let n = sequences_needed(req.delta, req.epsilon, variance_used)?;
    let n_trivial = sequences_needed(req.delta, req.epsilon, TRIVIAL_VARIANCE)?;
    let h_value = hoeffding_h(variance_used, req.epsilon)?;
    let achieved_delta = achieved_confidence(n, req.epsilon, variance_used)?;
    notes.push("k_m is shifted from [-1/2, 1/2] to [0, 1] for the concentration inequality; V² is unchanged".into());
    Ok(PlanReport {
        inputs: ResolvedInputs {
            delta: req.delta,
            epsilon: req.epsilon,
            m: req.m,
            r: req.r,
            f,
            u,
            d,
            qubits: req.qubits,
            eta,
            bound: req.bound,
            form: req.form,
        },
        variance_used,
        n,
        n_raw,
        n_trivial,
        h_value,
        achieved_delta,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(qubits: u32, m: u64, eps: f64, eta: Option<f64>, bound: BoundChoice) -> PlanRequest {
        PlanRequest {
            delta: 0.01,
            epsilon: eps,
            m,
            r: 1e-4,
            unitarity: UnitaritySpec::Mix(0.5),
            qubits,
            eta,
            bound,
            form: BoundForm::Derived,
        }
    }

    #[test]
    fn reference_examples() {
        let a = plan(&req(1, 100, 1e-2, None, BoundChoice::Spamfree)).unwrap();
        let b = plan(&req(1, 5000, 0.05, None, BoundChoice::Spamfree)).unwrap();
        let c = plan(&req(4, 100, 1e-2, Some(0.05), BoundChoice::Spam)).unwrap();
        assert_eq!((a.n, b.n, c.n), (174, 471, 250), "{} {} {}", a.n_raw, b.n_raw, c.n_raw);
    }

    #[test]
    fn zero_variance_needs_one_sequence() {
        assert_eq!(sequences_needed(0.01, 0.01, 0.0).unwrap(), 1);
    }
}
