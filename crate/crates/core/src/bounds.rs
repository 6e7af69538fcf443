//! Closed-form variance bounds, the SPAM factor η, and the inequalities the
//! bounds are assembled from.
//!
//! Every bound is a function of the infidelity `r`, unitarity `u`, dimension
//! `d`, sequence length `m` and (for the SPAM-aware bounds) the SPAM factor
//! `η`.  The bounds are only valid for `r ≤ 1/3` and refuse larger inputs.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::liouville::{dim_of, rotation_angle_for_infidelity, rotation_unitary, EffectVec, StateVec, Superoperator};
use crate::pauli::NormalizedPauli;
use crate::twirl::{powu, IrrepDecomposition, IrrepLabel, TsClass};

/// Largest infidelity for which the bounds hold.
pub const MAX_INFIDELITY: f64 = 1.0 / 3.0;

/// Slack allowed on `f² ≤ u ≤ 1` before inputs are rejected.
const UNITARITY_SLACK: f64 = 1e-12;

/// Sequence lengths above which `F(x, m)` switches from direct summation to
/// the stable closed forms.
const DIRECT_SUM_MAX_M: u64 = 10_000;

/// Inputs shared by all closed-form bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub r: f64,
    pub u: f64,
    pub d: u64,
    pub m: u64,
    pub eta: f64,
}

impl BoundInputs {
    /// Validates and builds the inputs; `u` is clamped into `[f², 1]` when it
    /// lies within rounding distance of the interval.
    pub fn new(r: f64, u: f64, d: u64, m: u64, eta: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", format!("dimension must be at least 2, got {d}")));
        }
        if !r.is_finite() || r < 0.0 {
            return Err(invalid(
                "r",
                format!("infidelity must be a finite non-negative number, got {r}"),
            ));
        }
        if r > MAX_INFIDELITY {
            return Err(Error::InfidelityTooLarge(r));
        }
        if m < 1 {
            return Err(invalid("m", "sequence length must be at least 1"));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(invalid(
                "eta",
                format!("SPAM factor must be finite and non-negative, got {eta}"),
            ));
        }
        let f = depolarizing_parameter(r, d);
        let f2 = f * f;
        if !u.is_finite() || u < f2 - UNITARITY_SLACK || u > 1.0 + UNITARITY_SLACK {
            return Err(invalid(
                "u",
                format!("unitarity must satisfy f² = {f2} ≤ u ≤ 1, got {u}"),
            ));
        }
        Ok(Self {
            r,
            u: u.clamp(f2, 1.0),
            d,
            m,
            eta,
        })
    }

    /// Inputs with `u = λ + (1 − λ) f²`, `λ ∈ [0, 1]` (λ = 1 is unitary noise,
    /// λ = 0 depolarizing-like noise).
    pub fn with_unitarity_mix(r: f64, lambda: f64, d: u64, m: u64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(
                "lambda",
                format!("mixing weight must lie in [0, 1], got {lambda}"),
            ));
        }
        if d < 2 {
            return Err(invalid("d", format!("dimension must be at least 2, got {d}")));
        }
        let f = depolarizing_parameter(r, d);
        Self::new(r, unitarity_from_mix(lambda, f), d, m, eta)
    }

    /// `f = 1 − d r/(d − 1)`.
    pub fn f(&self) -> f64 {
        depolarizing_parameter(self.r, self.d)
    }

    fn df(&self) -> f64 {
        self.d as f64
    }
}

/// `f = 1 − d r/(d − 1)`.
pub fn depolarizing_parameter(r: f64, d: u64) -> f64 {
    let d = d as f64;
    1.0 - d * r / (d - 1.0)
}

/// `u = λ + (1 − λ) f²`.
pub fn unitarity_from_mix(lambda: f64, f: f64) -> f64 {
    lambda + (1.0 - lambda) * f * f
}

/// Which of two algebraically distinct variants of a bound to evaluate.
///
/// `Derived` follows the derivation: the leading term decays as
/// `f^{2(m−1)}` and the short-sequence bound keeps its factor `m`.
/// `Printed` evaluates the expressions exactly as usually displayed
/// (`f^{m−1}`, and no factor `m` in the short-sequence leading term).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    #[default]
    Derived,
    Printed,
}

impl BoundForm {
    fn leading_decay(self, f: f64, m: u64) -> f64 {
        match self {
            BoundForm::Derived => powu(f * f, m - 1),
            BoundForm::Printed => powu(f, m - 1),
        }
    }
}

/// The two pieces of `a^m − b^m` after a second-order telescoping expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopingTerms {
    /// `m b^{m−1} (a − b)`
    pub linear_term: f64,
    /// `(a − b)² Σ_{s=2}^{m} (s − 1) a^{m−s} b^{s−2}`
    pub quadratic_term: f64,
}

impl TelescopingTerms {
    pub fn sum(&self) -> f64 {
        self.linear_term + self.quadratic_term
    }
}

/// Splits `a^m − b^m` into a term linear in `a − b` and a quadratic remainder.
pub fn telescoping_second_order(a: f64, b: f64, m: u64) -> Result<TelescopingTerms> {
    if m < 1 {
        return Err(invalid("m", "sequence length must be at least 1"));
    }
    let diff = a - b;
    let linear_term = m as f64 * powu(b, m - 1) * diff;
    // Σ_{j=0}^{m−2} (j + 1) b^j a^{m−2−j}, by Horner in b with a running power of a.
    let mut acc = 0.0;
    for j in (0..m.saturating_sub(1)).rev() {
        acc = acc * b + (j + 1) as f64 * powu(a, m - 2 - j);
    }
    Ok(TelescopingTerms {
        linear_term,
        quadratic_term: diff * diff * acc,
    })
}

/// `F(x, m) = Σ_{j=0}^{m−2} (j + 1) x^j
///          = [(m − 1) x^m − m x^{m−1} + 1] / (1 − x)²`, for `0 ≤ x ≤ 1`.
///
/// The closed fraction cancels catastrophically near `x = 1`, so it is never
/// used there: short sums are evaluated directly, long ones either through
/// `expm1`/`log1p` or through a power series in `1 − x`.
pub fn second_order_series(x: f64, m: u64) -> f64 {
    if m < 2 {
        return 0.0;
    }
    let n = (m - 1) as f64;
    let y = 1.0 - x;
    if y == 0.0 {
        return n * (n + 1.0) / 2.0;
    }
    if m <= DIRECT_SUM_MAX_M {
        let mut acc = 0.0;
        for j in (0..m - 1).rev() {
            acc = acc * x + (j + 1) as f64;
        }
        return acc;
    }
    if n * y >= 1e-2 {
        // 1 − x^n (1 + n y) = −expm1(n log1p(−y) + log1p(n y))
        let numerator = -((n * (-y).ln_1p() + (n * y).ln_1p()).exp_m1());
        return numerator / (y * y);
    }
    // F = Σ_{k≥2} (−1)^{k+1} [C(n,k) − n C(n,k−1)] y^{k−2}; terms shrink like (n y)^k/k!.
    let mut binom_prev = n; // C(n, 1)
    let mut total = 0.0;
    let mut ypow = 1.0;
    for k in 2..64u32 {
        let kf = k as f64;
        let binom = binom_prev * (n - kf + 1.0) / kf;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let term = sign * (binom - n * binom_prev) * ypow;
        total += term;
        if term.abs() <= f64::EPSILON * total.abs() {
            break;
        }
        binom_prev = binom;
        ypow *= y;
    }
    total
}

/// `u^{m−2} F(f²/u, m) = Σ_{s=2}^{m} (s − 1) u^{m−s} f^{2(s−2)}`.
pub fn unitarity_weighted_series(u: f64, f: f64, m: u64) -> f64 {
    if m < 2 {
        return 0.0;
    }
    let f2 = f * f;
    if u <= 0.0 {
        // Only reachable when f = 0 as well; the single surviving term is s = m.
        return if f2 == 0.0 && m == 2 { 1.0 } else { 0.0 };
    }
    let x = (f2 / u).min(1.0);
    let s = second_order_series(x, m);
    if s == 0.0 {
        return 0.0;
    }
    ((m - 2) as f64 * u.ln() + s.ln()).exp()
}

/// Variance bound for ideal state preparation and measurement:
/// `(d²−2)/(4(d−1)²) r² m f^{2(m−1)} + d²/(d−1)² r² u^{m−2} F(f²/u, m)`.
pub fn variance_bound_spamfree(inp: &BoundInputs) -> f64 {
    variance_bound_spamfree_with(inp, BoundForm::Derived)
}

pub fn variance_bound_spamfree_with(inp: &BoundInputs, form: BoundForm) -> f64 {
    let d = inp.df();
    let f = inp.f();
    let r2 = inp.r * inp.r;
    let lead = (d * d - 2.0) / (4.0 * (d - 1.0) * (d - 1.0)) * r2 * inp.m as f64 * form.leading_decay(f, inp.m);
    lead + coherent_term(inp, f)
}

fn coherent_term(inp: &BoundInputs, f: f64) -> f64 {
    let d = inp.df();
    d * d / ((d - 1.0) * (d - 1.0)) * inp.r * inp.r * unitarity_weighted_series(inp.u, f, inp.m)
}

/// Short-sequence relaxation of [`variance_bound_spamfree`]:
/// `(d²−2)/(4(d−1)²) m r² + u^{m−2} d² m(m−1)/(2(d−1)²) r²`
/// (with `u = 1` when `assume_u_one`).  `BoundForm::Printed` drops the factor
/// `m` from the first term, which no longer dominates the full bound for
/// `m ≥ 2`.
pub fn variance_bound_small_m(inp: &BoundInputs, assume_u_one: bool) -> f64 {
    variance_bound_small_m_with(inp, assume_u_one, BoundForm::Derived)
}

pub fn variance_bound_small_m_with(inp: &BoundInputs, assume_u_one: bool, form: BoundForm) -> f64 {
    let d = inp.df();
    let m = inp.m as f64;
    let r2 = inp.r * inp.r;
    let lead_m = match form {
        BoundForm::Derived => m,
        BoundForm::Printed => 1.0,
    };
    let u_pow = if assume_u_one || inp.m < 2 {
        1.0
    } else {
        powu(inp.u, inp.m - 2)
    };
    (d * d - 2.0) / (4.0 * (d - 1.0) * (d - 1.0)) * r2 * lead_m
        + u_pow * d * d * m * (m - 1.0) / (2.0 * (d - 1.0) * (d - 1.0)) * r2
}

/// The full SPAM-aware bound as stated in the main theorem:
///
/// `m f^{2(m−1)} (d²−2)/(d+1)² r² + d²/(d−1)² r² u^{m−2} F
///  + η m f^{2(m−1)} r + η r² u^{m−2} F`.
///
/// `BoundForm::Printed` uses `f^{m−1}` in the two leading terms.  At `η = 0`
/// this differs from [`variance_bound_spamfree`] only in the leading
/// coefficient.
pub fn variance_bound_spam(inp: &BoundInputs) -> f64 {
    variance_bound_spam_with(inp, BoundForm::Derived)
}

pub fn variance_bound_spam_with(inp: &BoundInputs, form: BoundForm) -> f64 {
    let d = inp.df();
    let f = inp.f();
    let m = inp.m as f64;
    let r = inp.r;
    let decay = form.leading_decay(f, inp.m);
    let series = unitarity_weighted_series(inp.u, f, inp.m);
    m * decay * (d * d - 2.0) / ((d + 1.0) * (d + 1.0)) * r * r
        + d * d / ((d - 1.0) * (d - 1.0)) * r * r * series
        + inp.eta * m * decay * r
        + inp.eta * r * r * series
}

/// SPAM-aware bound with the coefficients that come out of the derivation:
///
/// `(d²−2)/(4(d−1)²) r² m f^{2(m−1)} + (1+4η) d²/(d−1)² r² u^{m−2} F
///  + 2 η d m r/(d−1) f^{2(m−1)}`.
///
/// Its linear SPAM term is `2d/(d−1)` times larger than the one in
/// [`variance_bound_spam`].  `BoundForm::Printed` uses `f^{m−1}`.
pub fn variance_bound_spam_derived(inp: &BoundInputs) -> f64 {
    variance_bound_spam_derived_with(inp, BoundForm::Derived)
}

pub fn variance_bound_spam_derived_with(inp: &BoundInputs, form: BoundForm) -> f64 {
    let d = inp.df();
    let f = inp.f();
    let m = inp.m as f64;
    let r = inp.r;
    let decay = form.leading_decay(f, inp.m);
    (d * d - 2.0) / (4.0 * (d - 1.0) * (d - 1.0)) * r * r * m * decay
        + (1.0 + 4.0 * inp.eta) * coherent_term(inp, f)
        + 2.0 * inp.eta * d * m * r / (d - 1.0) * decay
}

/// Ideal effect `(𝟙 + 𝐏)/2` in coefficient form.
pub fn ideal_effect(target: NormalizedPauli) -> Result<EffectVec> {
    let (q, _) = ideal_pair(target)?;
    Ok(q)
}

/// Ideal state difference `𝐏/d` in coefficient form.
pub fn ideal_difference(target: NormalizedPauli) -> Result<StateVec> {
    let (_, nu) = ideal_pair(target)?;
    Ok(nu)
}

fn ideal_pair(target: NormalizedPauli) -> Result<(EffectVec, StateVec)> {
    if target.is_identity() {
        return Err(Error::IdentityPauli);
    }
    let q = target.qubits();
    let d = dim_of(q) as f64;
    let n = dim_of(q) * dim_of(q);
    let mut qc = DVector::zeros(n);
    qc[0] = d.sqrt() / 2.0;
    qc[target.index()] = d.sqrt() / 2.0;
    let mut nc = DVector::zeros(n);
    nc[target.index()] = 1.0 / d.sqrt();
    Ok((EffectVec::new(q, qc)?, StateVec::new(q, nc)?))
}

fn check_spam(target: NormalizedPauli, q: &EffectVec, nu: &StateVec) -> Result<()> {
    if q.qubits() != target.qubits() {
        return Err(Error::QubitMismatch {
            left: q.qubits(),
            right: target.qubits(),
        });
    }
    if nu.qubits() != target.qubits() {
        return Err(Error::QubitMismatch {
            left: nu.qubits(),
            right: target.qubits(),
        });
    }
    Ok(())
}

/// Norm-based upper bound on the SPAM factor η.
///
/// With `a = ‖Q − Q_id‖₂`, `b = ‖ν − ν_id‖₂` and the ideal norms
/// `‖Q_id‖₂`, `‖ν_id‖₂`:
/// `c_d [‖Q_id‖² b² + a² ‖ν_id‖² + a² b²] + c_o [a b (a b + 2 b ‖Q_id‖ + 2 a ‖ν_id‖ + 4 ‖ν_id‖ ‖Q_id‖)]`,
/// where `c_d`, `c_o` count the diagonal and off-diagonal irreps
/// (3 and 5 in general, 2 and 1 for a single qubit).
///
/// It dominates [`eta_exact`]; it does not bound [`eta_exact_vs_ideal`],
/// which also picks up terms linear in the deviations.
pub fn eta_bound(q: &EffectVec, nu: &StateVec, target: NormalizedPauli) -> Result<f64> {
    check_spam(target, q, nu)?;
    let (q_id, nu_id) = ideal_pair(target)?;
    let a = q.sub(&q_id).norm();
    let b = nu.sub(&nu_id).norm();
    let qn = q_id.norm();
    let nn = nu_id.norm();
    let (c_diag, c_off) = if target.qubits() == 1 { (2.0, 1.0) } else { (3.0, 5.0) };
    Ok(c_diag * (qn * qn * b * b + a * a * nn * nn + a * a * b * b)
        + c_off * (a * b * (a * b + 2.0 * b * qn + 2.0 * a * nn + 4.0 * nn * qn)))
}

/// Exact SPAM factor
/// `η = Σ_i |⟨⟨Q⊗²|P_i|ν⊗²⟩⟩ − Q_𝐏² ν_𝐏² ⟨⟨σ_𝐏⊗²|P_i|σ_𝐏⊗²⟩⟩|`,
/// where `Q_𝐏`, `ν_𝐏` are the coefficients of `Q` and `ν` along the target.
///
/// This is the quantity the variance bound is proved with.  It vanishes
/// whenever `Q` and `ν` are both multiples of the target plus identity, so a
/// rescaled effect alone gives `η = 0`; see [`eta_exact_vs_ideal`].
pub fn eta_exact(q: &EffectVec, nu: &StateVec, target: NormalizedPauli, dec: &IrrepDecomposition) -> Result<f64> {
    check_spam(target, q, nu)?;
    let overlaps = dec.spam_overlaps(q, nu)?;
    let unit = unit_vector(target);
    let diag = dec.spam_overlaps(&unit, &unit)?;
    let k = q.coeffs()[target.index()] * nu.coeffs()[target.index()];
    Ok(overlaps.iter().zip(&diag).map(|(o, s)| (o - k * k * s).abs()).sum())
}

/// SPAM factor measured against the ideal setting:
/// `Σ_i |⟨⟨Q⊗²|P_i|ν⊗²⟩⟩ − ⟨⟨Q_id⊗²|P_i|ν_id⊗²⟩⟩|`.
///
/// Unlike [`eta_exact`] this is positive for a rescaled effect with an ideal
/// state difference.
pub fn eta_exact_vs_ideal(
    q: &EffectVec,
    nu: &StateVec,
    target: NormalizedPauli,
    dec: &IrrepDecomposition,
) -> Result<f64> {
    check_spam(target, q, nu)?;
    let (q_id, nu_id) = ideal_pair(target)?;
    let overlaps = dec.spam_overlaps(q, nu)?;
    let ideal = dec.spam_overlaps(&q_id, &nu_id)?;
    Ok(overlaps.iter().zip(&ideal).map(|(o, s)| (o - s).abs()).sum())
}

fn unit_vector(target: NormalizedPauli) -> StateVec {
    let n = dim_of(target.qubits()).pow(2);
    let mut c = DVector::zeros(n);
    c[target.index()] = 1.0;
    StateVec::new(target.qubits(), c).expect("length matches")
}

/// Extra variance term of conventional (single-state) RB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularRbExtra {
    /// `¼ ‖ℰ(𝟙/d) − 𝟙/d‖₂² (1 − u^m)/(1 − u)`
    pub term: f64,
    /// `(d+1)²/(2d²) r² (1 − u^m)/(1 − u)`
    pub upper_bound: f64,
}

/// Additional variance incurred when a single input state is used instead
/// of a state difference.  At `u = 1` the geometric factor is `m`.
pub fn regular_rb_extra_term(nonunitality: f64, r: f64, u: f64, m: u64, d: u64) -> Result<RegularRbExtra> {
    if m < 1 {
        return Err(invalid("m", "sequence length must be at least 1"));
    }
    if !(0.0..=1.0 + UNITARITY_SLACK).contains(&u) {
        return Err(invalid("u", format!("unitarity must lie in [0, 1], got {u}")));
    }
    if d < 2 {
        return Err(invalid("d", format!("dimension must be at least 2, got {d}")));
    }
    let u = u.min(1.0);
    let geom = if 1.0 - u < 1e-12 {
        m as f64
    } else {
        -(m as f64 * u.ln()).exp_m1() / (1.0 - u)
    };
    let df = d as f64;
    Ok(RegularRbExtra {
        term: 0.25 * nonunitality * nonunitality * geom,
        upper_bound: (df + 1.0).powi(2) / (2.0 * df * df) * r * r * geom,
    })
}

/// One inequality with its two sides; `margin = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl InequalityCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

/// Result of [`lemma_checks`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub f: f64,
    pub r: f64,
    pub u: f64,
    /// `(1/(d²−1)) Σ_τ E_ττ²`
    pub mean_squared_diagonal: f64,
    pub chis: Vec<(String, f64)>,
    pub checks: Vec<InequalityCheck>,
}

impl LemmaReport {
    pub fn all_hold(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.holds(tol))
    }

    pub fn worst_margin(&self) -> f64 {
        self.checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Checks the inequalities the variance bound rests on for one channel:
/// `f² ≤ mean E_ττ² ≤ 1 − 2dr/(d−1) + 2(d+1)r²/(d−1)`, and, when a
/// decomposition is supplied, `χ_i ≤ u`, `|χ_tr − u| = 0` and (for
/// `r ≤ 1/3`) `|χ_i − f²| ≤ 2dr/(d−1)`.
pub fn lemma_checks(e: &Superoperator, dec: Option<&IrrepDecomposition>) -> Result<LemmaReport> {
    let met = e.metrics()?;
    let d = e.dim() as f64;
    let n = e.dim() * e.dim();
    let msd = (1..n).map(|t| e.matrix()[(t, t)].powi(2)).sum::<f64>() / (n - 1) as f64;
    let (f, r, u) = (met.f, met.r, met.u);
    let mut checks = vec![
        InequalityCheck::new("diag_sq_lower", f * f, msd),
        InequalityCheck::new(
            "diag_sq_upper",
            msd,
            1.0 - 2.0 * d * r / (d - 1.0) + 2.0 * (d + 1.0) * r * r / (d - 1.0),
        ),
    ];
    let mut chis = Vec::new();
    if let Some(dec) = dec {
        if dec.qubits() != e.qubits() {
            return Err(Error::QubitMismatch {
                left: dec.qubits(),
                right: e.qubits(),
            });
        }
        for (label, chi) in dec.chi_coefficients(e)? {
            chis.push((label.to_string(), chi));
            checks.push(InequalityCheck::new(format!("chi_le_u[{label}]"), chi, u));
            if label == IrrepLabel::Tr {
                checks.push(InequalityCheck::new("chi_tr_eq_u", (chi - u).abs(), 0.0));
            }
            if r <= MAX_INFIDELITY {
                checks.push(InequalityCheck::new(
                    format!("chi_near_f2[{label}]"),
                    (chi - f * f).abs(),
                    2.0 * d * r / (d - 1.0),
                ));
            }
        }
    }
    Ok(LemmaReport {
        f,
        r,
        u,
        mean_squared_diagonal: msd,
        chis,
        checks,
    })
}

/// Pauli channel that saturates the upper bound on the mean squared diagonal
/// at infidelity `r`: a single non-identity Pauli error `error` applied with
/// probability `(d + 1) r/d`.
pub fn extremal_pauli_channel(r: f64, error: NormalizedPauli) -> Result<Superoperator> {
    if error.is_identity() {
        return Err(Error::IdentityPauli);
    }
    let q = error.qubits();
    let d = dim_of(q) as f64;
    let p = (d + 1.0) * r / d;
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(
            "r",
            format!("error probability (d+1)r/d = {p} is outside [0, 1]"),
        ));
    }
    let mut probs = vec![0.0; dim_of(q) * dim_of(q)];
    probs[0] = 1.0 - p;
    probs[error.index()] = p;
    Superoperator::pauli_channel(q, &probs)
}

/// One point of the adversarial-SPAM sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPoint {
    pub r: f64,
    /// Largest `m = 1` variance over the effect sweep, unitary noise.
    pub max_variance_unitary: f64,
    /// Same sweep with the ideal effect only, unitary noise.
    pub ideal_variance_unitary: f64,
    /// Largest `m = 1` variance over the effect sweep, depolarizing noise
    /// of the same infidelity.
    pub max_variance_depolarizing: f64,
}

/// Output of [`adversarial_spam_demo`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    pub points: Vec<AdversarialPoint>,
    /// Least-squares slope of `log max_variance_unitary` against `log r`.
    pub slope_unitary: f64,
    /// Same slope for the ideal effect.
    pub slope_ideal: f64,
}

/// Rotation axis used for the unitary noise family of the demo (not a
/// Clifford axis).
pub const ADVERSARIAL_AXIS: [f64; 3] = [1.0, 2.0, 3.0];

/// Single-qubit demonstration that a badly aligned measurement makes the
/// `m = 1` variance linear in `r` under coherent noise.
///
/// For each `r` the noise is a rotation about [`ADVERSARIAL_AXIS`] with
/// infidelity `r`; `ν` is ideal for target `Z` and the effect is swept over
/// `(𝟙 + n·σ)/2` for `n_random` Haar-random directions plus the axis itself
/// and two directions orthogonal to it.
pub fn adversarial_spam_demo<R: Rng + ?Sized>(
    dec: &IrrepDecomposition,
    r_grid: &[f64],
    n_random: usize,
    rng: &mut R,
) -> Result<AdversarialReport> {
    if dec.qubits() != 1 {
        return Err(Error::Precondition("the adversarial SPAM demo is single-qubit".into()));
    }
    if r_grid.len() < 2 {
        return Err(invalid("r_grid", "need at least two infidelities for a slope"));
    }
    let target: NormalizedPauli = "Z".parse()?;
    let (q_id, nu_id) = ideal_pair(target)?;
    let axis = normalize(ADVERSARIAL_AXIS);
    let mut directions = vec![
        axis,
        normalize(cross(axis, [0.0, 0.0, 1.0])),
        normalize(cross(axis, cross(axis, [0.0, 0.0, 1.0]))),
    ];
    for _ in 0..n_random {
        let v: [f64; 3] = [
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
            rng.sample(rand_distr::StandardNormal),
        ];
        directions.push(normalize(v));
    }
    let effects: Vec<EffectVec> = directions
        .iter()
        .map(|n| {
            let c = DVector::from_vec(vec![
                1.0 / 2f64.sqrt(),
                n[0] / 2f64.sqrt(),
                n[1] / 2f64.sqrt(),
                n[2] / 2f64.sqrt(),
            ]);
            EffectVec::new(1, c).expect("single-qubit length")
        })
        .collect();
    let mut points = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(r > 0.0 && r <= MAX_INFIDELITY) {
            return Err(invalid("r_grid", format!("infidelities must lie in (0, 1/3], got {r}")));
        }
        let u = Superoperator::unitary_channel(&rotation_unitary(ADVERSARIAL_AXIS, rotation_angle_for_infidelity(r)))?;
        let dep = Superoperator::depolarizing_from_infidelity(r, 1);
        let mut max_u = f64::NEG_INFINITY;
        let mut max_d = f64::NEG_INFINITY;
        for qe in &effects {
            max_u = max_u.max(dec.exact_variance(&u, qe, &nu_id, 1)?);
            max_d = max_d.max(dec.exact_variance(&dep, qe, &nu_id, 1)?);
        }
        points.push(AdversarialPoint {
            r,
            max_variance_unitary: max_u,
            ideal_variance_unitary: dec.exact_variance(&u, &q_id, &nu_id, 1)?,
            max_variance_depolarizing: max_d,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.r.ln()).collect();
    let slope_unitary = log_slope(&xs, points.iter().map(|p| p.max_variance_unitary))?;
    let slope_ideal = log_slope(&xs, points.iter().map(|p| p.ideal_variance_unitary))?;
    Ok(AdversarialReport {
        points,
        slope_unitary,
        slope_ideal,
    })
}

fn log_slope(xs: &[f64], ys: impl Iterator<Item = f64>) -> Result<f64> {
    let ys: Vec<f64> = ys
        .map(|y| {
            if y > 0.0 {
                Ok(y.ln())
            } else {
                Err(Error::Precondition(format!(
                    "non-positive variance {y} in log-log regression"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Weight of each class of irreps in `⟨⟨Q⊗²|·|ν⊗²⟩⟩`; a diagnostic for how
/// far a SPAM setting is from the ideal diagonal-only weighting.
pub fn class_weights(q: &EffectVec, nu: &StateVec, dec: &IrrepDecomposition) -> Result<[(TsClass, f64); 3]> {
    let overlaps = dec.spam_overlaps(q, nu)?;
    let mut out = [
        (TsClass::Diagonal, 0.0),
        (TsClass::Commuting, 0.0),
        (TsClass::Anticommuting, 0.0),
    ];
    for (b, w) in dec.blocks().iter().zip(overlaps) {
        let slot = out
            .iter_mut()
            .find(|(c, _)| *c == b.label.class())
            .expect("three classes");
        slot.1 += w;
    }
    Ok(out)
}
