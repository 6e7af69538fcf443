//! Channels in the Liouville (Pauli transfer matrix) representation.
//!
//! A channel on q qubits is a real `d² × d²` matrix `E_ij = tr(σ_i ℰ(σ_j))`
//! in the normalized Pauli basis ordered by [`crate::pauli::basis_index`].
//! Operators become real coefficient vectors `a_i = tr(σ_i A)`, and the
//! Hilbert–Schmidt inner product of Hermitian operators becomes the plain
//! dot product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clifford::CliffordElement;
use crate::error::{invalid, Error, Result};
use crate::pauli::{basis_bits, NormalizedPauli, PauliOperator};

/// Tolerance on Choi eigenvalues for the complete-positivity test.
pub const CP_TOLERANCE: f64 = 1e-10;
/// Tolerance on the first row for the trace-preservation test.
pub const TP_TOLERANCE: f64 = 1e-10;

/// A channel (or general linear map) in the Liouville representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    qubits: usize,
    matrix: DMatrix<f64>,
}

/// Figures of merit of a trace-preserving channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    /// Depolarizing parameter.
    pub f: f64,
    /// Average infidelity `(1 − f)(d − 1)/d`.
    pub r: f64,
    /// Unitarity.
    pub u: f64,
    /// `‖ℰ(𝟙/d) − 𝟙/d‖₂`.
    pub nonunitality: f64,
}

/// Outcome of [`Superoperator::cptp_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CptpReport {
    pub trace_preserving: bool,
    pub completely_positive: bool,
    /// Largest absolute deviation of the first row from `(1, 0, …, 0)`.
    pub tp_deviation: f64,
    /// Smallest eigenvalue of the Choi matrix.
    pub min_choi_eigenvalue: f64,
}

impl CptpReport {
    pub fn is_cptp(&self) -> bool {
        self.trace_preserving && self.completely_positive
    }
}

#[inline]
pub(crate) fn dim_of(q: usize) -> usize {
    1usize << q
}

/// `tr(P A)` for a Pauli operator `P` (one nonzero entry per row).
fn pauli_trace(p: &PauliOperator, a: &DMatrix<Complex64>) -> Complex64 {
    let q = p.qubits();
    let pd = p.to_dense();
    let d = dim_of(q);
    let mut acc = Complex64::new(0.0, 0.0);
    for row in 0..d {
        for col in 0..d {
            let v = pd[(row, col)];
            if v.re != 0.0 || v.im != 0.0 {
                acc += v * a[(col, row)];
            }
        }
    }
    acc
}

/// Coefficients `tr(σ_i A)` of a dense operator (real parts).
pub fn operator_coefficients(a: &DMatrix<Complex64>) -> Result<DVector<f64>> {
    let d = a.nrows();
    if d == 0 || !d.is_power_of_two() || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            what: "operator",
            expected: d.next_power_of_two(),
            found: d,
        });
    }
    let q = d.trailing_zeros() as usize;
    let norm = (d as f64).sqrt();
    Ok(DVector::from_iterator(
        d * d,
        NormalizedPauli::all(q).map(|s| pauli_trace(&s.operator(), a).re / norm),
    ))
}

/// Dense operator `Σ_i a_i σ_i`.
pub fn operator_from_coefficients(q: usize, a: &DVector<f64>) -> DMatrix<Complex64> {
    let d = dim_of(q);
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for (i, s) in NormalizedPauli::all(q).enumerate() {
        if a[i] != 0.0 {
            out += s.to_dense() * Complex64::new(a[i], 0.0);
        }
    }
    out
}

impl Superoperator {
    /// Wraps a `4^q × 4^q` matrix.
    pub fn from_matrix(q: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = dim_of(q) * dim_of(q);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "Liouville matrix",
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(Self { qubits: q, matrix })
    }

    pub fn identity(q: usize) -> Self {
        let n = dim_of(q) * dim_of(q);
        Self {
            qubits: q,
            matrix: DMatrix::identity(n, n),
        }
    }

    /// `diag(1, f, …, f)`.  Values outside the CP range
    /// `[−1/(d²−1), 1]` are accepted and reported by [`Self::cptp_check`].
    pub fn depolarizing(f: f64, q: usize) -> Self {
        let mut m = Self::identity(q);
        for i in 1..m.matrix.nrows() {
            m.matrix[(i, i)] = f;
        }
        m
    }

    /// Depolarizing channel with average infidelity `r`.
    pub fn depolarizing_from_infidelity(r: f64, q: usize) -> Self {
        let d = dim_of(q) as f64;
        Self::depolarizing(1.0 - d * r / (d - 1.0), q)
    }

    /// `ρ ↦ U ρ U†`.
    pub fn unitary_channel(u: &DMatrix<Complex64>) -> Result<Self> {
        let d = u.nrows();
        if u.ncols() != d || d < 2 || !d.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                what: "unitary",
                expected: d.next_power_of_two().max(2),
                found: d,
            });
        }
        let dev = (u.adjoint() * u - DMatrix::<Complex64>::identity(d, d)).norm();
        if dev > 1e-10 {
            return Err(Error::NotUnitary(dev));
        }
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// `ρ ↦ Σ_k K_k ρ K_k†` (no completeness check; use [`Self::cptp_check`]).
    pub fn from_kraus(kraus: &[DMatrix<Complex64>]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| invalid("kraus", "at least one operator is required"))?;
        let d = first.nrows();
        if d < 2 || !d.is_power_of_two() || kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return Err(Error::DimensionMismatch {
                what: "Kraus operator",
                expected: d.next_power_of_two().max(2),
                found: d,
            });
        }
        let q = d.trailing_zeros() as usize;
        let n = d * d;
        let paulis: Vec<PauliOperator> = NormalizedPauli::all(q).map(|s| s.operator()).collect();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (j, pj) in paulis.iter().enumerate() {
            let pjd = pj.to_dense();
            let mut image = DMatrix::<Complex64>::zeros(d, d);
            for k in kraus {
                image += k * &pjd * k.adjoint();
            }
            for (i, pi) in paulis.iter().enumerate() {
                // σ_i, σ_j both carry 1/√d: overall factor 1/d.
                m[(i, j)] = pauli_trace(pi, &image).re / d as f64;
            }
        }
        Ok(Self { qubits: q, matrix: m })
    }

    /// Pauli channel `ρ ↦ Σ_G p_G G ρ G` with probabilities indexed in
    /// Liouville order (length `d²`).
    pub fn pauli_channel(q: usize, probs: &[f64]) -> Result<Self> {
        let n = dim_of(q) * dim_of(q);
        if probs.len() != n {
            return Err(Error::InvalidProbabilities(format!(
                "expected {n} entries, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidProbabilities("entries must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for t in 0..n {
            let (tx, tz) = basis_bits(q, t);
            m[(t, t)] = (0..n)
                .map(|g| {
                    let (gx, gz) = basis_bits(q, g);
                    let anti = crate::pauli::symplectic_form(tx, tz, gx, gz);
                    if anti == 1 {
                        -probs[g]
                    } else {
                        probs[g]
                    }
                })
                .sum();
        }
        Ok(Self { qubits: q, matrix: m })
    }

    /// Amplitude damping with decay probability `γ`, applied independently
    /// to each of the `q` qubits.
    pub fn amplitude_damping(gamma: f64, q: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid("gamma", format!("{gamma} is outside [0, 1]")));
        }
        let s = (1.0 - gamma).sqrt();
        #[rustfmt::skip]
        let one = DMatrix::from_row_slice(4, 4, &[
            1.0,   0.0, 0.0, 0.0,
            0.0,   s,   0.0, 0.0,
            0.0,   0.0, s,   0.0,
            gamma, 0.0, 0.0, 1.0 - gamma,
        ]);
        let single = Self { qubits: 1, matrix: one };
        let mut out = single.clone();
        for _ in 1..q {
            out = out.tensor(&single);
        }
        Ok(out)
    }

    /// Transfer matrix of a Clifford element (dense form of its signed
    /// permutation).
    pub fn from_clifford(c: &CliffordElement) -> Self {
        Self {
            qubits: c.qubits(),
            matrix: c.to_signed_permutation().to_dense(),
        }
    }

    /// `Σ_k w_k ℰ_k`; weights must be non-negative and sum to one.
    pub fn convex_mix(parts: &[(f64, Superoperator)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| invalid("mix", "at least one component is required"))?;
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidProbabilities(format!(
                "mixture weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        let mut m = DMatrix::zeros(first.matrix.nrows(), first.matrix.ncols());
        for (w, e) in parts {
            if e.qubits != first.qubits {
                return Err(Error::QubitMismatch {
                    left: first.qubits,
                    right: e.qubits,
                });
            }
            m += &e.matrix * *w;
        }
        Ok(Self {
            qubits: first.qubits,
            matrix: m,
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.qubits != other.qubits {
            return Err(Error::QubitMismatch {
                left: self.qubits,
                right: other.qubits,
            });
        }
        Ok(Self {
            qubits: self.qubits,
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// `self ⊗ other` (self on the leading qubits).
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            qubits: self.qubits + other.qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// Heisenberg-picture map (transpose of the real transfer matrix).
    pub fn adjoint(&self) -> Self {
        Self {
            qubits: self.qubits,
            matrix: self.matrix.transpose(),
        }
    }

    /// `G† ∘ ℰ ∘ G` for a Clifford `G`.
    pub fn conjugate_by(&self, g: &CliffordElement) -> Result<Self> {
        if g.qubits() != self.qubits {
            return Err(Error::QubitMismatch {
                left: self.qubits,
                right: g.qubits(),
            });
        }
        let sp = g.to_signed_permutation();
        let n = self.matrix.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let s = (sp.signs[i] * sp.signs[j]) as f64;
            s * self.matrix[(sp.perm[i] as usize, sp.perm[j] as usize)]
        });
        Ok(Self {
            qubits: self.qubits,
            matrix: m,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        dim_of(self.qubits)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Applies the map to an operator coefficient vector.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "operator vector",
                expected: self.matrix.ncols(),
                found: v.len(),
            });
        }
        Ok(&self.matrix * v)
    }

    fn tp_deviation(&self) -> f64 {
        let row = self.matrix.row(0);
        row.iter()
            .enumerate()
            .map(|(j, v)| if j == 0 { (v - 1.0).abs() } else { v.abs() })
            .fold(0.0, f64::max)
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.tp_deviation() <= TP_TOLERANCE
    }

    /// `f`, `r`, `u` and the non-unitality of a trace-preserving channel.
    pub fn metrics(&self) -> Result<ChannelMetrics> {
        let dev = self.tp_deviation();
        if dev > TP_TOLERANCE {
            return Err(Error::NotTracePreserving(dev));
        }
        let n = self.matrix.nrows();
        let d = self.dim() as f64;
        let denom = (n - 1) as f64;
        let f = (1..n).map(|t| self.matrix[(t, t)]).sum::<f64>() / denom;
        let block = self.matrix.view((1, 1), (n - 1, n - 1));
        let u = block.iter().map(|v| v * v).sum::<f64>() / denom;
        let col = self.matrix.view((1, 0), (n - 1, 1));
        let nonunitality = col.norm() / d.sqrt();
        Ok(ChannelMetrics {
            f,
            r: (1.0 - f) * (d - 1.0) / d,
            u,
            nonunitality,
        })
    }

    /// Choi matrix `J = Σ_ab ℰ(|a⟩⟨b|) ⊗ |a⟩⟨b| = Σ_ij E_ij σ_i ⊗ σ_jᵀ`.
    pub fn choi(&self) -> DMatrix<Complex64> {
        let q = self.qubits;
        let d = self.dim();
        let basis: Vec<DMatrix<Complex64>> = NormalizedPauli::all(q).map(|s| s.to_dense()).collect();
        let mut j = DMatrix::<Complex64>::zeros(d * d, d * d);
        for (a, sa) in basis.iter().enumerate() {
            for (b, sb) in basis.iter().enumerate() {
                let e = self.matrix[(a, b)];
                if e != 0.0 {
                    j += sa.kronecker(&sb.transpose()) * Complex64::new(e, 0.0);
                }
            }
        }
        j
    }

    /// Trace preservation (first-row test) and complete positivity
    /// (Choi eigenvalues ≥ −1e-10).
    pub fn cptp_check(&self) -> CptpReport {
        let tp_deviation = self.tp_deviation();
        let choi = self.choi();
        let herm = (&choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
        let min_choi_eigenvalue = herm
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        CptpReport {
            trace_preserving: tp_deviation <= TP_TOLERANCE,
            completely_positive: min_choi_eigenvalue >= -CP_TOLERANCE,
            tp_deviation,
            min_choi_eigenvalue,
        }
    }
}

/// `exp(−iθ n·σ/2)` for a (not necessarily normalized) axis `n`.
pub fn rotation_unitary(axis: [f64; 3], theta: f64) -> DMatrix<Complex64> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [nx, ny, nz] = axis.map(|a| a / norm);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let c0 = Complex64::new;
    DMatrix::from_row_slice(
        2,
        2,
        &[c0(c, -s * nz), c0(-s * ny, -s * nx), c0(s * ny, -s * nx), c0(c, s * nz)],
    )
}

/// Single-qubit rotation angle with average infidelity `r`
/// (`r = (1 − cos θ)/3`).
pub fn rotation_angle_for_infidelity(r: f64) -> f64 {
    (1.0 - 3.0 * r).clamp(-1.0, 1.0).acos()
}

/// A state, state difference, or effect in coefficient form.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorVec {
    qubits: usize,
    coeffs: DVector<f64>,
}

/// Density operators and state differences (`ν`).
pub type StateVec = OperatorVec;
/// Measurement effects (`Q`).
pub type EffectVec = OperatorVec;

impl OperatorVec {
    pub fn new(q: usize, coeffs: DVector<f64>) -> Result<Self> {
        let n = dim_of(q) * dim_of(q);
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                what: "operator vector",
                expected: n,
                found: coeffs.len(),
            });
        }
        Ok(Self { qubits: q, coeffs })
    }

    pub fn zeros(q: usize) -> Self {
        let n = dim_of(q) * dim_of(q);
        Self {
            qubits: q,
            coeffs: DVector::zeros(n),
        }
    }

    pub fn from_dense(a: &DMatrix<Complex64>) -> Result<Self> {
        let coeffs = operator_coefficients(a)?;
        Ok(Self {
            qubits: a.nrows().trailing_zeros() as usize,
            coeffs,
        })
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        operator_from_coefficients(self.qubits, &self.coeffs)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Coefficient on `σ₀`.
    pub fn identity_coefficient(&self) -> f64 {
        self.coeffs[0]
    }

    /// Copy with the `σ₀` component removed.
    pub fn traceless_part(&self) -> Self {
        let mut c = self.coeffs.clone();
        c[0] = 0.0;
        Self {
            qubits: self.qubits,
            coeffs: c,
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.dot(&other.coeffs)
    }

    /// Schatten-2 norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            qubits: self.qubits,
            coeffs: &self.coeffs - &other.coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            qubits: self.qubits,
            coeffs: &self.coeffs * s,
        }
    }

    /// Image under a channel (Schrödinger picture).
    pub fn evolve(&self, e: &Superoperator) -> Result<Self> {
        Ok(Self {
            qubits: self.qubits,
            coeffs: e.apply(&self.coeffs)?,
        })
    }

    /// Image under the adjoint channel (Heisenberg picture, for effects).
    pub fn evolve_heisenberg(&self, e: &Superoperator) -> Result<Self> {
        Ok(Self {
            qubits: self.qubits,
            coeffs: e.adjoint().apply(&self.coeffs)?,
        })
    }
}

/// Preparations and measurement of one RB experiment.
///
/// `ρ` and `ρ̂` are the states prepared for the two halves of the
/// state-difference protocol, `ν = (ρ − ρ̂)/2` and `Q` the measured effect.
/// Ideally `ρ = (𝟙 + 𝐏)/d`, `ρ̂ = (𝟙 − 𝐏)/d`, `Q = (𝟙 + 𝐏)/2`, so that
/// `ν = 𝐏/d` and `⟨⟨Q|ν⟩⟩ = 1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpamSetting {
    pub target: NormalizedPauli,
    pub rho: StateVec,
    pub rho_hat: StateVec,
    pub q: EffectVec,
    pub nu: StateVec,
}

impl SpamSetting {
    pub fn ideal(target: NormalizedPauli) -> Result<Self> {
        Self::with_noise(target, None, None)
    }

    /// Ideal preparations passed through `prep`, ideal effect measured after
    /// `meas`.
    pub fn with_noise(
        target: NormalizedPauli,
        prep: Option<&Superoperator>,
        meas: Option<&Superoperator>,
    ) -> Result<Self> {
        if target.is_identity() {
            return Err(Error::IdentityPauli);
        }
        let q = target.qubits();
        let d = dim_of(q) as f64;
        let n = dim_of(q) * dim_of(q);
        let t = target.index();
        let mut rho = DVector::zeros(n);
        rho[0] = 1.0 / d.sqrt();
        rho[t] = 1.0 / d.sqrt();
        let mut rho_hat = rho.clone();
        rho_hat[t] = -rho_hat[t];
        let mut qv = DVector::zeros(n);
        qv[0] = d.sqrt() / 2.0;
        qv[t] = d.sqrt() / 2.0;
        let mut rho = OperatorVec::new(q, rho)?;
        let mut rho_hat = OperatorVec::new(q, rho_hat)?;
        let mut qe = OperatorVec::new(q, qv)?;
        if let Some(p) = prep {
            rho = rho.evolve(p)?;
            rho_hat = rho_hat.evolve(p)?;
        }
        if let Some(mch) = meas {
            qe = qe.evolve_heisenberg(mch)?;
        }
        let nu = rho.sub(&rho_hat).scale(0.5);
        Ok(Self {
            target,
            rho,
            rho_hat,
            q: qe,
            nu,
        })
    }

    /// Builds a setting directly from `Q` and `ν`; the two preparations are
    /// reconstructed as `𝟙/d ± ν`.
    pub fn from_effect_and_difference(target: NormalizedPauli, q: EffectVec, nu: StateVec) -> Result<Self> {
        if q.qubits() != nu.qubits() || q.qubits() != target.qubits() {
            return Err(Error::QubitMismatch {
                left: q.qubits(),
                right: nu.qubits(),
            });
        }
        if nu.identity_coefficient().abs() > 1e-12 {
            return Err(Error::NotTraceless(nu.identity_coefficient()));
        }
        let d = dim_of(q.qubits()) as f64;
        let mut mixed = OperatorVec::zeros(q.qubits());
        mixed.coeffs[0] = 1.0 / d.sqrt();
        let rho = OperatorVec {
            qubits: q.qubits(),
            coeffs: &mixed.coeffs + &nu.coeffs,
        };
        let rho_hat = mixed.sub(&nu);
        Ok(Self {
            target,
            rho,
            rho_hat,
            q,
            nu,
        })
    }

    pub fn qubits(&self) -> usize {
        self.target.qubits()
    }

    /// The ideal setting for the same target.
    pub fn ideal_reference(&self) -> Self {
        Self::ideal(self.target).expect("target validated at construction")
    }
}

/// JSON description of a channel.
///
/// Examples: `{"type":"depolarizing","f":0.99}`,
/// `{"type":"unitary","axis":[0,0,1],"theta":0.1}`,
/// `{"type":"pauli","probs":{"I":0.99,"Z":0.01}}`,
/// `{"type":"amplitude_damping","gamma":0.01}`,
/// `{"type":"mix","components":[{"weight":0.5,"channel":{…}},…]}`,
/// `{"type":"compose","channels":[first, second, …]}`,
/// `{"type":"tensor","channels":[qubit0-block, …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity,
    Depolarizing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<f64>,
    },
    /// Single-qubit rotation `exp(−iθ n·σ/2)` on every qubit, or an explicit
    /// unitary given as `[[re, im], …]` rows.
    Unitary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<[f64; 2]>>>,
    },
    Pauli {
        probs: std::collections::BTreeMap<String, f64>,
    },
    AmplitudeDamping {
        gamma: f64,
    },
    Mix {
        components: Vec<MixComponent>,
    },
    Compose {
        channels: Vec<ChannelSpec>,
    },
    Tensor {
        channels: Vec<ChannelSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixComponent {
    pub weight: f64,
    pub channel: ChannelSpec,
}

impl ChannelSpec {
    /// Number of qubits the spec pins down by itself, if any.
    fn intrinsic_qubits(&self) -> Option<usize> {
        match self {
            ChannelSpec::Unitary { matrix: Some(rows), .. } => Some(rows.len().trailing_zeros() as usize),
            ChannelSpec::Pauli { probs } => probs.keys().next().map(|k| k.trim().len()),
            ChannelSpec::Tensor { channels } => channels
                .iter()
                .map(|c| c.intrinsic_qubits().unwrap_or(1))
                .sum::<usize>()
                .into(),
            _ => None,
        }
    }

    /// Builds the channel on `q` qubits.
    pub fn build(&self, q: usize) -> Result<Superoperator> {
        match self {
            ChannelSpec::Identity => Ok(Superoperator::identity(q)),
            ChannelSpec::Depolarizing { f, r } => {
                let d = dim_of(q) as f64;
                let f = match (f, r) {
                    (Some(f), None) => *f,
                    (None, Some(r)) => 1.0 - d * r / (d - 1.0),
                    _ => return Err(Error::Config("depolarizing needs exactly one of `f`, `r`".into())),
                };
                let f_min = -1.0 / (d * d - 1.0);
                if !(f_min..=1.0).contains(&f) {
                    return Err(invalid(
                        "f",
                        format!("depolarizing parameter {f} is outside the completely positive range [{f_min}, 1]"),
                    ));
                }
                Ok(Superoperator::depolarizing(f, q))
            }
            ChannelSpec::Unitary { axis, theta, matrix } => {
                if let Some(rows) = matrix {
                    let d = rows.len();
                    let flat: Vec<Complex64> = rows
                        .iter()
                        .flat_map(|row| row.iter().map(|c| Complex64::new(c[0], c[1])))
                        .collect();
                    if flat.len() != d * d {
                        return Err(Error::Config("unitary matrix must be square".into()));
                    }
                    let u = DMatrix::from_row_slice(d, d, &flat);
                    let e = Superoperator::unitary_channel(&u)?;
                    if e.qubits != q {
                        return Err(Error::QubitMismatch {
                            left: q,
                            right: e.qubits,
                        });
                    }
                    Ok(e)
                } else {
                    let theta = theta.ok_or_else(|| Error::Config("unitary needs `theta` or `matrix`".into()))?;
                    let single =
                        Superoperator::unitary_channel(&rotation_unitary(axis.unwrap_or([0.0, 0.0, 1.0]), theta))?;
                    let mut out = single.clone();
                    for _ in 1..q {
                        out = out.tensor(&single);
                    }
                    Ok(out)
                }
            }
            ChannelSpec::Pauli { probs } => {
                let n = dim_of(q) * dim_of(q);
                let mut p = vec![0.0; n];
                for (k, v) in probs {
                    let s: NormalizedPauli = k.parse()?;
                    if s.qubits() != q {
                        return Err(Error::QubitMismatch {
                            left: q,
                            right: s.qubits(),
                        });
                    }
                    p[s.index()] += v;
                }
                if !probs.keys().any(|k| k.chars().all(|c| c == 'I' || c == 'i')) {
                    // Unlisted identity weight absorbs the remainder.
                    p[0] = 1.0 - p.iter().sum::<f64>();
                }
                Superoperator::pauli_channel(q, &p)
            }
            ChannelSpec::AmplitudeDamping { gamma } => Superoperator::amplitude_damping(*gamma, q),
            ChannelSpec::Mix { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.weight, c.channel.build(q)?)))
                    .collect::<Result<Vec<_>>>()?;
                Superoperator::convex_mix(&parts)
            }
            ChannelSpec::Compose { channels } => {
                let mut out = Superoperator::identity(q);
                for c in channels {
                    out = c.build(q)?.compose(&out)?;
                }
                Ok(out)
            }
            ChannelSpec::Tensor { channels } => {
                let mut parts = Vec::new();
                let mut used = 0;
                for c in channels {
                    let k = c.intrinsic_qubits().unwrap_or(1);
                    parts.push(c.build(k)?);
                    used += k;
                }
                if used != q {
                    return Err(Error::QubitMismatch { left: q, right: used });
                }
                let mut it = parts.into_iter();
                let mut out = it.next().ok_or_else(|| Error::Config("empty tensor".into()))?;
                for p in it {
                    out = out.tensor(&p);
                }
                Ok(out)
            }
        }
    }
}

/// Haar-random `d × d` unitary (QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal removed).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// `exp(−i s H)` for a GUE-distributed Hermitian `H` with unit-variance
/// entries: a random unitary whose distance from the identity grows with `s`.
pub fn random_unitary_near_identity<R: Rng + ?Sized>(d: usize, s: f64, rng: &mut R) -> DMatrix<Complex64> {
    let mut h = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0);
        for j in (i + 1)..d {
            let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / 2f64.sqrt();
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let eig = h.symmetric_eigen();
    let mut u = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        let v = eig.eigenvectors.column(k);
        u += v * v.adjoint() * Complex64::from_polar(1.0, -s * eig.eigenvalues[k]);
    }
    u
}

impl Superoperator {
    /// Random channel with `kraus_rank` Kraus operators, drawn as the blocks
    /// of a Haar-random isometry `ℂ^d → ℂ^{d·k}`.
    pub fn random<R: Rng + ?Sized>(q: usize, kraus_rank: usize, rng: &mut R) -> Result<Self> {
        if kraus_rank == 0 {
            return Err(invalid("kraus_rank", "need at least one Kraus operator"));
        }
        let d = dim_of(q);
        let big = haar_unitary(d * kraus_rank, rng);
        let kraus: Vec<DMatrix<Complex64>> = (0..kraus_rank)
            .map(|k| big.view((k * d, 0), (d, d)).into_owned())
            .collect();
        Self::from_kraus(&kraus)
    }

    /// Random weak noise: a coherent part `exp(−isH)` with `s ≤ coherent`
    /// mixed with weight `p ≤ incoherent` into a random rank-`1..=4`
    /// channel.  Useful as a generic low-infidelity test channel.
    pub fn random_weak_noise<R: Rng + ?Sized>(q: usize, coherent: f64, incoherent: f64, rng: &mut R) -> Result<Self> {
        let d = dim_of(q);
        let s = coherent * rng.gen::<f64>();
        let p = incoherent * rng.gen::<f64>();
        let rank = rng.gen_range(1..=4);
        let u = Self::unitary_channel(&random_unitary_near_identity(d, s, rng))?;
        let other = Self::random(q, rank, rng)?;
        Self::convex_mix(&[(1.0 - p, u), (p, other)])
    }
}
