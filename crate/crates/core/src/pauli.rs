//! Pauli-group algebra in the binary symplectic representation.
//!
//! A q-qubit Pauli operator is stored as two bit masks `x`, `z` (bit `j`
//! belongs to qubit `j`) and a phase power `k` so that the operator equals
//! `i^k · X^x Z^z`, where `X^x Z^z = ⊗_j X^{x_j} Z^{z_j}`.  Qubit 0 is the
//! leftmost tensor factor, i.e. the most significant bit of a computational
//! basis index.
//!
//! The Hermitian representative of a given `(x, z)` carries the phase
//! `i^{|x & z|}`, so every `Y = iXZ` factor holds its own `i`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register handled by the bit-mask representation.
pub const MAX_QUBITS: usize = 32;

#[inline]
fn mask(q: usize) -> u64 {
    if q >= 64 {
        u64::MAX
    } else {
        (1u64 << q) - 1
    }
}

#[inline]
fn parity(v: u64) -> u32 {
    v.count_ones() & 1
}

/// A q-qubit Pauli operator `i^phase · X^x Z^z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    qubits: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliOperator {
    /// The identity on `q` qubits.
    pub fn identity(q: usize) -> Self {
        Self {
            qubits: q,
            x: 0,
            z: 0,
            phase: 0,
        }
    }

    /// Builds `i^phase · X^x Z^z`; bits above `q` are rejected.
    pub fn new(q: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                op: "PauliOperator::new",
                max: MAX_QUBITS,
                q,
            });
        }
        if (x | z) & !mask(q) != 0 {
            return Err(Error::InvalidPauliString(format!("bits outside a {q}-qubit register")));
        }
        Ok(Self {
            qubits: q,
            x,
            z,
            phase: phase & 3,
        })
    }

    /// The Hermitian representative with symplectic part `(x, z)`.
    pub fn hermitian(q: usize, x: u64, z: u64) -> Self {
        Self {
            qubits: q,
            x,
            z,
            phase: ((x & z).count_ones() & 3) as u8,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }
    pub fn x_bits(&self) -> u64 {
        self.x
    }
    pub fn z_bits(&self) -> u64 {
        self.z
    }
    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0 && self.phase == 0
    }

    /// Number of qubits on which the operator acts non-trivially.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Sign `±1` relative to the Hermitian representative, or `None` when the
    /// operator is anti-Hermitian (`±i` times a Hermitian Pauli).
    pub fn hermitian_sign(&self) -> Option<i8> {
        let herm = ((self.x & self.z).count_ones() & 3) as u8;
        match (self.phase + 4 - herm) & 3 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    /// Same symplectic part with the Hermitian phase.
    pub fn to_hermitian(&self) -> Self {
        Self::hermitian(self.qubits, self.x, self.z)
    }

    /// Operator product `self · other` with exact phase tracking.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.qubits != other.qubits {
            return Err(Error::QubitMismatch {
                left: self.qubits,
                right: other.qubits,
            });
        }
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        // Z^a X^b = (-1)^{a·b} X^b Z^a
        let swap = 2 * parity(self.z & other.x) as u8;
        Self {
            qubits: self.qubits,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: (self.phase + other.phase + swap) & 3,
        }
    }

    /// Multiplies the operator by `i^k`.
    pub fn times_i_power(&self, k: u8) -> Self {
        Self {
            phase: (self.phase + k) & 3,
            ..*self
        }
    }

    /// `true` iff the two operators commute (binary symplectic form is zero).
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        if self.qubits != other.qubits {
            return Err(Error::QubitMismatch {
                left: self.qubits,
                right: other.qubits,
            });
        }
        Ok(symplectic_form(self.x, self.z, other.x, other.z) == 0)
    }

    /// Position of the Hermitian representative in the Liouville basis.
    pub fn basis_index(&self) -> usize {
        basis_index(self.qubits, self.x, self.z)
    }

    /// Dense `2^q × 2^q` matrix (for cross-checks on small registers).
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.qubits;
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        let ph = i_power(self.phase);
        // X^x Z^z |b> = (-1)^{z·b} |b ⊕ x>, with qubit j at bit (q-1-j).
        let xr = reverse_bits(self.x, self.qubits);
        let zr = reverse_bits(self.z, self.qubits);
        for b in 0..d {
            let sign = if parity(zr & b as u64) == 1 { -1.0 } else { 1.0 };
            out[((b as u64 ^ xr) as usize, b)] = ph * sign;
        }
        out
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Displayed relative to the Hermitian representative.
        let herm = ((self.x & self.z).count_ones() & 3) as u8;
        let prefix = ["+", "+i", "-", "-i"][((self.phase + 4 - herm) & 3) as usize];
        write!(f, "{prefix}{}", pauli_letters(self.qubits, self.x, self.z))
    }
}

impl FromStr for PauliOperator {
    type Err = Error;

    /// Parses strings like `XZ`, `-YI`, `+iZ`; the letters denote the
    /// Hermitian representative and the prefix multiplies it.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (factor, body) = if let Some(rest) = t.strip_prefix("-i") {
            (3u8, rest)
        } else if let Some(rest) = t.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = t.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = t.strip_prefix('+') {
            (0, rest)
        } else {
            (0, t)
        };
        let np = NormalizedPauli::from_str(body)?;
        Ok(np.operator().times_i_power(factor))
    }
}

/// Binary symplectic form `x1·z2 + z1·x2 (mod 2)`.
#[inline]
pub fn symplectic_form(x1: u64, z1: u64, x2: u64, z2: u64) -> u32 {
    parity((x1 & z2) ^ (z1 & x2))
}

#[inline]
pub(crate) fn i_power(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn reverse_bits(v: u64, q: usize) -> u64 {
    let mut out = 0;
    for j in 0..q {
        if v >> j & 1 == 1 {
            out |= 1 << (q - 1 - j);
        }
    }
    out
}

/// Single-qubit letter code: I=0, X=1, Y=2, Z=3.
#[inline]
fn letter(xb: u64, zb: u64) -> usize {
    match (xb, zb) {
        (0, 0) => 0,
        (1, 0) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

fn pauli_letters(q: usize, x: u64, z: u64) -> String {
    (0..q)
        .map(|j| ['I', 'X', 'Y', 'Z'][letter(x >> j & 1, z >> j & 1)])
        .collect()
}

/// Liouville basis position of `(x, z)`: the Pauli string read as a base-4
/// number (I<X<Y<Z) with qubit 0 as the most significant digit.  Index 0 is
/// the identity, and the ordering makes the transfer matrix of `A ⊗ B` the
/// Kronecker product of the factors.
#[inline]
pub fn basis_index(q: usize, x: u64, z: u64) -> usize {
    let mut idx = 0;
    for j in 0..q {
        idx = idx * 4 + letter(x >> j & 1, z >> j & 1);
    }
    idx
}

/// Inverse of [`basis_index`].
#[inline]
pub fn basis_bits(q: usize, mut idx: usize) -> (u64, u64) {
    let (mut x, mut z) = (0u64, 0u64);
    for j in (0..q).rev() {
        let (xb, zb) = match idx & 3 {
            0 => (0, 0),
            1 => (1, 0),
            2 => (1, 1),
            _ => (0, 1),
        };
        x |= xb << j;
        z |= zb << j;
        idx >>= 2;
    }
    (x, z)
}

/// A normalized Hermitian Pauli `σ = P/√d` (the identity is `σ₀`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedPauli {
    qubits: usize,
    index: usize,
}

impl NormalizedPauli {
    pub fn identity(q: usize) -> Self {
        Self { qubits: q, index: 0 }
    }

    /// The basis element at Liouville position `index` (0 ≤ index < 4^q).
    pub fn from_index(q: usize, index: usize) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                op: "NormalizedPauli::from_index",
                max: MAX_QUBITS,
                q,
            });
        }
        if q < 32 && index >= 1usize << (2 * q) {
            return Err(invalid_index(index, q));
        }
        Ok(Self { qubits: q, index })
    }

    pub fn from_bits(q: usize, x: u64, z: u64) -> Self {
        Self {
            qubits: q,
            index: basis_index(q, x, z),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }
    pub fn index(&self) -> usize {
        self.index
    }
    pub fn is_identity(&self) -> bool {
        self.index == 0
    }

    pub fn bits(&self) -> (u64, u64) {
        basis_bits(self.qubits, self.index)
    }

    /// The Hermitian Pauli operator `P = √d σ`.
    pub fn operator(&self) -> PauliOperator {
        let (x, z) = self.bits();
        PauliOperator::hermitian(self.qubits, x, z)
    }

    /// Dense matrix of `σ` including the `1/√d` normalization.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = (1usize << self.qubits) as f64;
        self.operator().to_dense() / Complex64::new(d.sqrt(), 0.0)
    }

    /// All `d²` basis elements in Liouville order.
    pub fn all(q: usize) -> impl Iterator<Item = NormalizedPauli> {
        (0..1usize << (2 * q)).map(move |index| NormalizedPauli { qubits: q, index })
    }
}

fn invalid_index(index: usize, q: usize) -> Error {
    Error::InvalidPauliString(format!("basis index {index} out of range for {q} qubits"))
}

impl fmt::Display for NormalizedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, z) = self.bits();
        write!(f, "{}", pauli_letters(self.qubits, x, z))
    }
}

impl FromStr for NormalizedPauli {
    type Err = Error;

    /// Parses a string of `I`, `X`, `Y`, `Z` letters (qubit 0 first).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let q = t.chars().count();
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::InvalidPauliString(s.to_string()));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (j, c) in t.chars().enumerate() {
            let (xb, zb) = match c.to_ascii_uppercase() {
                'I' => (0, 0),
                'X' => (1, 0),
                'Y' => (1, 1),
                'Z' => (0, 1),
                _ => return Err(Error::InvalidPauliString(s.to_string())),
            };
            x |= xb << j;
            z |= zb << j;
        }
        Ok(Self::from_bits(q, x, z))
    }
}

/// Normalized product `σ·τ := √d στ`, returned as `(phase, ρ)` with
/// `σ·τ = phase · ρ`, `phase ∈ {±1, ±i}`.
pub fn pauli_product(a: &NormalizedPauli, b: &NormalizedPauli) -> Result<(Complex64, NormalizedPauli)> {
    if a.qubits != b.qubits {
        return Err(Error::QubitMismatch {
            left: a.qubits,
            right: b.qubits,
        });
    }
    let prod = a.operator().mul_unchecked(&b.operator());
    let herm = prod.to_hermitian();
    let k = (prod.phase + 4 - herm.phase) & 3;
    Ok((i_power(k), NormalizedPauli::from_bits(a.qubits, prod.x, prod.z)))
}

/// Commutation test via the symplectic form.
pub fn commutes(a: &NormalizedPauli, b: &NormalizedPauli) -> Result<bool> {
    if a.qubits != b.qubits {
        return Err(Error::QubitMismatch {
            left: a.qubits,
            right: b.qubits,
        });
    }
    let (x1, z1) = a.bits();
    let (x2, z2) = b.bits();
    Ok(symplectic_form(x1, z1, x2, z2) == 0)
}

/// Commuting (`C_τ`, excluding `σ₀` and `τ`) and anticommuting (`N_τ`)
/// non-identity Paulis, both in Liouville order.
pub fn commutant_sets(tau: &NormalizedPauli) -> Result<(Vec<NormalizedPauli>, Vec<NormalizedPauli>)> {
    if tau.is_identity() {
        return Err(Error::IdentityPauli);
    }
    let mut c = Vec::new();
    let mut n = Vec::new();
    for s in NormalizedPauli::all(tau.qubits).skip(1) {
        if s == *tau {
            continue;
        }
        if commutes(&s, tau)? {
            c.push(s);
        } else {
            n.push(s);
        }
    }
    Ok((c, n))
}
