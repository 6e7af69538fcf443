//! Clifford group elements as symplectic tableaux with sign bits.
//!
//! An element `C` is stored through the images `C X_j C†` and `C Z_j C†` of
//! the single-qubit generators, each a Hermitian Pauli carrying a sign.
//! Global phases are discarded, so equality of tableaux is equality in the
//! Clifford group modulo phase.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pauli::{basis_bits, symplectic_form, PauliOperator, MAX_QUBITS};

/// Signed permutation `σ_j ↦ signs[j] · σ_{perm[j]}` of the Liouville basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPermutation {
    pub perm: Vec<u32>,
    pub signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n as u32).collect(),
            signs: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `out = G · v` for a coefficient vector `v`.
    #[inline]
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (j, &vj) in v.iter().enumerate() {
            out[self.perm[j] as usize] = self.signs[j] as f64 * vj;
        }
    }

    /// `out = Gᵀ · v` (the inverse action).
    #[inline]
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.signs[j] as f64 * v[self.perm[j] as usize];
        }
    }

    /// `self ← g ∘ self`: afterwards `self` acts as the old `self` followed
    /// by `g`.
    #[inline]
    pub fn push_front(&mut self, g: &SignedPermutation) {
        for (p, s) in self.perm.iter_mut().zip(self.signs.iter_mut()) {
            let k = *p as usize;
            *p = g.perm[k];
            *s *= g.signs[k];
        }
    }

    /// Dense orthogonal matrix with `M[perm[j], j] = signs[j]`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(self.perm[j] as usize, j)] = self.signs[j] as f64;
        }
        m
    }
}

/// A q-qubit Clifford element modulo global phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CliffordElement {
    qubits: usize,
    /// `images[j] = C X_j C†`, `images[q + j] = C Z_j C†`.
    images: Vec<PauliOperator>,
}

impl CliffordElement {
    pub fn identity(q: usize) -> Self {
        let mut images = Vec::with_capacity(2 * q);
        for j in 0..q {
            images.push(PauliOperator::hermitian(q, 1 << j, 0));
        }
        for j in 0..q {
            images.push(PauliOperator::hermitian(q, 0, 1 << j));
        }
        Self { qubits: q, images }
    }

    /// Builds an element from generator images, validating commutation
    /// relations and Hermiticity.
    pub fn from_images(q: usize, images: Vec<PauliOperator>) -> Result<Self> {
        if images.len() != 2 * q {
            return Err(Error::DimensionMismatch {
                what: "tableau images",
                expected: 2 * q,
                found: images.len(),
            });
        }
        for p in &images {
            if p.qubits() != q {
                return Err(Error::QubitMismatch {
                    left: q,
                    right: p.qubits(),
                });
            }
            if p.hermitian_sign().is_none() {
                return Err(Error::Precondition("tableau image is not Hermitian".into()));
            }
        }
        for a in 0..2 * q {
            for b in 0..2 * q {
                let want = u32::from(a % q == b % q && a != b);
                let got = symplectic_form(
                    images[a].x_bits(),
                    images[a].z_bits(),
                    images[b].x_bits(),
                    images[b].z_bits(),
                );
                if got != want {
                    return Err(Error::Precondition(
                        "tableau images violate the symplectic relations".into(),
                    ));
                }
            }
        }
        Ok(Self { qubits: q, images })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn images(&self) -> &[PauliOperator] {
        &self.images
    }

    /// The `2q × 2q` binary symplectic matrix; column `k` is the `(x | z)`
    /// vector of the k-th generator image.
    pub fn symplectic(&self) -> Vec<Vec<u8>> {
        let q = self.qubits;
        let mut s = vec![vec![0u8; 2 * q]; 2 * q];
        for (k, img) in self.images.iter().enumerate() {
            for j in 0..q {
                s[j][k] = (img.x_bits() >> j & 1) as u8;
                s[q + j][k] = (img.z_bits() >> j & 1) as u8;
            }
        }
        s
    }

    /// Sign bits of the generator images (1 means a `−` sign).
    pub fn phase_bits(&self) -> Vec<u8> {
        self.images
            .iter()
            .map(|p| u8::from(p.hermitian_sign() == Some(-1)))
            .collect()
    }

    /// `C P C†` for an arbitrary Pauli operator.
    pub fn conjugate(&self, p: &PauliOperator) -> Result<PauliOperator> {
        if p.qubits() != self.qubits {
            return Err(Error::QubitMismatch {
                left: self.qubits,
                right: p.qubits(),
            });
        }
        Ok(self.conjugate_unchecked(p))
    }

    #[inline]
    pub(crate) fn conjugate_unchecked(&self, p: &PauliOperator) -> PauliOperator {
        let q = self.qubits;
        let mut acc = PauliOperator::identity(q).times_i_power(p.phase_power());
        let (x, z) = (p.x_bits(), p.z_bits());
        for j in 0..q {
            if x >> j & 1 == 1 {
                acc = acc.mul_unchecked(&self.images[j]);
            }
        }
        for j in 0..q {
            if z >> j & 1 == 1 {
                acc = acc.mul_unchecked(&self.images[q + j]);
            }
        }
        acc
    }

    /// `a ∘ b`: the element acting as `b` first, then `a`.
    pub fn compose(a: &Self, b: &Self) -> Result<Self> {
        if a.qubits != b.qubits {
            return Err(Error::QubitMismatch {
                left: a.qubits,
                right: b.qubits,
            });
        }
        Ok(Self {
            qubits: a.qubits,
            images: b.images.iter().map(|p| a.conjugate_unchecked(p)).collect(),
        })
    }

    /// Group inverse.
    pub fn invert(&self) -> Self {
        let q = self.qubits;
        let images = (0..2 * q)
            .map(|k| {
                let (gx, gz) = if k < q { (1u64 << k, 0) } else { (0, 1u64 << (k - q)) };
                // Preimage coordinates follow from form preservation:
                // x_i = <g, C(Z_i)>, z_i = <g, C(X_i)>.
                let (mut x, mut z) = (0u64, 0u64);
                for i in 0..q {
                    let zi = &self.images[q + i];
                    let xi = &self.images[i];
                    x |= (symplectic_form(gx, gz, zi.x_bits(), zi.z_bits()) as u64) << i;
                    z |= (symplectic_form(gx, gz, xi.x_bits(), xi.z_bits()) as u64) << i;
                }
                let pre = PauliOperator::hermitian(q, x, z);
                let img = self.conjugate_unchecked(&pre);
                match img.hermitian_sign() {
                    Some(-1) => pre.times_i_power(2),
                    _ => pre,
                }
            })
            .collect();
        Self { qubits: q, images }
    }

    /// Hadamard on qubit `j`.
    pub fn h(q: usize, j: usize) -> Self {
        let mut c = Self::identity(q);
        c.images[j] = PauliOperator::hermitian(q, 0, 1 << j);
        c.images[q + j] = PauliOperator::hermitian(q, 1 << j, 0);
        c
    }

    /// Phase gate `S = diag(1, i)` on qubit `j`.
    pub fn s(q: usize, j: usize) -> Self {
        let mut c = Self::identity(q);
        c.images[j] = PauliOperator::hermitian(q, 1 << j, 1 << j);
        c
    }

    /// CNOT with control `c` and target `t`.
    pub fn cnot(q: usize, c: usize, t: usize) -> Self {
        let mut g = Self::identity(q);
        g.images[c] = PauliOperator::hermitian(q, (1 << c) | (1 << t), 0);
        g.images[q + t] = PauliOperator::hermitian(q, 0, (1 << c) | (1 << t));
        g
    }

    /// The generating set `{H_j, S_j, CNOT_{j,k}}`.
    pub fn generators(q: usize) -> Vec<Self> {
        let mut gens = Vec::new();
        for j in 0..q {
            gens.push(Self::h(q, j));
            gens.push(Self::s(q, j));
        }
        for c in 0..q {
            for t in 0..q {
                if c != t {
                    gens.push(Self::cnot(q, c, t));
                }
            }
        }
        gens
    }

    /// Liouville action as a signed permutation of the normalized Pauli basis.
    pub fn to_signed_permutation(&self) -> SignedPermutation {
        let q = self.qubits;
        let n = 1usize << (2 * q);
        let mut perm = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for j in 0..n {
            let (x, z) = basis_bits(q, j);
            let img = self.conjugate_unchecked(&PauliOperator::hermitian(q, x, z));
            perm.push(img.basis_index() as u32);
            signs.push(img.hermitian_sign().unwrap_or(1));
        }
        SignedPermutation { perm, signs }
    }

    /// A dense unitary realizing the element (up to global phase).
    ///
    /// `U|0…0⟩` is the joint +1 eigenvector of the images of `Z_j`, and
    /// `U|b⟩ = Π_j C(X_j)^{b_j} U|0…0⟩`.
    pub fn to_unitary(&self) -> Result<DMatrix<Complex64>> {
        let q = self.qubits;
        if q > 8 {
            return Err(Error::TooManyQubits {
                op: "to_unitary",
                max: 8,
                q,
            });
        }
        let d = 1usize << q;
        let id = DMatrix::<Complex64>::identity(d, d);
        let mut proj = id.clone();
        for j in 0..q {
            proj = &proj * (&id + self.images[q + j].to_dense()) * Complex64::new(0.5, 0.0);
        }
        let col = (0..d)
            .map(|c| proj.column(c).into_owned())
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("non-empty");
        let psi0 = &col / Complex64::new(col.norm(), 0.0);
        let xs: Vec<DMatrix<Complex64>> = (0..q).map(|j| self.images[j].to_dense()).collect();
        let mut u = DMatrix::<Complex64>::zeros(d, d);
        for b in 0..d {
            let mut v = psi0.clone();
            for (j, xj) in xs.iter().enumerate() {
                if b >> (q - 1 - j) & 1 == 1 {
                    v = xj * v;
                }
            }
            u.set_column(b, &v);
        }
        Ok(u)
    }
}

/// A symplectic pair `(e, f)` with `⟨e, f⟩ = 1`, each vector as `(x, z)` bit masks.
type HyperbolicPair = ((u64, u64), (u64, u64));

/// Projects `v` onto the symplectic complement of the given hyperbolic pairs.
fn project_out(v: (u64, u64), pairs: &[HyperbolicPair]) -> (u64, u64) {
    let (mut x, mut z) = v;
    for &((ex, ez), (fx, fz)) in pairs {
        if symplectic_form(v.0, v.1, fx, fz) == 1 {
            x ^= ex;
            z ^= ez;
        }
        if symplectic_form(v.0, v.1, ex, ez) == 1 {
            x ^= fx;
            z ^= fz;
        }
    }
    (x, z)
}

fn assemble(q: usize, pairs: &[HyperbolicPair], signs: u64) -> CliffordElement {
    let mut images = vec![PauliOperator::identity(q); 2 * q];
    for (k, &((ex, ez), (fx, fz))) in pairs.iter().enumerate() {
        let mut a = PauliOperator::hermitian(q, ex, ez);
        let mut b = PauliOperator::hermitian(q, fx, fz);
        if signs >> k & 1 == 1 {
            a = a.times_i_power(2);
        }
        if signs >> (q + k) & 1 == 1 {
            b = b.times_i_power(2);
        }
        images[k] = a;
        images[q + k] = b;
    }
    CliffordElement { qubits: q, images }
}

/// Exactly uniform draw from the q-qubit Clifford group modulo phase.
///
/// The symplectic part is a uniformly random symplectic basis built one
/// hyperbolic pair at a time: `a` uniform among nonzero vectors of the
/// current symplectic complement, `b` uniform among complement vectors with
/// `⟨a, b⟩ = 1`.  Every symplectic matrix arises from exactly one such
/// sequence, so the result is uniform on `Sp(2q, F₂)`; the `2q` sign bits
/// are drawn independently.
pub fn sample_clifford_uniform<R: Rng + ?Sized>(q: usize, rng: &mut R) -> CliffordElement {
    assert!((1..=MAX_QUBITS).contains(&q), "qubit count out of range");
    let m = if q == 64 { u64::MAX } else { (1u64 << q) - 1 };
    let mut pairs: Vec<HyperbolicPair> = Vec::with_capacity(q);
    for _ in 0..q {
        let a = loop {
            let v = project_out((rng.gen::<u64>() & m, rng.gen::<u64>() & m), &pairs);
            if v != (0, 0) {
                break v;
            }
        };
        let b = loop {
            let v = project_out((rng.gen::<u64>() & m, rng.gen::<u64>() & m), &pairs);
            if symplectic_form(a.0, a.1, v.0, v.1) == 1 {
                break v;
            }
        };
        pairs.push((a, b));
    }
    let signs = rng.gen::<u64>() & if 2 * q >= 64 { u64::MAX } else { (1u64 << (2 * q)) - 1 };
    assemble(q, &pairs, signs)
}

/// Every element of the Clifford group modulo phase, for `q ≤ 2`
/// (24 elements for one qubit, 11520 for two).
pub fn enumerate_clifford(q: usize) -> Result<Vec<CliffordElement>> {
    if q == 0 || q > 2 {
        return Err(Error::TooManyQubits {
            op: "enumerate_clifford",
            max: 2,
            q,
        });
    }
    let vecs: Vec<(u64, u64)> = (0..1u64 << (2 * q)).map(|v| (v & ((1 << q) - 1), v >> q)).collect();
    let mut bases = Vec::new();
    let mut stack = Vec::new();
    enumerate_bases(q, &vecs, &mut stack, &mut bases);
    let mut out = Vec::with_capacity(bases.len() << (2 * q));
    for pairs in &bases {
        for signs in 0..1u64 << (2 * q) {
            out.push(assemble(q, pairs, signs));
        }
    }
    Ok(out)
}

fn enumerate_bases(q: usize, vecs: &[(u64, u64)], stack: &mut Vec<HyperbolicPair>, out: &mut Vec<Vec<HyperbolicPair>>) {
    if stack.len() == q {
        out.push(stack.clone());
        return;
    }
    let in_complement = |v: &(u64, u64), st: &[HyperbolicPair]| {
        st.iter().all(|&((ex, ez), (fx, fz))| {
            symplectic_form(v.0, v.1, ex, ez) == 0 && symplectic_form(v.0, v.1, fx, fz) == 0
        })
    };
    for a in vecs.iter().filter(|v| **v != (0, 0)) {
        if !in_complement(a, stack) {
            continue;
        }
        for b in vecs {
            if in_complement(b, stack) && symplectic_form(a.0, a.1, b.0, b.1) == 1 {
                stack.push((*a, *b));
                enumerate_bases(q, vecs, stack, out);
                stack.pop();
            }
        }
    }
}
