use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbvar::clifford::{enumerate_clifford, sample_clifford_uniform, CliffordElement};
use rbvar::liouville::Superoperator;
use rbvar::pauli::{commutes, pauli_product, NormalizedPauli, PauliOperator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single-qubit Pauli matrices written out by hand.
fn sigma(k: usize) -> DMatrix<Complex64> {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match k {
        0 => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        1 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        3 => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => unreachable!(),
    }
}

/// Dense Pauli for a string such as "XZ" (qubit 0 is the leftmost factor).
fn dense(label: &str) -> DMatrix<Complex64> {
    label.chars().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, ch| {
        let k = "IXYZ".find(ch).unwrap();
        acc.kronecker(&sigma(k))
    })
}

fn labels(q: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    for _ in 0..q {
        out = out
            .iter()
            .flat_map(|p| "IXYZ".chars().map(move |ch| format!("{p}{ch}")))
            .collect();
    }
    out
}

fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn pauli_strings_match_dense_matrices() {
    for q in 1..=3 {
        for l in labels(q) {
            let p: PauliOperator = l.parse().unwrap();
            assert!(close(&p.to_dense(), &dense(&l), 1e-12), "{l}");
        }
    }
}

#[test]
fn products_and_commutation_match_dense_algebra() {
    for q in 1..=2 {
        let d = (1usize << q) as f64;
        for a in labels(q) {
            for b in labels(q) {
                let (pa, pb): (NormalizedPauli, NormalizedPauli) = (a.parse().unwrap(), b.parse().unwrap());
                let (phase, prod) = pauli_product(&pa, &pb).unwrap();
                // Normalized basis elements σ/√d: (σ_a/√d)(σ_b/√d) = phase · σ_c/√d.
                let lhs = dense(&a) * dense(&b) / c(d.sqrt(), 0.0);
                let rhs = prod.to_dense() * phase;
                assert!(close(&lhs, &rhs, 1e-12), "{a}·{b}");
                let da = dense(&a);
                let db = dense(&b);
                let comm = &da * &db - &db * &da;
                assert_eq!(commutes(&pa, &pb).unwrap(), comm.norm() < 1e-12, "{a},{b}");
            }
        }
    }
}

#[test]
fn basis_is_orthonormal_under_hilbert_schmidt() {
    let ps: Vec<NormalizedPauli> = NormalizedPauli::all(2).collect();
    for (i, a) in ps.iter().enumerate() {
        for (j, b) in ps.iter().enumerate() {
            let ip = (a.to_dense().adjoint() * b.to_dense()).trace();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - c(want, 0.0)).norm() < 1e-12);
        }
    }
}

fn bfs_closure(q: usize) -> HashSet<CliffordElement> {
    let gens = CliffordElement::generators(q);
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([CliffordElement::identity(q)]);
    seen.insert(CliffordElement::identity(q));
    while let Some(g) = queue.pop_front() {
        for h in &gens {
            let n = CliffordElement::compose(h, &g).unwrap();
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen
}

#[test]
fn generator_closure_has_the_group_orders() {
    assert_eq!(bfs_closure(1).len(), 24);
    let two = bfs_closure(2);
    assert_eq!(two.len(), 11520);
    let listed: HashSet<CliffordElement> = enumerate_clifford(2).unwrap().into_iter().collect();
    assert_eq!(listed, two);
}

#[test]
fn conjugation_matches_dense_unitaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in 1..=3 {
        for _ in 0..20 {
            let g = sample_clifford_uniform(q, &mut rng);
            let u = g.to_unitary().unwrap();
            assert!(close(&(u.adjoint() * &u), &DMatrix::identity(1 << q, 1 << q), 1e-10));
            for l in labels(q) {
                let p: PauliOperator = l.parse().unwrap();
                let img = g.conjugate(&p).unwrap();
                assert!(close(&(&u * dense(&l) * u.adjoint()), &img.to_dense(), 1e-10), "{l}");
            }
        }
    }
}

#[test]
fn signed_permutation_equals_dense_transfer_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for q in 1..=2 {
        for _ in 0..10 {
            let g = sample_clifford_uniform(q, &mut rng);
            let from_unitary = Superoperator::unitary_channel(&g.to_unitary().unwrap()).unwrap();
            let diff = (g.to_signed_permutation().to_dense() - from_unitary.matrix()).norm();
            assert!(diff < 1e-10, "{diff}");
        }
    }
}

#[test]
fn inverse_and_composition_are_group_operations() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for q in 1..=4 {
        for _ in 0..20 {
            let a = sample_clifford_uniform(q, &mut rng);
            let b = sample_clifford_uniform(q, &mut rng);
            assert_eq!(
                CliffordElement::compose(&a, &a.invert()).unwrap(),
                CliffordElement::identity(q)
            );
            let ab = CliffordElement::compose(&a, &b).unwrap();
            let dense_ab = a.to_signed_permutation().to_dense() * b.to_signed_permutation().to_dense();
            assert!((ab.to_signed_permutation().to_dense() - dense_ab).norm() < 1e-12);
        }
    }
}

/// Pearson χ² against the uniform distribution on the 24 single-qubit
/// Cliffords; 23 degrees of freedom, 99.9% quantile ≈ 49.7.
#[test]
fn single_qubit_sampler_is_uniform() {
    let group = enumerate_clifford(1).unwrap();
    let index: HashMap<CliffordElement, usize> = group.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let draws = 48_000;
    let mut counts = [0usize; 24];
    for _ in 0..draws {
        counts[index[&sample_clifford_uniform(1, &mut rng)]] += 1;
    }
    let expected = draws as f64 / 24.0;
    let chi2: f64 = counts.iter().map(|&k| (k as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 49.7, "χ² = {chi2}");
}

/// Two-qubit uniformity checked through the symplectic/sign marginals: each
/// image of X_0 (15 non-identity Paulis × 2 signs) must be equally likely.
#[test]
fn two_qubit_sampler_marginal_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let draws = 60_000;
    let mut counts: HashMap<(usize, bool), usize> = HashMap::new();
    for _ in 0..draws {
        let g = sample_clifford_uniform(2, &mut rng);
        let img = g.images()[0];
        *counts
            .entry((img.basis_index(), img.hermitian_sign() == Some(-1)))
            .or_default() += 1;
    }
    assert_eq!(counts.len(), 30);
    let expected = draws as f64 / 30.0;
    let chi2: f64 = counts.values().map(|&k| (k as f64 - expected).powi(2) / expected).sum();
    // 29 degrees of freedom, 99.9% quantile ≈ 58.3.
    assert!(chi2 < 58.3, "χ² = {chi2}");
}
