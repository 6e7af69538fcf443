use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbvar::clifford::{enumerate_clifford, sample_clifford_uniform};
use rbvar::liouville::{rotation_unitary, OperatorVec, SpamSetting, Superoperator};
use rbvar::pauli::NormalizedPauli;
use rbvar::twirl::{
    character_norm, character_norm_estimate, exact_mean, exact_variance_twirl_power, expected_block_count,
    extract_irreps, single_copy_twirl, two_copy_twirl_ts, IrrepLabel, TsClass,
};

fn dense_group(q: usize) -> Vec<DMatrix<f64>> {
    enumerate_clifford(q)
        .unwrap()
        .iter()
        .map(|g| Superoperator::from_clifford(g).into_matrix())
        .collect()
}

fn random_spam(q: usize, rng: &mut ChaCha8Rng) -> (OperatorVec, OperatorVec) {
    let target = NormalizedPauli::from_index(q, 3).unwrap();
    let prep = Superoperator::random_weak_noise(q, 0.3, 0.2, rng).unwrap();
    let meas = Superoperator::random_weak_noise(q, 0.3, 0.2, rng).unwrap();
    let s = SpamSetting::with_noise(target, Some(&prep), Some(&meas)).unwrap();
    (s.q, s.nu)
}

#[test]
fn single_copy_twirl_is_depolarizing() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for q in 1..=2 {
        let group = dense_group(q);
        let e = Superoperator::random(q, 2, &mut rng).unwrap();
        let brute = group
            .iter()
            .fold(DMatrix::zeros(e.dim() * e.dim(), e.dim() * e.dim()), |acc, g| {
                acc + g.transpose() * e.matrix() * g
            })
            / group.len() as f64;
        let fast = single_copy_twirl(&e).unwrap();
        assert!((fast.matrix() - &brute).norm() < 1e-10);
        // Unital part: diag(1, f, …, f) plus the averaged non-unital column (zero).
        let f = e.metrics().unwrap().f;
        for i in 1..brute.nrows() {
            assert_abs_diff_eq!(brute[(i, i)], f, epsilon = 1e-10);
        }
    }
}

#[test]
fn two_copy_twirl_matches_dense_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let group = dense_group(1);
    let dec = extract_irreps(1).unwrap();
    let v = dec.basis().isometry();
    for _ in 0..5 {
        let e = Superoperator::random(1, 3, &mut rng).unwrap();
        let ee = e.matrix().kronecker(e.matrix());
        let brute = group.iter().fold(DMatrix::zeros(16, 16), |acc, g| {
            let gg = g.kronecker(g);
            acc + gg.transpose() * &ee * gg
        }) / group.len() as f64;
        let restricted = v.transpose() * brute * &v;
        assert!((two_copy_twirl_ts(&e).unwrap() - restricted).norm() < 1e-12);
    }
}

#[test]
fn projectors_are_orthogonal_and_complete() {
    for q in 1..=2 {
        let dec = extract_irreps(q).unwrap();
        let dim = dec.basis().dim();
        let mut sum = DMatrix::<f64>::zeros(dim, dim);
        for (i, a) in dec.blocks().iter().enumerate() {
            assert!((&a.projector * &a.projector - &a.projector).norm() < 1e-9);
            assert_abs_diff_eq!(a.projector.trace(), a.rank as f64, epsilon = 1e-9);
            for b in &dec.blocks()[i + 1..] {
                assert!((&a.projector * &b.projector).norm() < 1e-9);
            }
            sum += &a.projector;
        }
        assert!((sum - DMatrix::identity(dim, dim)).norm() < 1e-9);
        assert_eq!(Some(dec.blocks().len()), expected_block_count(q));
    }
}

#[test]
fn blocks_commute_with_every_single_qubit_clifford() {
    let dec = extract_irreps(1).unwrap();
    for g in enumerate_clifford(1).unwrap() {
        assert!(dec.commutator_norm(&g).unwrap() < 1e-12);
    }
    let dec = extract_irreps(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        assert!(dec.commutator_norm(&sample_clifford_uniform(2, &mut rng)).unwrap() < 1e-8);
    }
}

#[test]
fn block_labels_and_classes() {
    let one = extract_irreps(1).unwrap();
    let labels: Vec<IrrepLabel> = one.blocks().iter().map(|b| b.label).collect();
    assert!(labels.contains(&IrrepLabel::Tr));
    let two = extract_irreps(2).unwrap();
    let diag_rank: usize = two
        .blocks()
        .iter()
        .filter(|b| b.label.class() == TsClass::Diagonal)
        .map(|b| b.rank)
        .sum();
    assert_eq!(diag_rank, 15);
    assert_eq!(two.block(IrrepLabel::Tr).unwrap().rank, 1);
}

#[test]
fn character_norms() {
    assert_abs_diff_eq!(character_norm(1).unwrap(), 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(character_norm(2).unwrap(), 7.0, epsilon = 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (mean, se) = character_norm_estimate(3, 4000, &mut rng).unwrap();
    assert!((mean - 8.0).abs() < 5.0 * se + 1e-9, "{mean} ± {se}");
}

#[test]
fn projector_sum_equals_twirl_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for q in 1..=2 {
        let dec = extract_irreps(q).unwrap();
        for _ in 0..4 {
            let e = Superoperator::random_weak_noise(q, 0.5, 0.3, &mut rng).unwrap();
            let (qe, nu) = random_spam(q, &mut rng);
            for m in [1u64, 2, 3, 7, 20] {
                let a = dec.exact_variance(&e, &qe, &nu, m).unwrap();
                let b = exact_variance_twirl_power(&e, &qe, &nu, m).unwrap();
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "q={q} m={m}: {a} vs {b}");
            }
        }
    }
}

/// All 11520 single-gate sequences for two qubits.
#[test]
fn two_qubit_brute_force_at_m1() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let group = dense_group(2);
    let dec = extract_irreps(2).unwrap();
    let e = Superoperator::random_weak_noise(2, 0.4, 0.2, &mut rng).unwrap();
    let (qe, nu) = random_spam(2, &mut rng);
    let ks: Vec<f64> = group
        .iter()
        .map(|g| {
            let v = g.transpose() * (e.matrix() * (g * nu.coeffs()));
            qe.coeffs().dot(&v)
        })
        .collect();
    let n = ks.len() as f64;
    let mean = ks.iter().sum::<f64>() / n;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n;
    assert_abs_diff_eq!(mean, exact_mean(&e, &qe, &nu, 1).unwrap(), epsilon = 1e-13);
    assert_abs_diff_eq!(var, dec.exact_variance(&e, &qe, &nu, 1).unwrap(), epsilon = 1e-13);
}

#[test]
fn depolarizing_noise_has_zero_variance() {
    for q in 1..=2 {
        let dec = extract_irreps(q).unwrap();
        let e = Superoperator::depolarizing(0.97, q);
        let s = SpamSetting::ideal(NormalizedPauli::from_index(q, 1).unwrap()).unwrap();
        for m in [1, 10, 100] {
            assert_abs_diff_eq!(dec.exact_variance(&e, &s.q, &s.nu, m).unwrap(), 0.0, epsilon = 1e-14);
        }
    }
}

#[test]
fn haar_limit_is_spam_only() {
    let dec = extract_irreps(1).unwrap();
    let s = SpamSetting::ideal(NormalizedPauli::from_index(1, 3).unwrap()).unwrap();
    let mut limits = Vec::new();
    for (axis, theta) in [([1.0, 1.0, 0.0], 0.9), ([0.3, -0.2, 1.0], 1.3)] {
        let e = Superoperator::unitary_channel(&rotation_unitary(axis, theta)).unwrap();
        limits.push(dec.haar_limit_variance(&e, &s.q, &s.nu).unwrap());
        assert_abs_diff_eq!(
            dec.exact_variance(&e, &s.q, &s.nu, 5000).unwrap(),
            limits[limits.len() - 1],
            epsilon = 1e-10
        );
    }
    assert_abs_diff_eq!(limits[0], limits[1], epsilon = 1e-15);
    // Non-unitary noise is refused.
    assert!(dec
        .haar_limit_variance(&Superoperator::depolarizing(0.9, 1), &s.q, &s.nu)
        .is_err());
}
