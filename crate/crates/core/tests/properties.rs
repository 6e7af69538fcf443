use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbvar::bounds::{second_order_series, variance_bound_spam_derived, variance_bound_spamfree, BoundInputs};
use rbvar::clifford::{sample_clifford_uniform, CliffordElement};
use rbvar::liouville::{SpamSetting, Superoperator};
use rbvar::pauli::{commutes, pauli_product, NormalizedPauli};
use rbvar::planner::{hoeffding_h, sequences_needed};
use rbvar::twirl::{extract_irreps, IrrepDecomposition};

fn single_qubit_blocks() -> &'static IrrepDecomposition {
    static DEC: OnceLock<IrrepDecomposition> = OnceLock::new();
    DEC.get_or_init(|| extract_irreps(1).unwrap())
}

fn pauli(q: usize) -> impl Strategy<Value = NormalizedPauli> {
    (0..4usize.pow(q as u32)).prop_map(move |i| NormalizedPauli::from_index(q, i).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitarity_lies_between_f_squared_and_one(seed in any::<u64>(), q in 1usize..=2, rank in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let met = Superoperator::random(q, rank, &mut rng).unwrap().metrics().unwrap();
        prop_assert!(met.f * met.f <= met.u + 1e-12);
        prop_assert!(met.u <= 1.0 + 1e-12);
        let d = (1u64 << q) as f64;
        prop_assert!(met.r >= -1e-12 && met.r <= (d * d - 1.0) / (d * d) + 1e-12);
    }

    #[test]
    fn depolarizing_composition_multiplies_f(seed in any::<u64>(), p in 0.5f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Superoperator::random_weak_noise(1, 0.3, 0.2, &mut rng).unwrap();
        let composed = e.compose(&Superoperator::depolarizing(p, 1)).unwrap();
        let (a, b) = (e.metrics().unwrap(), composed.metrics().unwrap());
        prop_assert!((b.f - a.f * p).abs() < 1e-12);
        prop_assert!((b.u - a.u * p * p).abs() < 1e-12);
    }

    #[test]
    fn pauli_multiplication_is_associative(a in pauli(2), b in pauli(2), c in pauli(2)) {
        let (p1, ab) = pauli_product(&a, &b).unwrap();
        let (p2, ab_c) = pauli_product(&ab, &c).unwrap();
        let (p3, bc) = pauli_product(&b, &c).unwrap();
        let (p4, a_bc) = pauli_product(&a, &bc).unwrap();
        prop_assert_eq!(ab_c, a_bc);
        prop_assert!((p1 * p2 - p3 * p4).norm() < 1e-12);
        prop_assert_eq!(commutes(&a, &b).unwrap(), commutes(&b, &a).unwrap());
    }

    #[test]
    fn clifford_inverse_and_commutation(seed in any::<u64>(), q in 1usize..=4, a in 0usize..256, b in 0usize..256) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_clifford_uniform(q, &mut rng);
        prop_assert_eq!(CliffordElement::compose(&g, &g.invert()).unwrap(), CliffordElement::identity(q));
        let n = 4usize.pow(q as u32);
        let pa = NormalizedPauli::from_index(q, a % n).unwrap().operator();
        let pb = NormalizedPauli::from_index(q, b % n).unwrap().operator();
        let (ga, gb) = (g.conjugate(&pa).unwrap(), g.conjugate(&pb).unwrap());
        prop_assert_eq!(pa.commutes(&pb).unwrap(), ga.commutes(&gb).unwrap());
    }

    #[test]
    fn series_agrees_with_naive_sum(x in 0.0f64..=1.0, m in 1u64..300) {
        let naive: f64 = (0..m.saturating_sub(1)).map(|j| (j + 1) as f64 * x.powi(j as i32)).sum();
        prop_assert!((second_order_series(x, m) - naive).abs() <= 1e-11 * naive.max(1.0));
    }

    #[test]
    fn sequence_count_is_monotone(v2 in 1e-6f64..0.25, eps in 0.005f64..0.2, grow in 1.0f64..3.0) {
        let n = sequences_needed(0.01, eps, v2).unwrap();
        prop_assert!(sequences_needed(0.01, eps, (v2 * grow).min(0.25)).unwrap() >= n);
        prop_assert!(sequences_needed(0.01, eps / grow, v2).unwrap() >= n);
        prop_assert!(sequences_needed(0.01, eps, 0.25).unwrap() >= n);
        let h = hoeffding_h(v2, eps).unwrap();
        prop_assert!((0.0..1.0).contains(&h));
    }

    #[test]
    fn bounds_are_ordered_and_nonnegative(
        r in 1e-6f64..0.05, lambda in 0.0f64..=1.0, q in 1u32..=6, m in 1u64..5000, eta in 0.0f64..0.1,
    ) {
        let d = 1u64 << q;
        let base = BoundInputs::with_unitarity_mix(r, lambda, d, m, 0.0).unwrap();
        let with_spam = BoundInputs::with_unitarity_mix(r, lambda, d, m, eta).unwrap();
        let free = variance_bound_spamfree(&base);
        prop_assert!(free >= 0.0);
        prop_assert!((variance_bound_spam_derived(&base) - free).abs() <= 1e-15 * free.max(1e-300));
        prop_assert!(variance_bound_spam_derived(&with_spam) >= free);
    }

    #[test]
    fn exact_variance_is_a_variance_of_a_bounded_variable(seed in any::<u64>(), m in 1u64..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec = single_qubit_blocks();
        let e = Superoperator::random(1, 2, &mut rng).unwrap();
        let prep = Superoperator::random_weak_noise(1, 0.4, 0.3, &mut rng).unwrap();
        let s = SpamSetting::with_noise(NormalizedPauli::from_index(1, 3).unwrap(), Some(&prep), None).unwrap();
        let v = dec.exact_variance(&e, &s.q, &s.nu, m).unwrap();
        prop_assert!((-1e-14..=0.25 + 1e-14).contains(&v), "{}", v);
    }

    #[test]
    fn ideal_spam_variance_respects_spamfree_bound(seed in any::<u64>(), m in 1u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec = single_qubit_blocks();
        let e = Superoperator::random_weak_noise(1, 0.05, 0.02, &mut rng).unwrap();
        let met = e.metrics().unwrap();
        let s = SpamSetting::ideal(NormalizedPauli::from_index(1, 3).unwrap()).unwrap();
        let v = dec.exact_variance(&e, &s.q, &s.nu, m).unwrap();
        let inp = BoundInputs::new(met.r, met.u, 2, m, 0.0).unwrap();
        prop_assert!(v <= variance_bound_spamfree(&inp) * (1.0 + 1e-9) + 1e-15);
    }
}
