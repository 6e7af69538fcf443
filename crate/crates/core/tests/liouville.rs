use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rbvar::clifford::enumerate_clifford;
use rbvar::liouville::{
    operator_coefficients, operator_from_coefficients, rotation_unitary, ChannelSpec, SpamSetting, Superoperator,
};
use rbvar::pauli::NormalizedPauli;

type CMat = DMatrix<Complex64>;

fn apply_kraus(kraus: &[CMat], rho: &CMat) -> CMat {
    kraus.iter().fold(CMat::zeros(rho.nrows(), rho.ncols()), |acc, k| {
        acc + k * rho * k.adjoint()
    })
}

/// All stabilizer states as density matrices (6 for one qubit, 60 for two).
fn stabilizer_states(q: usize) -> Vec<CMat> {
    let d = 1usize << q;
    let mut zero = CMat::zeros(d, d);
    zero[(0, 0)] = Complex64::new(1.0, 0.0);
    let mut out: Vec<CMat> = Vec::new();
    for g in enumerate_clifford(q).unwrap() {
        let u = g.to_unitary().unwrap();
        let rho = &u * &zero * u.adjoint();
        if !out.iter().any(|s| (s - &rho).norm() < 1e-9) {
            out.push(rho);
        }
    }
    out
}

/// `F_avg` and `u` by exact 2-design quadrature over stabilizer states.
fn quadrature_metrics(kraus: &[CMat]) -> (f64, f64) {
    let d = kraus[0].nrows();
    let q = d.trailing_zeros() as usize;
    let states = stabilizer_states(q);
    let mixed = CMat::identity(d, d) / Complex64::new(d as f64, 0.0);
    let e_mixed = apply_kraus(kraus, &mixed);
    let (mut fid, mut pur) = (0.0, 0.0);
    for psi in &states {
        let out = apply_kraus(kraus, psi);
        fid += (psi * &out).trace().re;
        let shifted = &out - &e_mixed;
        pur += (shifted.adjoint() * &shifted).trace().re;
    }
    let n = states.len() as f64;
    let df = d as f64;
    (fid / n, df / (df - 1.0) * pur / n)
}

fn random_kraus(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> Vec<CMat> {
    let g = CMat::from_fn(d * rank, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let v = g.qr().q();
    (0..rank).map(|k| v.view((k * d, 0), (d, d)).into_owned()).collect()
}

fn amplitude_damping_kraus(gamma: f64) -> Vec<CMat> {
    let z = Complex64::new(0.0, 0.0);
    let r = |x: f64| Complex64::new(x, 0.0);
    vec![
        CMat::from_row_slice(2, 2, &[r(1.0), z, z, r((1.0 - gamma).sqrt())]),
        CMat::from_row_slice(2, 2, &[z, r(gamma.sqrt()), z, z]),
    ]
}

#[test]
fn fidelity_and_unitarity_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for q in 1..=2usize {
        let d = 1usize << q;
        for rank in 1..=3 {
            for _ in 0..4 {
                let kraus = random_kraus(d, rank, &mut rng);
                let e = Superoperator::from_kraus(&kraus).unwrap();
                let met = e.metrics().unwrap();
                let (favg, u) = quadrature_metrics(&kraus);
                let df = d as f64;
                assert_abs_diff_eq!(met.r, 1.0 - favg, epsilon = 1e-10);
                assert_abs_diff_eq!(met.f, (df * favg - 1.0) / (df - 1.0), epsilon = 1e-10);
                assert_abs_diff_eq!(met.u, u, epsilon = 1e-10);
                assert!(met.f * met.f <= met.u + 1e-12 && met.u <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn unitary_channels_have_unit_unitarity() {
    let e = Superoperator::unitary_channel(&rotation_unitary([1.0, 2.0, 3.0], 0.3)).unwrap();
    let met = e.metrics().unwrap();
    assert_abs_diff_eq!(met.u, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(met.nonunitality, 0.0, epsilon = 1e-12);
    // 1 − (|tr U|² + d)/(d(d+1)), |tr U|² = 4cos²(θ/2).
    assert_abs_diff_eq!(met.r, 1.0 - (4.0 * 0.15f64.cos().powi(2) + 2.0) / 6.0, epsilon = 1e-12);
}

#[test]
fn amplitude_damping_against_kraus() {
    let gamma = 0.07;
    let kraus = amplitude_damping_kraus(gamma);
    let from_kraus = Superoperator::from_kraus(&kraus).unwrap();
    let built = Superoperator::amplitude_damping(gamma, 1).unwrap();
    assert!((from_kraus.matrix() - built.matrix()).norm() < 1e-12);
    let met = built.metrics().unwrap();
    let (favg, u) = quadrature_metrics(&kraus);
    assert_abs_diff_eq!(met.r, 1.0 - favg, epsilon = 1e-12);
    assert_abs_diff_eq!(met.u, u, epsilon = 1e-12);
    // ‖E(𝟙/d) − 𝟙/d‖_HS = γ/√2
    assert_abs_diff_eq!(met.nonunitality, gamma / 2f64.sqrt(), epsilon = 1e-12);
    assert!(built.cptp_check().is_cptp());
}

#[test]
fn transfer_matrix_action_matches_kraus_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for q in 1..=2usize {
        let d = 1usize << q;
        let kraus = random_kraus(d, 2, &mut rng);
        let e = Superoperator::from_kraus(&kraus).unwrap();
        let h = CMat::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let a = &h + h.adjoint();
        let direct = apply_kraus(&kraus, &a);
        let via_ptm = operator_from_coefficients(q, &e.apply(&operator_coefficients(&a).unwrap()).unwrap());
        assert!((direct - via_ptm).norm() < 1e-10);
    }
}

#[test]
fn composition_and_tensor_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let k1 = random_kraus(2, 2, &mut rng);
    let k2 = random_kraus(2, 3, &mut rng);
    let e1 = Superoperator::from_kraus(&k1).unwrap();
    let e2 = Superoperator::from_kraus(&k2).unwrap();
    // e2 ∘ e1 has Kraus operators {B A}.
    let composed: Vec<CMat> = k2.iter().flat_map(|b| k1.iter().map(move |a| b * a)).collect();
    let want = Superoperator::from_kraus(&composed).unwrap();
    assert!((e2.compose(&e1).unwrap().matrix() - want.matrix()).norm() < 1e-10);
    // e1 ⊗ e2 has Kraus operators {A ⊗ B}, qubit 0 the left factor.
    let tensored: Vec<CMat> = k1.iter().flat_map(|a| k2.iter().map(move |b| a.kronecker(b))).collect();
    let want = Superoperator::from_kraus(&tensored).unwrap();
    assert!((e1.tensor(&e2).matrix() - want.matrix()).norm() < 1e-10);
}

#[test]
fn adjoint_is_heisenberg_picture() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let kraus = random_kraus(2, 3, &mut rng);
    let e = Superoperator::from_kraus(&kraus).unwrap();
    let x = DVector::from_fn(4, |_, _| rng.gen::<f64>());
    let y = DVector::from_fn(4, |_, _| rng.gen::<f64>());
    let lhs = x.dot(&e.apply(&y).unwrap());
    let rhs = e.adjoint().apply(&x).unwrap().dot(&y);
    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
}

#[test]
fn non_cp_map_is_rejected() {
    // Transposition: Y → −Y.
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0, 1.0]));
    let t = Superoperator::from_matrix(1, m).unwrap();
    let rep = t.cptp_check();
    assert!(!rep.is_cptp());
}

#[test]
fn depolarizing_and_pauli_channels() {
    for q in 1..=3 {
        let e = Superoperator::depolarizing_from_infidelity(0.01, q);
        let met = e.metrics().unwrap();
        assert_abs_diff_eq!(met.r, 0.01, epsilon = 1e-14);
        assert_abs_diff_eq!(met.u, met.f * met.f, epsilon = 1e-14);
    }
    // Bit flip with p: f = 1 − 4p/3, PTM diag (1, 1, 1−2p, 1−2p).
    let p = 0.03;
    let e = Superoperator::pauli_channel(1, &[1.0 - p, p, 0.0, 0.0]).unwrap();
    let diag: Vec<f64> = (0..4).map(|i| e.matrix()[(i, i)]).collect();
    for (a, b) in diag.iter().zip([1.0, 1.0, 1.0 - 2.0 * p, 1.0 - 2.0 * p]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
    }
    assert_abs_diff_eq!(e.metrics().unwrap().f, 1.0 - 4.0 * p / 3.0, epsilon = 1e-14);
}

#[test]
fn channel_specs_from_json() {
    let spec: ChannelSpec = serde_json::from_str(
        r#"{"type":"compose","channels":[{"type":"depolarizing","r":0.001},{"type":"unitary","axis":[0,0,1],"theta":0.05}]}"#,
    )
    .unwrap();
    let e = spec.build(1).unwrap();
    let dep = Superoperator::depolarizing_from_infidelity(0.001, 1);
    let rot = Superoperator::unitary_channel(&rotation_unitary([0.0, 0.0, 1.0], 0.05)).unwrap();
    // "compose" applies the listed channels in order.
    assert!((e.matrix() - rot.compose(&dep).unwrap().matrix()).norm() < 1e-12);

    let bad: Result<ChannelSpec, _> = serde_json::from_str(r#"{"type":"depolarizing","q":0.1}"#);
    assert!(bad.is_err());
    let spec: ChannelSpec = serde_json::from_str(r#"{"type":"depolarizing","f":1.5}"#).unwrap();
    assert!(spec.build(1).is_err());
}

#[test]
fn ideal_spam_overlap_is_one_half() {
    for q in 1..=3 {
        let target = NormalizedPauli::from_index(q, 3).unwrap();
        let s = SpamSetting::ideal(target).unwrap();
        assert_abs_diff_eq!(s.q.dot(&s.nu), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.q.dot(&s.rho), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.q.dot(&s.rho_hat), 0.0, epsilon = 1e-14);
    }
}
