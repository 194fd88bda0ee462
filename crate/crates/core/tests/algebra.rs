use proptest::prelude::*;
use robustqc::algebra::{
    expm, expm_frechet, hs_norm_sq, iterated_ad, kron, kron_sum, matvec, vec, CMatrix, Pauli, C64,
};
use robustqc::sample;

fn taylor_exp(a: &CMatrix, terms: usize) -> CMatrix {
    let mut out = CMatrix::identity(a.dim());
    let mut term = CMatrix::identity(a.dim());
    for n in 1..terms {
        term = (&term * a).scale_real(1.0 / n as f64);
        out += &term;
    }
    out
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    a.distance(b) / b.frobenius_sq().sqrt().max(1e-300)
}

#[test]
fn expm_matches_taylor_on_skew_hermitian() {
    let mut rng = sample::rng(11);
    for _ in 0..20 {
        let a = sample::hermitian(&mut rng, 4).scale(C64::new(0.0, -0.8));
        assert!(rel(&expm(&a).unwrap(), &taylor_exp(&a, 30)) < 1e-10);
    }
}

#[test]
fn expm_frechet_matches_central_differences() {
    let mut rng = sample::rng(12);
    let h = 1e-6;
    for _ in 0..100 {
        let a = sample::hermitian(&mut rng, 2).scale(C64::new(0.0, -1.0));
        let dir = sample::hermitian(&mut rng, 2).scale(C64::new(0.0, -1.0));
        let (e, l) = expm_frechet(&a, &dir).unwrap();
        assert!(e.max_abs_diff(&expm(&a).unwrap()) < 1e-14);
        let plus = expm(&(&a + &dir.scale_real(h))).unwrap();
        let minus = expm(&(&a - &dir.scale_real(h))).unwrap();
        let fd = (&plus - &minus).scale_real(0.5 / h);
        assert!(rel(&l, &fd) < 1e-5, "{}", rel(&l, &fd));
    }
}

#[test]
fn ad_examples() {
    let z = Pauli::Z.matrix();
    let x = Pauli::X.matrix();
    assert_eq!(iterated_ad(&z, &x, 0).unwrap(), x);
    let want = Pauli::Y.matrix().scale(C64::new(0.0, 2.0));
    assert!(iterated_ad(&z, &x, 1).unwrap().max_abs_diff(&want) < 1e-15);
    assert!(iterated_ad(&z, &x, 2).unwrap().max_abs_diff(&x.scale_real(4.0)) < 1e-15);
}

#[test]
fn vectorized_conjugation() {
    let mut rng = sample::rng(13);
    let u = sample::unitary(&mut rng, 2);
    let e = sample::hermitian(&mut rng, 2);
    let lhs = vec(&(&u * &(&e * &u.adjoint())));
    let rhs = matvec(&kron(&u.conj(), &u), &vec(&e));
    for (a, b) in lhs.iter().zip(&rhs) {
        assert!((a - b).norm() < 1e-14);
    }
}

fn hermitian_strategy(d: usize) -> impl Strategy<Value = CMatrix> {
    any::<u64>().prop_map(move |s| sample::hermitian(&mut sample::rng(s), d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagators_are_unitary(h in hermitian_strategy(3), dt in 0.01f64..2.0) {
        let u = expm(&h.scale(C64::new(0.0, -dt))).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-10);
    }

    #[test]
    fn exp_of_negation_is_inverse(h in hermitian_strategy(3), s in 0.1f64..2.0) {
        let a = h.scale(C64::new(0.3 * s, -s));
        prop_assume!(a.norm1() <= 5.0);
        let p = &expm(&a).unwrap() * &expm(&a.scale_real(-1.0)).unwrap();
        prop_assert!(p.max_abs_diff(&CMatrix::identity(3)) < 1e-10);
    }

    #[test]
    fn kron_sum_exponentiates_to_kron(a in hermitian_strategy(2), b in hermitian_strategy(2)) {
        let a = a.scale(C64::new(0.0, -1.0));
        let b = b.scale(C64::new(0.0, 0.7));
        let lhs = expm(&kron_sum(&a, &b)).unwrap();
        let rhs = kron(&expm(&a).unwrap(), &expm(&b).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn hs_norm_is_unitarily_invariant(a in hermitian_strategy(4), s in any::<u64>()) {
        let u = sample::unitary(&mut sample::rng(s), 4);
        let b = &u * &(&a * &u.adjoint());
        prop_assert!((hs_norm_sq(&b) - hs_norm_sq(&a)).abs() < 1e-12 * hs_norm_sq(&a).max(1.0));
    }
}
