use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qthreshold_core::dense::{dense_operator, expm, hermiticity_defect, pauli_matrix};
use qthreshold_core::noise::{verify_local_condition, verify_local_condition_pauli};
use qthreshold_core::pauli::{apply_exp_pauli_rotation, apply_pauli_string};
use qthreshold_core::{Pauli, PauliString, StateVector};

fn letter() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn pauli_string(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PauliString> {
    n.prop_flat_map(|n| prop::collection::vec(letter(), n))
        .prop_map(|ls| PauliString::new(&ls, 1.0).unwrap())
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n).prop_filter_map("zero vector", move |v| {
        let amps: Vec<C64> = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| StateVector::from_amplitudes(n, amps.iter().map(|a| a / norm).collect()).unwrap())
    })
}

fn string_and_state(max_n: usize) -> impl Strategy<Value = (PauliString, StateVector)> {
    (1..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(letter(), n).prop_map(|ls| PauliString::new(&ls, 1.0).unwrap()), state(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pauli_strings_square_to_identity((p, s) in string_and_state(5)) {
        let twice = apply_pauli_string(&p, &apply_pauli_string(&p, &s).unwrap()).unwrap();
        prop_assert!(twice.max_abs_diff(&s).unwrap() < 1e-12);
    }

    #[test]
    fn pauli_action_matches_dense_matrix((p, s) in string_and_state(4)) {
        let m = pauli_matrix(&p).unwrap();
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let dense = m * v;
        let fast = apply_pauli_string(&p, &s).unwrap();
        for (a, b) in fast.amplitudes().iter().zip(dense.iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_matches_dense_exponential((p, s) in string_and_state(3), angle in -4.0..4.0f64) {
        let m = pauli_matrix(&p).unwrap();
        let u = expm(&(m * C64::new(0.0, -angle)));
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let dense = u * v;
        let fast = apply_exp_pauli_rotation(&p, angle, &s).unwrap();
        for (a, b) in fast.amplitudes().iter().zip(dense.iter()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn rotation_preserves_norm((p, s) in string_and_state(5), angle in -10.0..10.0f64) {
        let out = apply_exp_pauli_rotation(&p, angle, &s).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dense_hamiltonians_are_hermitian(
        terms in (1usize..=3).prop_flat_map(|n| prop::collection::vec(
            (prop::collection::vec(letter(), n), -3.0..3.0f64), 1..6))
    ) {
        let n = terms[0].0.len();
        let terms: Vec<(PauliString, f64)> =
            terms.into_iter().map(|(ls, w)| (PauliString::new(&ls, 1.0).unwrap(), w)).collect();
        let m = dense_operator(&terms, n).unwrap();
        prop_assert!(hermiticity_defect(&m) < 1e-12);
    }

    #[test]
    fn pauli_strings_satisfy_local_condition(p in pauli_string(1..=4)) {
        let check = verify_local_condition_pauli(&p, 1e-10).unwrap();
        prop_assert!(check.passed);
        prop_assert!((check.scalar - 1.0).abs() < 1e-12);
        let dense = verify_local_condition(&pauli_matrix(&p).unwrap(), 1e-10);
        prop_assert!(dense.passed);
    }

    #[test]
    fn scaled_strings_square_to_scalar(p in pauli_string(1..=4), c in 0.1..3.0f64) {
        let check = verify_local_condition(&pauli_matrix(&p.with_coefficient(c)).unwrap(), 1e-10);
        prop_assert!(check.passed);
        prop_assert!((check.scalar - c).abs() < 1e-10);
    }
}

#[test]
fn random_non_involutory_operators_are_rejected() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(1..=3usize);
        let d = 1 << n;
        let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = &a + a.adjoint();
        assert!(!verify_local_condition(&h, 1e-10).passed);
    }
}
