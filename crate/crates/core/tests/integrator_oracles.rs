use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qthreshold_core::dense::dense_operator;
use qthreshold_core::integrators::{
    evolve_mean_state_oracle, evolve_noiseless_reference, evolve_noiseless_splitting,
    generate_brownian_path, pauli_expectation,
};
use qthreshold_core::models::{
    build_piecewise, build_tfim_anneal, per_qubit_noise, AnnealingProblem, PiecewiseProgram, Segment,
};
use qthreshold_core::noise::gamma_integral;
use qthreshold_core::state::basis_state;
use qthreshold_core::{
    evaluate_hamiltonian, CoefficientSchedule, HamiltonianSchedule, NoiseChannel, NoiseSpec, Pauli,
    PauliString, Scheme, StateVector, TrajectoryConfig, TrajectoryRunner,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

fn plus(n: usize) -> StateVector {
    StateVector::uniform_superposition(n).unwrap()
}

fn dephasing(g: f64, t: f64) -> (HamiltonianSchedule, NoiseSpec) {
    let ch = NoiseChannel::new(
        PauliString::single(1, 0, Pauli::Z, 1.0).unwrap(),
        CoefficientSchedule::constant(g, t).unwrap(),
    )
    .unwrap();
    (HamiltonianSchedule::zero(1, t).unwrap(), NoiseSpec::new(1, vec![ch]).unwrap())
}

fn two_qubit_anneal() -> HamiltonianSchedule {
    let p = AnnealingProblem::linear(2, vec![(0, 1, -1.0)], vec![0.0, 0.0], 2.0).unwrap();
    build_tfim_anneal(&p).unwrap()
}

/// `exp(−iHt)|s⟩` from the eigendecomposition of a Hermitian `H`.
fn eig_propagate(h: &DMatrix<C64>, t: f64, s: &StateVector) -> DVector<C64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * DVector::from_column_slice(s.amplitudes());
    let phased = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, &e)| c * C64::new(0.0, -e * t).exp()),
    );
    v * phased
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ip.norm_sqr() / (na * nb)
}

fn random_pauli(rng: &mut ChaCha8Rng, n: usize, coefficient: f64) -> PauliString {
    let letters: Vec<Pauli> =
        (0..n).map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)]).collect();
    PauliString::new(&letters, coefficient).unwrap()
}

#[test]
fn midpoint_solver_matches_eigendecomposition_for_constant_hamiltonians() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(1..=3usize);
        let n_terms = rng.random_range(1..=4usize);
        let terms: Vec<PauliString> =
            (0..n_terms).map(|_| { let c = rng.random_range(-1.5..1.5); random_pauli(&mut rng, n, c) }).collect();
        let h = HamiltonianSchedule::constant(n, terms.clone(), 1.0).unwrap();
        let s0 = plus(n);
        let got = evolve_noiseless_reference(&h, &s0, 1e-4).unwrap();
        let weighted: Vec<(PauliString, f64)> = terms.iter().map(|p| (p.unit(), p.coefficient())).collect();
        let want = eig_propagate(&dense_operator(&weighted, n).unwrap(), 1.0, &s0);
        assert!(1.0 - fidelity(got.amplitudes(), want.as_slice()) < 1e-8);
    }
}

#[test]
fn splitting_and_dense_reference_agree_without_noise() {
    let h = two_qubit_anneal();
    let dense = evolve_noiseless_reference(&h, &plus(2), 1e-3).unwrap();
    let split = evolve_noiseless_splitting(&h, &plus(2), 1e-3).unwrap();
    assert!(1.0 - split.fidelity(&dense).unwrap() < 1e-6);
    let em = TrajectoryConfig::new(h, NoiseSpec::none(2), plus(2), 1e-3, Scheme::ItoEulerMaruyama, false).unwrap();
    let em = TrajectoryRunner::new(em).run(0);
    assert!(1.0 - em.fidelity(&dense).unwrap() < 1e-6);
}

#[test]
fn splitting_reproduces_dephasing_per_path() {
    let (g, t) = (0.5, 1.0);
    let (h, noise) = dephasing(g, t);
    let cfg = TrajectoryConfig::new(h, noise, plus(1), 1e-3, Scheme::StratonovichSplitting, false).unwrap();
    let runner = TrajectoryRunner::new(cfg);
    let x = PauliString::single(1, 0, Pauli::X, 1.0).unwrap();
    for seed in 0..50 {
        let w = generate_brownian_path(seed, 1, t, 1e-3).unwrap().endpoint(0);
        let s = runner.run(seed);
        let want = C64::new(0.0, -g * w).exp() * FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - want).norm() < 1e-11);
        assert!((pauli_expectation(&x, &s).unwrap() - (2.0 * g * w).cos()).abs() < 1e-11);
    }
}

#[test]
fn brownian_increments_have_variance_dt() {
    let dt = 1e-3;
    let path = generate_brownian_path(42, 2, 100.0, dt).unwrap();
    for k in 0..2 {
        let inc = path.channel(k);
        let n = inc.len() as f64;
        let mean = inc.iter().sum::<f64>() / n;
        let var = inc.iter().map(|x| x * x).sum::<f64>() / n;
        assert!(mean.abs() < 5.0 * (dt / n).sqrt());
        assert!((var / dt - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
    }
    // channels are drawn from separate streams
    let (a, b) = (path.channel(0), path.channel(1));
    let corr = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (a.len() as f64 * dt);
    assert!(corr.abs() < 5.0 / (a.len() as f64).sqrt());
}

#[test]
fn runner_replays_a_stored_path() {
    let h = two_qubit_anneal();
    let noise = per_qubit_noise(2, Pauli::Z, &CoefficientSchedule::constant(0.2, 2.0).unwrap()).unwrap();
    let cfg = TrajectoryConfig::new(h, noise, plus(2), 1e-3, Scheme::StratonovichSplitting, false).unwrap();
    let runner = TrajectoryRunner::new(cfg);
    let path = generate_brownian_path(9, 2, 2.0, 1e-3).unwrap();
    assert_eq!(runner.run_on_path(&path).unwrap(), runner.run(9));
}

#[test]
fn rescaled_mean_state_reproduces_noiseless_evolution() {
    let h = two_qubit_anneal();
    let ramp = CoefficientSchedule::piecewise_linear(vec![(0.0, 0.1), (1.0, 0.4), (2.0, 0.2)]).unwrap();
    let cases = [
        per_qubit_noise(2, Pauli::Z, &CoefficientSchedule::constant(0.2, 2.0).unwrap()).unwrap(),
        per_qubit_noise(2, Pauli::X, &ramp).unwrap(),
    ];
    let psi = evolve_noiseless_reference(&h, &plus(2), 1e-3).unwrap();
    for noise in cases {
        let gamma = gamma_integral(&noise, 2.0).unwrap();
        let mean = evolve_mean_state_oracle(&h, &noise, &plus(2), 1e-3).unwrap();
        let err = mean
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(m, p)| (m * gamma.exp() - p).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!((mean.norm() - (-gamma).exp()).abs() < 1e-10);
    }
}

#[test]
fn final_hamiltonian_ground_states_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=10 {
        let mut couplings = Vec::new();
        for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
            if rng.random_bool(0.5) {
                couplings.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        let fields: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = AnnealingProblem::linear(n, couplings, fields, 3.0).unwrap();
        let h = build_tfim_anneal(&p).unwrap();
        let terms = evaluate_hamiltonian(&h, 3.0).unwrap();
        let diag = |b: usize| -> f64 {
            let s = basis_state(n, b).unwrap();
            terms.iter().filter(|(_, w)| *w != 0.0).map(|(q, w)| w * pauli_expectation(q, &s).unwrap()).sum()
        };
        let (emin, ground) = p.brute_force_ground_states();
        let energies: Vec<f64> = (0..1 << n).map(diag).collect();
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min - emin).abs() < 1e-12);
        let from_h: Vec<usize> = (0..1 << n).filter(|&b| energies[b] - min <= 1e-12).collect();
        assert_eq!(from_h, ground);
    }
}

#[test]
fn slow_anneal_finds_the_ferromagnetic_ground_state() {
    let p = AnnealingProblem::linear(3, vec![(0, 1, -1.0), (1, 2, -1.0), (0, 2, -1.0)], vec![-0.5; 3], 50.0)
        .unwrap();
    let h = build_tfim_anneal(&p).unwrap();
    let (_, ground) = p.brute_force_ground_states();
    assert_eq!(ground, vec![0]);
    let psi = evolve_noiseless_reference(&h, &plus(3), 1e-2).unwrap();
    assert!(psi.probabilities()[0] > 0.9);
}

#[test]
fn longer_single_qubit_anneals_track_the_ground_state_better() {
    let mut last = 0.0;
    for t in [1.0, 10.0, 50.0] {
        let p = AnnealingProblem::linear(1, vec![], vec![-1.0], t).unwrap();
        let h = build_tfim_anneal(&p).unwrap();
        let c = evolve_noiseless_reference(&h, &plus(1), 1e-3 * t).unwrap().amplitudes()[0].norm();
        assert!(c > last, "T = {t}: |C_0| = {c} after {last}");
        last = c;
    }
    assert!(last > 0.99);
}

#[test]
fn piecewise_program_matches_product_of_segment_exponentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 2;
    let segments: Vec<Segment> = (0..3)
        .map(|_| Segment {
            duration: [0.25, 0.5, 0.75][rng.random_range(0..3)],
            terms: (0..2).map(|_| { let c = rng.random_range(-1.0..1.0); random_pauli(&mut rng, n, c) }).collect(),
        })
        .collect();
    let program = PiecewiseProgram { n_qubits: n, segments: segments.clone() };
    let h = build_piecewise(&program).unwrap();
    let got = evolve_noiseless_reference(&h, &plus(n), 1e-3).unwrap();
    let mut want = StateVector::uniform_superposition(n).unwrap();
    for seg in &segments {
        let weighted: Vec<(PauliString, f64)> = seg.terms.iter().map(|p| (p.unit(), p.coefficient())).collect();
        let v = eig_propagate(&dense_operator(&weighted, n).unwrap(), seg.duration, &want);
        want = StateVector::from_amplitudes(n, v.iter().copied().collect()).unwrap();
    }
    assert!(got.max_abs_diff(&want).unwrap() < 1e-8);
}

#[test]
fn rabi_pulse_flips_the_qubit() {
    let program = PiecewiseProgram {
        n_qubits: 1,
        segments: vec![Segment { duration: FRAC_PI_2, terms: vec![PauliString::single(1, 0, Pauli::X, 1.0).unwrap()] }],
    };
    let h = build_piecewise(&program).unwrap();
    let s = evolve_noiseless_reference(&h, &basis_state(1, 0).unwrap(), 1e-3).unwrap();
    assert!(s.amplitudes()[0].norm() < 1e-10);
    assert!((s.amplitudes()[1] - C64::new(0.0, -1.0)).norm() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn splitting_preserves_norm_over_many_steps(seed in any::<u64>(), g in 0.0..1.0f64) {
        let p = AnnealingProblem::linear(2, vec![(0, 1, -1.0)], vec![0.3, -0.2], 2.0).unwrap();
        let noise = NoiseSpec::new(2, vec![
            NoiseChannel::new(PauliString::single(2, 0, Pauli::Z, 1.0).unwrap(), CoefficientSchedule::constant(g, 2.0).unwrap()).unwrap(),
            NoiseChannel::new("XY".parse().unwrap(), CoefficientSchedule::linear_ramp(0.0, g, 2.0).unwrap()).unwrap(),
        ]).unwrap();
        let cfg = TrajectoryConfig::new(build_tfim_anneal(&p).unwrap(), noise, plus(2), 2e-4, Scheme::StratonovichSplitting, false).unwrap();
        prop_assert_eq!(cfg.n_steps(), 10_000);
        let s = TrajectoryRunner::new(cfg).run(seed);
        prop_assert!((s.norm() - 1.0).abs() < 1e-9);
    }
}
