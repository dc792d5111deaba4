use qthreshold_core::models::{build_tfim_anneal, per_qubit_noise, AnnealingProblem};
use qthreshold_core::montecarlo::{empirical_weight, rescaled_mean_amplitude, target_found, Ensemble};
use qthreshold_core::state::{basis_state, sample_measurement};
use qthreshold_core::{
    CoefficientSchedule, HamiltonianSchedule, Pauli, PauliString, Scheme, StateVector,
    TrajectoryConfig,
};
use rand::SeedableRng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::f64::consts::FRAC_1_SQRT_2;

fn idle(n: usize, letter: Pauli, g: f64, t: f64, dt: f64, s0: StateVector) -> TrajectoryConfig {
    let noise = per_qubit_noise(n, letter, &CoefficientSchedule::constant(g, t).unwrap()).unwrap();
    TrajectoryConfig::new(HamiltonianSchedule::zero(n, t).unwrap(), noise, s0, dt, Scheme::StratonovichSplitting, false)
        .unwrap()
}

fn anneal3(g: f64) -> TrajectoryConfig {
    let p = AnnealingProblem::linear(3, vec![(0, 1, -1.0), (1, 2, 0.5)], vec![0.2, -0.3, 0.1], 1.0).unwrap();
    let noise = per_qubit_noise(3, Pauli::Z, &CoefficientSchedule::constant(g, 1.0).unwrap()).unwrap();
    let s0 = StateVector::uniform_superposition(3).unwrap();
    TrajectoryConfig::new(build_tfim_anneal(&p).unwrap(), noise, s0, 1e-2, Scheme::StratonovichSplitting, false).unwrap()
}

/// Pearson statistic of `counts` against `probs`, pooling no cells.
fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    (stat, cells - 1)
}

#[test]
fn measurement_follows_born_rule_on_a_random_state() {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let amps = (0..8).map(|_| num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let s = StateVector::from_amplitudes(3, amps.collect()).unwrap().normalized();
    let mut counts = [0u64; 8];
    for _ in 0..100_000 {
        counts[sample_measurement(&s, &mut rng).unwrap()] += 1;
    }
    let (stat, dof) = chi_square(&counts, &s.probabilities());
    assert!(stat < ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99), "χ² = {stat}");
}

#[test]
fn zero_noise_histogram_matches_reference_probabilities() {
    let e = Ensemble::new(anneal3(0.0), 0).unwrap();
    let stats = e.run(100_000, 77).unwrap();
    let counts: Vec<u64> = (0..8).map(|b| stats.outcome_counts.get(&b).copied().unwrap_or(0)).collect();
    assert_eq!(counts.iter().sum::<u64>(), 100_000);
    let (stat, dof) = chi_square(&counts, &e.reference().probabilities());
    assert!(stat < ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99), "χ² = {stat}");
}

#[test]
fn deterministic_target_is_always_measured() {
    let cfg = idle(2, Pauli::Z, 0.0, 1.0, 1e-2, basis_state(2, 3).unwrap());
    let e = Ensemble::new(cfg, 3).unwrap();
    let (stats, records) = e.run_with_records(0..50, 1).unwrap();
    assert_eq!(stats.outcome_counts.get(&3), Some(&50));
    assert!(target_found(&records, 3));
    assert!(!target_found(&records, 0));
    assert_eq!(empirical_weight(&records), 1.0);
}

#[test]
fn noiseless_superposition_has_exact_mean_amplitude() {
    let cfg = idle(1, Pauli::Z, 0.0, 1.0, 1e-2, StateVector::uniform_superposition(1).unwrap());
    let stats = Ensemble::new(cfg, 0).unwrap().run(37, 5).unwrap();
    let m = stats.mean_target_amplitude();
    assert!((m.re - FRAC_1_SQRT_2).abs() < 1e-15 && m.im == 0.0);
    assert_eq!(stats.real_part().se, 0.0);
}

#[test]
fn statistics_are_independent_of_thread_count() {
    let e = Ensemble::new(anneal3(0.3), 2).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| e.run(3000, 99).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn partial_ensembles_merge_exactly() {
    let e = Ensemble::new(anneal3(0.3), 5).unwrap();
    let full = e.run(1000, 4).unwrap();
    let mut left = e.run_range(0..377, 4).unwrap();
    let right = e.run_range(377..1000, 4).unwrap();
    left.merge(&right).unwrap();
    assert_eq!(left, full);
    let mut swapped = right.clone();
    swapped.merge(&e.run_range(0..377, 4).unwrap()).unwrap();
    assert_eq!(swapped, full);
}

#[test]
fn standard_errors_shrink_as_inverse_square_root() {
    let e = Ensemble::new(anneal3(0.4), 0).unwrap();
    let mut last = e.run(1000, 8).unwrap().aligned().0.se;
    for r in [4000, 16000] {
        let se = e.run(r, 8).unwrap().aligned().0.se;
        assert!((last / se - 2.0).abs() < 0.2, "r = {r}: {last} / {se}");
        last = se;
    }
}

#[test]
fn dephasing_ensemble_matches_closed_forms() {
    let (g, t) = (0.5, 1.0);
    let x = PauliString::single(1, 0, Pauli::X, 1.0).unwrap();
    let e = Ensemble::new(idle(1, Pauli::Z, g, t, 1e-3, StateVector::uniform_superposition(1).unwrap()), 0)
        .unwrap()
        .with_observable(x)
        .unwrap();
    assert!((e.gamma() - 0.125).abs() < 1e-15);
    let stats = e.run(20_000, 2024).unwrap();
    let obs = stats.observable();
    assert!((obs.mean - (-2.0 * g * g * t).exp()).abs() < 3.0 * obs.se);
    let rm = rescaled_mean_amplitude(&stats);
    assert!((rm.value.re - FRAC_1_SQRT_2).abs() < 3.0 * rm.se_re);
    assert!(rm.value.im.abs() < 3.0 * rm.se_im);
}

#[test]
fn bit_flip_weight_matches_closed_form() {
    let (g, t) = (0.6, 1.0);
    let e = Ensemble::new(idle(1, Pauli::X, g, t, 1e-2, basis_state(1, 0).unwrap()), 0).unwrap();
    let (stats, records) = e.run_with_records(0..20_000, 6).unwrap();
    // |C_0|² = cos²(gW)
    let want = 0.5 * (1.0 + (-2.0 * g * g * t).exp());
    let w: Vec<f64> = records.iter().map(|r| r.target_amplitude.norm_sqr()).collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64).sqrt();
    assert!((mean - want).abs() < 3.0 * sd / (w.len() as f64).sqrt());
    assert!((stats.empirical_weight() - mean).abs() < 1e-12);
}

#[test]
fn rescaled_mean_is_unbiased_across_ensembles() {
    let p = AnnealingProblem::linear(2, vec![(0, 1, -1.0)], vec![0.0, 0.0], 2.0).unwrap();
    let noise = per_qubit_noise(2, Pauli::Z, &CoefficientSchedule::constant(0.4, 2.0).unwrap()).unwrap();
    let s0 = StateVector::uniform_superposition(2).unwrap();
    let cfg =
        TrajectoryConfig::new(build_tfim_anneal(&p).unwrap(), noise, s0, 2e-2, Scheme::StratonovichSplitting, false)
            .unwrap();
    let e = Ensemble::new(cfg, 0).unwrap();
    let cm = 1.0 - e.epsilon();
    let mut z: Vec<f64> = (0..100)
        .map(|k| {
            let rm = rescaled_mean_amplitude(&e.run(1000, 1000 + k).unwrap());
            (rm.value.re - cm) / rm.se_re
        })
        .collect();
    z.sort_by(f64::total_cmp);
    let n = Normal::standard();
    let m = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = n.cdf(v);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max);
    // asymptotic two-sided critical value at 99%
    assert!(d < 1.628 / m.sqrt(), "KS D = {d}");
}
