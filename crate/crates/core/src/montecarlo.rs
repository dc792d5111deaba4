//! Trajectory ensembles and the statistics of the target amplitude.
//!
//! Each trajectory `i` gets the seed `derive_seed(root, i)`, integrates the
//! noisy equation, records `C_{i,m}` and is measured once. Sums are kept in
//! fixed point so that partial results merge exactly: any split of the index
//! range, any worker count and any merge order give bit-identical statistics.

use std::collections::BTreeMap;
use std::ops::Range;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{
    evolve_noiseless_reference, evolve_noiseless_splitting, pauli_expectation, Scheme,
    TrajectoryConfig, TrajectoryRunner,
};
use crate::dense::DENSE_QUBIT_CAP;
use crate::noise::gamma_integral;
use crate::pauli::PauliString;
use crate::rng::{derive_seed, stream_rng, MEASUREMENT_STREAM};
use crate::state::{amplitude, sample_measurement, StateVector};

/// Fixed-point sum with resolution `2^-80`; addition is associative.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactSum(i128);

const FIXED_SCALE: f64 = (1u128 << 80) as f64;

impl ExactSum {
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite());
        self.0 = self.0.checked_add((x * FIXED_SCALE) as i128).expect("fixed-point sum overflow");
    }

    pub fn merge(&mut self, other: ExactSum) {
        self.0 = self.0.checked_add(other.0).expect("fixed-point sum overflow");
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }
}

/// One measured trajectory.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub trajectory_index: u64,
    pub measurement_outcome: usize,
    /// `C_{i,m}`, before phase alignment or rescaling.
    pub target_amplitude: C64,
    pub final_norm: f64,
    /// `⟨φ_i|O|φ_i⟩ / ‖φ_i‖²` when an observable is attached.
    pub observable: Option<f64>,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    re: ExactSum,
    im: ExactSum,
    re2: ExactSum,
    im2: ExactSum,
    re_im: ExactSum,
    weight: ExactSum,
    norm_dev: ExactSum,
    norm_dev2: ExactSum,
    obs: ExactSum,
    obs2: ExactSum,
    /// Largest `|‖φ_i‖ − 1|`.
    norm_dev_max: f64,
}

impl Moments {
    fn push(&mut self, rec: &TrajectoryRecord) {
        let c = rec.target_amplitude;
        self.re.add(c.re);
        self.im.add(c.im);
        self.re2.add(c.re * c.re);
        self.im2.add(c.im * c.im);
        self.re_im.add(c.re * c.im);
        self.weight.add(c.norm_sqr());
        let d = rec.final_norm - 1.0;
        self.norm_dev.add(d);
        self.norm_dev2.add(d * d);
        self.norm_dev_max = self.norm_dev_max.max(d.abs());
        if let Some(o) = rec.observable {
            self.obs.add(o);
            self.obs2.add(o * o);
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.norm_dev_max = self.norm_dev_max.max(o.norm_dev_max);
        for (a, b) in [
            (&mut self.re, o.re),
            (&mut self.im, o.im),
            (&mut self.re2, o.re2),
            (&mut self.im2, o.im2),
            (&mut self.re_im, o.re_im),
            (&mut self.weight, o.weight),
            (&mut self.norm_dev, o.norm_dev),
            (&mut self.norm_dev2, o.norm_dev2),
            (&mut self.obs, o.obs),
            (&mut self.obs2, o.obs2),
        ] {
            a.merge(b);
        }
    }
}

/// Mean and standard error of a scalar sample.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

fn estimate(sum: ExactSum, sum_sq: ExactSum, r: u64) -> Estimate {
    if r == 0 {
        return Estimate { mean: 0.0, se: 0.0 };
    }
    let n = r as f64;
    let mean = sum.value() / n;
    let se = if r > 1 {
        let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Estimate { mean, se }
}

/// Statistics of an ensemble of measured trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatistics {
    pub r: u64,
    pub target_index: usize,
    pub outcome_counts: BTreeMap<usize, u64>,
    /// Γ used for rescaling.
    pub gamma: f64,
    /// Unit phase `u = conj(C_m)/|C_m|` making the noiseless target amplitude real positive.
    pub phase_factor: C64,
    moments: Moments,
}

impl EnsembleStatistics {
    pub fn empty(target_index: usize, gamma: f64, phase_factor: C64) -> Self {
        Self {
            r: 0,
            target_index,
            outcome_counts: BTreeMap::new(),
            gamma,
            phase_factor,
            moments: Moments::default(),
        }
    }

    pub fn push(&mut self, rec: &TrajectoryRecord) {
        self.r += 1;
        *self.outcome_counts.entry(rec.measurement_outcome).or_insert(0) += 1;
        self.moments.push(rec);
    }

    /// Combines statistics over disjoint trajectory sets.
    pub fn merge(&mut self, other: &EnsembleStatistics) -> Result<()> {
        if self.target_index != other.target_index
            || self.gamma.to_bits() != other.gamma.to_bits()
            || self.phase_factor != other.phase_factor
        {
            return Err(Error::InvalidParameter(
                "cannot merge statistics of different experiments".into(),
            ));
        }
        self.r += other.r;
        for (k, v) in &other.outcome_counts {
            *self.outcome_counts.entry(*k).or_insert(0) += v;
        }
        self.moments.merge(&other.moments);
        Ok(())
    }

    /// `(1/r) Σ_i C_{i,m}`, unaligned and unscaled.
    pub fn mean_target_amplitude(&self) -> C64 {
        C64::new(self.real_part().mean, self.imag_part().mean)
    }

    pub fn real_part(&self) -> Estimate {
        estimate(self.moments.re, self.moments.re2, self.r)
    }

    pub fn imag_part(&self) -> Estimate {
        estimate(self.moments.im, self.moments.im2, self.r)
    }

    /// Mean and standard errors of `u·C_{i,m}` (real, imaginary).
    pub fn aligned(&self) -> (Estimate, Estimate) {
        let (re, im) = (self.real_part(), self.imag_part());
        let (a, b) = (self.phase_factor.re, self.phase_factor.im);
        let mean = self.phase_factor * C64::new(re.mean, im.mean);
        if self.r < 2 {
            return (Estimate { mean: mean.re, se: 0.0 }, Estimate { mean: mean.im, se: 0.0 });
        }
        let n = self.r as f64;
        let cov = (self.moments.re_im.value() - n * re.mean * im.mean) / (n - 1.0);
        let (vre, vim) = (re.se * re.se * n, im.se * im.se * n);
        let var_re = (a * a * vre + b * b * vim - 2.0 * a * b * cov).max(0.0);
        let var_im = (b * b * vre + a * a * vim + 2.0 * a * b * cov).max(0.0);
        (
            Estimate { mean: mean.re, se: (var_re / n).sqrt() },
            Estimate { mean: mean.im, se: (var_im / n).sqrt() },
        )
    }

    /// `(1/r) Σ_i |C_{i,m}|²`.
    pub fn empirical_weight(&self) -> f64 {
        if self.r == 0 {
            0.0
        } else {
            self.moments.weight.value() / self.r as f64
        }
    }

    /// Mean and SE of `‖φ_i(T)‖ − 1`.
    pub fn norm_deviation(&self) -> Estimate {
        estimate(self.moments.norm_dev, self.moments.norm_dev2, self.r)
    }

    /// Largest `|‖φ_i(T)‖ − 1|` over the ensemble.
    pub fn max_norm_deviation(&self) -> f64 {
        self.moments.norm_dev_max
    }

    /// Mean and SE of the attached observable, if any trajectory carried one.
    pub fn observable(&self) -> Estimate {
        estimate(self.moments.obs, self.moments.obs2, self.r)
    }

    pub fn target_count(&self) -> u64 {
        self.outcome_counts.get(&self.target_index).copied().unwrap_or(0)
    }

    pub fn target_found(&self) -> bool {
        self.target_count() > 0
    }
}

/// `u·e^{Γ}·(1/r)ΣC_{i,m}` with standard errors scaled by `e^{Γ}`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledMean {
    pub value: C64,
    pub se_re: f64,
    pub se_im: f64,
}

pub fn rescaled_mean_amplitude(stats: &EnsembleStatistics) -> RescaledMean {
    let (re, im) = stats.aligned();
    let f = stats.gamma.exp();
    RescaledMean { value: C64::new(re.mean * f, im.mean * f), se_re: re.se * f, se_im: im.se * f }
}

/// Whether any trajectory was measured in `target_index`.
pub fn target_found(records: &[TrajectoryRecord], target_index: usize) -> bool {
    records.iter().any(|r| r.measurement_outcome == target_index)
}

/// `(1/r) Σ_i |C_{i,m}|²` over the records.
pub fn empirical_weight(records: &[TrajectoryRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.target_amplitude.norm_sqr()).sum::<f64>() / records.len() as f64
}

/// A trajectory model prepared for repeated sampling against one target.
#[derive(Clone, Debug)]
pub struct Ensemble {
    runner: TrajectoryRunner,
    target_index: usize,
    reference: StateVector,
    phase_factor: C64,
    gamma: f64,
    observable: Option<PauliString>,
}

impl Ensemble {
    /// Solves the noiseless reference (dense up to the cap, splitting beyond)
    /// to fix `C_m`, the phase convention and Γ.
    pub fn new(cfg: TrajectoryConfig, target_index: usize) -> Result<Self> {
        let h = cfg.hamiltonian();
        let reference = if cfg.n_qubits() <= DENSE_QUBIT_CAP {
            evolve_noiseless_reference(h, cfg.initial_state(), cfg.dt())?
        } else {
            evolve_noiseless_splitting(h, cfg.initial_state(), cfg.dt())?
        };
        let cm = amplitude(&reference, target_index)?;
        let phase_factor = if cm.norm() > 0.0 { cm.conj() / cm.norm() } else { C64::new(1.0, 0.0) };
        let gamma = gamma_integral(cfg.noise(), cfg.total_time())?;
        Ok(Self { runner: TrajectoryRunner::new(cfg), target_index, reference, phase_factor, gamma, observable: None })
    }

    /// Records `⟨O⟩` per trajectory.
    pub fn with_observable(mut self, observable: PauliString) -> Result<Self> {
        if observable.n_qubits() != self.config().n_qubits() {
            return Err(Error::QubitMismatch {
                expected: self.config().n_qubits(),
                found: observable.n_qubits(),
            });
        }
        self.observable = Some(observable);
        Ok(self)
    }

    pub fn config(&self) -> &TrajectoryConfig {
        self.runner.config()
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Noiseless final state `ψ(T)`.
    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    /// `C_m` of the noiseless reference.
    pub fn reference_amplitude(&self) -> C64 {
        self.reference.amplitudes()[self.target_index]
    }

    /// `ε = 1 − |C_m|`.
    pub fn epsilon(&self) -> f64 {
        1.0 - self.reference_amplitude().norm()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phase_factor(&self) -> C64 {
        self.phase_factor
    }

    pub fn empty_statistics(&self) -> EnsembleStatistics {
        EnsembleStatistics::empty(self.target_index, self.gamma, self.phase_factor)
    }

    /// Integrates and measures trajectory `index` under `root_seed`.
    pub fn trajectory(&self, root_seed: u64, index: u64) -> Result<TrajectoryRecord> {
        let seed = derive_seed(root_seed, index);
        let state = self.runner.run(seed);
        let final_norm = state.norm();
        let cfg = self.config();
        // Euler–Maruyama without renormalization drifts in norm by design;
        // the Born rule is applied to the normalized state in that case only.
        let drifting = cfg.scheme() == Scheme::ItoEulerMaruyama && !cfg.renormalize_each_step();
        if !final_norm.is_finite() || final_norm == 0.0 {
            return Err(Error::NormCorrupted { norm: final_norm, tolerance: 0.0 });
        }
        let mut rng = stream_rng(seed, MEASUREMENT_STREAM);
        let measurement_outcome = if drifting {
            sample_measurement(&state.normalized(), &mut rng)?
        } else {
            sample_measurement(&state, &mut rng)?
        };
        let observable = match &self.observable {
            Some(p) => Some(pauli_expectation(p, &state)? / (final_norm * final_norm)),
            None => None,
        };
        Ok(TrajectoryRecord {
            trajectory_index: index,
            measurement_outcome,
            target_amplitude: state.amplitudes()[self.target_index],
            final_norm,
            observable,
        })
    }

    /// Statistics of trajectories `0..r`.
    pub fn run(&self, r: u64, root_seed: u64) -> Result<EnsembleStatistics> {
        if r == 0 {
            return Err(Error::InvalidParameter("ensemble size r must be ≥ 1".into()));
        }
        self.run_range(0..r, root_seed)
    }

    /// Statistics of trajectories with indices in `range`.
    pub fn run_range(&self, range: Range<u64>, root_seed: u64) -> Result<EnsembleStatistics> {
        range
            .into_par_iter()
            .map(|i| self.trajectory(root_seed, i))
            .try_fold(
                || self.empty_statistics(),
                |mut acc, rec| {
                    acc.push(&rec?);
                    Ok(acc)
                },
            )
            .try_reduce(
                || self.empty_statistics(),
                |mut a, b| {
                    a.merge(&b)?;
                    Ok(a)
                },
            )
    }

    /// As [`Self::run_range`], also returning every record in index order.
    pub fn run_with_records(
        &self,
        range: Range<u64>,
        root_seed: u64,
    ) -> Result<(EnsembleStatistics, Vec<TrajectoryRecord>)> {
        let records = range
            .into_par_iter()
            .map(|i| self.trajectory(root_seed, i))
            .collect::<Result<Vec<_>>>()?;
        let mut stats = self.empty_statistics();
        for rec in &records {
            stats.push(rec);
        }
        Ok((stats, records))
    }

    /// Index (1-based count) of the first trajectory measured in the target,
    /// scanning `0..limit` in order; `None` if it never appears.
    pub fn first_hit(&self, root_seed: u64, limit: u64) -> Result<Option<u64>> {
        for i in 0..limit {
            if self.trajectory(root_seed, i)?.measurement_outcome == self.target_index {
                return Ok(Some(i + 1));
            }
        }
        Ok(None)
    }
}

/// Runs `r` trajectories of `cfg` and measures each once.
pub fn run_ensemble(
    cfg: &TrajectoryConfig,
    target_index: usize,
    r: u64,
    root_seed: u64,
) -> Result<EnsembleStatistics> {
    Ensemble::new(cfg.clone(), target_index)?.run(r, root_seed)
}
