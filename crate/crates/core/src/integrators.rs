//! Time steppers for the noiseless, noisy (Stratonovich and Itô) and
//! mean-state equations.
//!
//! The noisy equation is
//! `i d|φ⟩ = (Ĥ(t) dt + Σ_k g_k(t) P_k ∘ dW_k) |φ⟩`. The primary scheme is a
//! unitary splitting: every Hamiltonian term and every noise kick is applied
//! as an exact Pauli rotation, so the norm is preserved to rounding. The
//! Euler–Maruyama stepper integrates the equivalent Itô form, including the
//! `−½ Σ_k g_k² dt` drift, and serves as an independent cross-check.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{check_cap, dense_operator, propagator, DenseMatrix};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSchedule;
use crate::noise::{gamma_between, NoiseSpec};
use crate::pauli::{check_qubits, PauliString};
use crate::rng::stream_rng;
use crate::state::StateVector;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    StratonovichSplitting,
    ItoEulerMaruyama,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::StratonovichSplitting => "stratonovich-splitting",
            Scheme::ItoEulerMaruyama => "ito-euler-maruyama",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stratonovich-splitting" => Ok(Scheme::StratonovichSplitting),
            "ito-euler-maruyama" => Ok(Scheme::ItoEulerMaruyama),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme {other:?} (expected stratonovich-splitting or ito-euler-maruyama)"
            ))),
        }
    }
}

/// Number of steps and the step size, shrunk so that it divides `total_time`.
pub fn step_grid(total_time: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    if !total_time.is_finite() || total_time < 0.0 {
        return Err(Error::InvalidParameter(format!("total time {total_time} must be ≥ 0")));
    }
    if total_time == 0.0 {
        return Ok((0, dt));
    }
    let ratio = total_time / dt;
    let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    } as usize;
    let n = n.max(1);
    Ok((n, total_time / n as f64))
}

/// Brownian increments `ΔW_k ~ Normal(0, dt)` for `K` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    n_steps: usize,
    n_channels: usize,
    /// Channel-major: `increments[k * n_steps + step]`.
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.increments[k * self.n_steps..(k + 1) * self.n_steps]
    }

    /// Increments of all channels at one step.
    pub fn at_step(&self, step: usize) -> Vec<f64> {
        (0..self.n_channels).map(|k| self.increments[k * self.n_steps + step]).collect()
    }

    /// `W_k(T)`.
    pub fn endpoint(&self, k: usize) -> f64 {
        self.channel(k).iter().sum()
    }
}

/// Per-channel normal generators; channel `k` draws from stream `k`.
pub(crate) struct BrownianSource {
    rngs: Vec<ChaCha8Rng>,
    sqrt_dt: f64,
}

impl BrownianSource {
    pub(crate) fn new(seed: u64, n_channels: usize, dt: f64) -> Self {
        Self {
            rngs: (0..n_channels as u64).map(|k| stream_rng(seed, k)).collect(),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub(crate) fn fill(&mut self, out: &mut [f64]) {
        for (rng, w) in self.rngs.iter_mut().zip(out.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            *w = z * self.sqrt_dt;
        }
    }
}

/// Draws the Brownian increments a trajectory with this seed would see.
pub fn generate_brownian_path(
    seed: u64,
    n_channels: usize,
    total_time: f64,
    dt: f64,
) -> Result<BrownianPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    let ratio = total_time / dt;
    if !ratio.is_finite() || ratio < 0.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::NonDivisibleStep { dt, total_time });
    }
    let n_steps = ratio.round() as usize;
    let mut increments = vec![0.0; n_channels * n_steps];
    let mut src = BrownianSource::new(seed, n_channels, dt);
    let mut buf = vec![0.0; n_channels];
    for step in 0..n_steps {
        src.fill(&mut buf);
        for (k, w) in buf.iter().enumerate() {
            increments[k * n_steps + step] = *w;
        }
    }
    Ok(BrownianPath { dt, n_steps, n_channels, increments })
}

/// Everything needed to integrate one noisy trajectory over `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    hamiltonian: HamiltonianSchedule,
    noise: NoiseSpec,
    initial_state: StateVector,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
    renormalize_each_step: bool,
}

impl TrajectoryConfig {
    /// `dt` is shrunk to the nearest value dividing `T`.
    pub fn new(
        hamiltonian: HamiltonianSchedule,
        noise: NoiseSpec,
        initial_state: StateVector,
        dt: f64,
        scheme: Scheme,
        renormalize_each_step: bool,
    ) -> Result<Self> {
        let n = hamiltonian.n_qubits();
        if noise.n_qubits() != n {
            return Err(Error::QubitMismatch { expected: n, found: noise.n_qubits() });
        }
        if initial_state.n_qubits() != n {
            return Err(Error::QubitMismatch { expected: n, found: initial_state.n_qubits() });
        }
        let total = hamiltonian.total_time();
        for ch in noise.channels() {
            let end = ch.strength().total_time();
            if (end - total).abs() > 1e-12 * total.max(1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "noise channel {} schedule ends at {end} but T = {total}",
                    ch.operator()
                )));
            }
        }
        let (n_steps, dt) = step_grid(total, dt)?;
        Ok(Self {
            hamiltonian,
            noise,
            initial_state,
            dt,
            n_steps,
            scheme,
            renormalize_each_step,
        })
    }

    pub fn hamiltonian(&self) -> &HamiltonianSchedule {
        &self.hamiltonian
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn total_time(&self) -> f64 {
        self.hamiltonian.total_time()
    }

    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.n_qubits()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn renormalize_each_step(&self) -> bool {
        self.renormalize_each_step
    }

    /// Same model with a different step size.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let (n_steps, dt) = step_grid(self.total_time(), dt)?;
        Ok(Self { dt, n_steps, ..self.clone() })
    }

    pub fn with_scheme(&self, scheme: Scheme, renormalize_each_step: bool) -> Self {
        Self { scheme, renormalize_each_step, ..self.clone() }
    }

    pub fn with_noise(&self, noise: NoiseSpec) -> Result<Self> {
        Self::new(
            self.hamiltonian.clone(),
            noise,
            self.initial_state.clone(),
            self.dt,
            self.scheme,
            self.renormalize_each_step,
        )
    }
}

fn splitting_in_place(
    amps: &mut [C64],
    terms: &[PauliString],
    term_cs: &[(f64, f64)],
    channels: &[PauliString],
    strengths: &[f64],
    dw: &[f64],
) {
    for (p, &(cos, sin)) in terms.iter().zip(term_cs) {
        if sin != 0.0 {
            p.rotate_in_place_sc(cos, sin, amps);
        }
    }
    for ((p, g), w) in channels.iter().zip(strengths).zip(dw) {
        let angle = g * w;
        if angle != 0.0 {
            p.rotate_in_place(angle, amps);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn euler_maruyama_in_place(
    amps: &mut [C64],
    acc: &mut [C64],
    tmp: &mut [C64],
    terms: &[PauliString],
    weights: &[f64],
    channels: &[PauliString],
    strengths: &[f64],
    dw: &[f64],
    dt: f64,
    renormalize: bool,
) {
    let rate: f64 = strengths.iter().map(|g| g * g).sum();
    let decay = 1.0 - 0.5 * rate * dt;
    for (a, s) in acc.iter_mut().zip(amps.iter()) {
        *a = s * decay;
    }
    let drive = terms.iter().zip(weights).map(|(p, w)| (p, w * dt));
    let kicks = channels.iter().zip(strengths).zip(dw).map(|((p, g), w)| (p, g * w));
    for (p, scale) in drive.chain(kicks) {
        if scale == 0.0 {
            continue;
        }
        p.apply_into(amps, tmp);
        let f = C64::new(0.0, -scale);
        for (a, t) in acc.iter_mut().zip(tmp.iter()) {
            *a += f * t;
        }
    }
    amps.copy_from_slice(acc);
    if renormalize {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            amps.iter_mut().for_each(|a| *a /= n);
        }
    }
}

fn check_step(h: &HamiltonianSchedule, noise: &NoiseSpec, s: &StateVector, t: f64, dt: f64, dw: &[f64]) -> Result<()> {
    if h.n_qubits() != s.n_qubits() {
        return Err(Error::QubitMismatch { expected: h.n_qubits(), found: s.n_qubits() });
    }
    if noise.n_qubits() != s.n_qubits() {
        return Err(Error::QubitMismatch { expected: noise.n_qubits(), found: s.n_qubits() });
    }
    if dw.len() != noise.len() {
        return Err(Error::InvalidParameter(format!(
            "{} Brownian increments for {} channel(s)",
            dw.len(),
            noise.len()
        )));
    }
    let total = h.total_time();
    let slack = 1e-12 * total.max(1.0);
    if !(dt >= 0.0) || t < 0.0 || t + dt > total + slack {
        return Err(Error::TimeOutOfRange { t: t + dt, total_time: total });
    }
    Ok(())
}

fn unit_terms(h: &HamiltonianSchedule) -> Vec<PauliString> {
    h.terms().iter().map(|(p, _)| p.unit()).collect()
}

fn channel_ops(noise: &NoiseSpec) -> Vec<PauliString> {
    noise.channels().iter().map(|c| c.operator().clone()).collect()
}

/// One splitting step from `t` to `t + dt`: ordered exact rotations
/// `exp(−i c_j(t+dt/2) P_j dt)`, then kicks `exp(−i g_k(t+dt/2) ΔW_k P_k)`.
pub fn step_stratonovich_splitting(
    s: &StateVector,
    h: &HamiltonianSchedule,
    noise: &NoiseSpec,
    t: f64,
    dt: f64,
    dw: &[f64],
) -> Result<StateVector> {
    check_step(h, noise, s, t, dt, dw)?;
    let mid = t + 0.5 * dt;
    let mut w = Vec::new();
    h.weights_at(mid, &mut w);
    let cs: Vec<(f64, f64)> = w.iter().map(|x| {
        let (sin, cos) = (x * dt).sin_cos();
        (cos, sin)
    }).collect();
    let g: Vec<f64> = noise.channels().iter().map(|c| c.strength().value_at(mid)).collect();
    let mut out = s.clone();
    splitting_in_place(out.amplitudes_mut(), &unit_terms(h), &cs, &channel_ops(noise), &g, dw);
    Ok(out)
}

/// One Euler–Maruyama step of the Itô equation, coefficients at the left
/// endpoint: `s' = s − iĤs dt − iΣ g_k ΔW_k P_k s − ½Σ g_k² s dt`.
pub fn step_ito_euler_maruyama(
    s: &StateVector,
    h: &HamiltonianSchedule,
    noise: &NoiseSpec,
    t: f64,
    dt: f64,
    dw: &[f64],
    renormalize: bool,
) -> Result<StateVector> {
    check_step(h, noise, s, t, dt, dw)?;
    let mut w = Vec::new();
    h.weights_at(t, &mut w);
    let g: Vec<f64> = noise.channels().iter().map(|c| c.strength().value_at(t)).collect();
    let mut out = s.clone();
    let dim = s.dim();
    let (mut acc, mut tmp) = (vec![C64::default(); dim], vec![C64::default(); dim]);
    euler_maruyama_in_place(
        out.amplitudes_mut(),
        &mut acc,
        &mut tmp,
        &unit_terms(h),
        &w,
        &channel_ops(noise),
        &g,
        dw,
        dt,
        renormalize,
    );
    Ok(out)
}

/// A [`TrajectoryConfig`] with its deterministic per-step coefficients
/// tabulated once, so that many trajectories can share them.
#[derive(Clone, Debug)]
pub struct TrajectoryRunner {
    cfg: TrajectoryConfig,
    terms: Vec<PauliString>,
    channels: Vec<PauliString>,
    /// Splitting: `(cos, sin)` of `c_j dt`; Euler–Maruyama: `(c_j, 0)`. Step-major.
    term_table: Vec<(f64, f64)>,
    /// `g_k` at the evaluation point of each step. Step-major.
    strength_table: Vec<f64>,
}

impl TrajectoryRunner {
    pub fn new(cfg: TrajectoryConfig) -> Self {
        let terms = unit_terms(&cfg.hamiltonian);
        let channels = channel_ops(&cfg.noise);
        let (n, dt) = (cfg.n_steps, cfg.dt);
        let mut term_table = Vec::with_capacity(n * terms.len());
        let mut strength_table = Vec::with_capacity(n * channels.len());
        let mut w = Vec::new();
        for step in 0..n {
            let t = step as f64 * dt;
            let at = match cfg.scheme {
                Scheme::StratonovichSplitting => t + 0.5 * dt,
                Scheme::ItoEulerMaruyama => t,
            };
            cfg.hamiltonian.weights_at(at, &mut w);
            match cfg.scheme {
                Scheme::StratonovichSplitting => term_table.extend(w.iter().map(|x| {
                    let (sin, cos) = (x * dt).sin_cos();
                    (cos, sin)
                })),
                Scheme::ItoEulerMaruyama => term_table.extend(w.iter().map(|&x| (x, 0.0))),
            }
            strength_table.extend(cfg.noise.channels().iter().map(|c| c.strength().value_at(at)));
        }
        Self { cfg, terms, channels, term_table, strength_table }
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.cfg
    }

    /// Integrates one trajectory whose Brownian increments come from `seed`.
    pub fn run(&self, seed: u64) -> StateVector {
        let mut src = BrownianSource::new(seed, self.channels.len(), self.cfg.dt);
        self.run_with(|dw| src.fill(dw))
    }

    /// Integrates along a precomputed Brownian path.
    pub fn run_on_path(&self, path: &BrownianPath) -> Result<StateVector> {
        if path.n_steps() != self.cfg.n_steps || path.n_channels() != self.channels.len() {
            return Err(Error::InvalidParameter(format!(
                "path has {} step(s) × {} channel(s), config needs {} × {}",
                path.n_steps(),
                path.n_channels(),
                self.cfg.n_steps,
                self.channels.len()
            )));
        }
        let mut step = 0;
        Ok(self.run_with(|dw| {
            for (k, w) in dw.iter_mut().enumerate() {
                *w = path.increments[k * path.n_steps + step];
            }
            step += 1;
        }))
    }

    fn run_with(&self, mut next_increments: impl FnMut(&mut [f64])) -> StateVector {
        let mut state = self.cfg.initial_state.clone();
        let (nt, nk, dt) = (self.terms.len(), self.channels.len(), self.cfg.dt);
        let mut dw = vec![0.0; nk];
        let dim = state.dim();
        let (mut acc, mut tmp) = match self.cfg.scheme {
            Scheme::ItoEulerMaruyama => (vec![C64::default(); dim], vec![C64::default(); dim]),
            Scheme::StratonovichSplitting => (Vec::new(), Vec::new()),
        };
        let mut weights = vec![0.0; nt];
        for step in 0..self.cfg.n_steps {
            next_increments(&mut dw);
            let cs = &self.term_table[step * nt..(step + 1) * nt];
            let g = &self.strength_table[step * nk..(step + 1) * nk];
            let amps = state.amplitudes_mut();
            match self.cfg.scheme {
                Scheme::StratonovichSplitting => {
                    splitting_in_place(amps, &self.terms, cs, &self.channels, g, &dw)
                }
                Scheme::ItoEulerMaruyama => {
                    for (w, &(c, _)) in weights.iter_mut().zip(cs) {
                        *w = c;
                    }
                    euler_maruyama_in_place(
                        amps,
                        &mut acc,
                        &mut tmp,
                        &self.terms,
                        &weights,
                        &self.channels,
                        g,
                        &dw,
                        dt,
                        self.cfg.renormalize_each_step,
                    )
                }
            }
        }
        state
    }
}

/// Final state of one trajectory; deterministic in `(cfg, seed)`.
pub fn evolve_trajectory(cfg: &TrajectoryConfig, seed: u64) -> StateVector {
    TrajectoryRunner::new(cfg.clone()).run(seed)
}

/// Steps `s0` with `exp(−i·dt·G(t + dt/2))`, where `generator` builds `G`
/// densely; the propagator is reused while `G` is unchanged.
fn dense_midpoint(
    n_qubits: usize,
    total_time: f64,
    s0: &StateVector,
    dt: f64,
    mut generator: impl FnMut(f64) -> Result<(Vec<f64>, DenseMatrix)>,
) -> Result<StateVector> {
    check_cap(n_qubits)?;
    if s0.n_qubits() != n_qubits {
        return Err(Error::QubitMismatch { expected: n_qubits, found: s0.n_qubits() });
    }
    let (n_steps, dt) = step_grid(total_time, dt)?;
    let mut psi = nalgebra::DVector::from_column_slice(s0.amplitudes());
    let mut cached: Option<(Vec<f64>, DenseMatrix)> = None;
    for step in 0..n_steps {
        let mid = (step as f64 + 0.5) * dt;
        let (key, g) = generator(mid)?;
        let reuse = matches!(&cached, Some((k, _)) if *k == key);
        if !reuse {
            cached = Some((key, propagator(&g, dt)));
        }
        let u = &cached.as_ref().expect("propagator cached").1;
        psi = u * psi;
    }
    StateVector::from_amplitudes(n_qubits, psi.as_slice().to_vec())
}

/// Noiseless reference `ψ(T)` via per-step dense exponentials of the midpoint
/// Hamiltonian. Limited to the dense qubit cap.
pub fn evolve_noiseless_reference(
    h: &HamiltonianSchedule,
    s0: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    let n = h.n_qubits();
    dense_midpoint(n, h.total_time(), s0, dt, |t| {
        let terms = h.evaluate_unchecked(t);
        let key = terms.iter().map(|(_, w)| *w).collect();
        Ok((key, dense_operator(&terms, n)?))
    })
}

/// Noiseless evolution with the splitting stepper, for systems past the dense cap.
pub fn evolve_noiseless_splitting(
    h: &HamiltonianSchedule,
    s0: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    let cfg = TrajectoryConfig::new(
        h.clone(),
        NoiseSpec::none(h.n_qubits()),
        s0.clone(),
        dt,
        Scheme::StratonovichSplitting,
        false,
    )?;
    Ok(evolve_trajectory(&cfg, 0))
}

/// Integrates the ensemble-mean equation
/// `i d/dt E[φ] = (Ĥ(t) − (i/2) Σ_k g_k(t)²) E[φ]` with the same midpoint
/// scheme as [`evolve_noiseless_reference`]. The damping term is a scalar, so
/// each step uses its exact integral over the step rather than the midpoint
/// rate. The result is not normalized; its norm decays as `e^{−Γ}`.
pub fn evolve_mean_state_oracle(
    h: &HamiltonianSchedule,
    noise: &NoiseSpec,
    s0: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    let n = h.n_qubits();
    if noise.n_qubits() != n {
        return Err(Error::QubitMismatch { expected: n, found: noise.n_qubits() });
    }
    let (_, step) = step_grid(h.total_time(), dt)?;
    dense_midpoint(n, h.total_time(), s0, dt, |t| {
        let terms = h.evaluate_unchecked(t);
        let (a, b) = ((t - 0.5 * step).max(0.0), (t + 0.5 * step).min(h.total_time()));
        let rate = 2.0 * gamma_between(noise, a, b)? / step;
        let mut key: Vec<f64> = terms.iter().map(|(_, w)| *w).collect();
        key.push(rate);
        let mut g = dense_operator(&terms, n)?;
        let damping = C64::new(0.0, -0.5 * rate);
        for i in 0..g.nrows() {
            g[(i, i)] += damping;
        }
        Ok((key, g))
    })
}

/// `⟨s|P|s⟩` for a Hermitian Pauli string (real up to rounding).
pub fn pauli_expectation(p: &PauliString, s: &StateVector) -> Result<f64> {
    check_qubits(p, s)?;
    let mut tmp = vec![C64::default(); s.dim()];
    p.apply_into(s.amplitudes(), &mut tmp);
    Ok(s.amplitudes().iter().zip(&tmp).map(|(a, b)| (a.conj() * b).re).sum())
}
