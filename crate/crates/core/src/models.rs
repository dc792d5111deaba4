//! Builders for annealing and piecewise-constant (circuit / QAOA style) models.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSchedule;
use crate::noise::{NoiseChannel, NoiseSpec};
use crate::pauli::{Pauli, PauliString};
use crate::schedule::CoefficientSchedule;

/// Transverse-field Ising annealing problem
/// `Ĥ(t) = −A(t) Σ_i X_i + B(t) (Σ_{ij} J_ij Z_i Z_j + Σ_i h_i Z_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnealingProblem {
    pub n_qubits: usize,
    pub couplings: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub total_time: f64,
    /// Driver amplitude, decreasing to 0 at `T`.
    pub driver: CoefficientSchedule,
    /// Problem amplitude, increasing from 0 at `t = 0`.
    pub problem: CoefficientSchedule,
}

impl AnnealingProblem {
    /// `A(t) = 1 − t/T`, `B(t) = t/T`.
    pub fn linear(
        n_qubits: usize,
        couplings: Vec<(usize, usize, f64)>,
        fields: Vec<f64>,
        total_time: f64,
    ) -> Result<Self> {
        let p = Self {
            n_qubits,
            couplings,
            fields,
            total_time,
            driver: CoefficientSchedule::linear_ramp(1.0, 0.0, total_time)?,
            problem: CoefficientSchedule::linear_ramp(0.0, 1.0, total_time)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if n == 0 {
            return Err(Error::InvalidParameter("annealing problem has no qubits".into()));
        }
        if self.fields.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} field(s) given for {n} qubit(s)",
                self.fields.len()
            )));
        }
        for &(i, j, _) in &self.couplings {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidParameter(format!("invalid coupling edge ({i}, {j})")));
            }
        }
        if !(self.total_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "anneal time {} must be positive",
                self.total_time
            )));
        }
        let t = self.total_time;
        let (a0, a_t) = (self.driver.evaluate(0.0)?, self.driver.evaluate(t)?);
        let (b0, b_t) = (self.problem.evaluate(0.0)?, self.problem.evaluate(t)?);
        if !(a0 > 0.0 && a_t == 0.0 && b0 == 0.0 && b_t > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "need A(0) > 0, A(T) = 0, B(0) = 0, B(T) > 0; got A = ({a0}, {a_t}), B = ({b0}, {b_t})"
            )));
        }
        Ok(())
    }

    /// `Σ J_ij z_i z_j + Σ h_i z_i` with `z_k = +1` for bit 0 and `−1` for bit 1.
    pub fn ising_energy(&self, basis_index: usize) -> f64 {
        let z = |k: usize| if (basis_index >> k) & 1 == 0 { 1.0 } else { -1.0 };
        let pair: f64 = self.couplings.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum();
        let field: f64 = self.fields.iter().enumerate().map(|(k, h)| h * z(k)).sum();
        pair + field
    }

    /// Minimum classical energy and every basis index attaining it, by enumeration.
    pub fn brute_force_ground_states(&self) -> (f64, Vec<usize>) {
        let dim = 1usize << self.n_qubits;
        let energies: Vec<f64> = (0..dim).map(|b| self.ising_energy(b)).collect();
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * min.abs().max(1.0);
        let ground = (0..dim).filter(|&b| energies[b] - min <= tol).collect();
        (min, ground)
    }
}

pub fn build_tfim_anneal(problem: &AnnealingProblem) -> Result<HamiltonianSchedule> {
    problem.validate()?;
    let n = problem.n_qubits;
    let mut terms = Vec::new();
    for k in 0..n {
        terms.push((PauliString::single(n, k, Pauli::X, -1.0)?, problem.driver.clone()));
    }
    for &(i, j, c) in &problem.couplings {
        if c != 0.0 {
            let mut letters = vec![Pauli::I; n];
            letters[i] = Pauli::Z;
            letters[j] = Pauli::Z;
            terms.push((PauliString::new(&letters, c)?, problem.problem.clone()));
        }
    }
    for (k, &h) in problem.fields.iter().enumerate() {
        if h != 0.0 {
            terms.push((PauliString::single(n, k, Pauli::Z, h)?, problem.problem.clone()));
        }
    }
    HamiltonianSchedule::new(n, terms, problem.total_time)
}

/// A constant Hamiltonian `Σ_j c_j P_j` held for `duration`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub terms: Vec<PauliString>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseProgram {
    pub n_qubits: usize,
    pub segments: Vec<Segment>,
}

impl PiecewiseProgram {
    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Alternating cost / transverse-mixer segments with durations
    /// `γ_1, β_1, γ_2, β_2, ...`.
    pub fn qaoa(n_qubits: usize, cost: Vec<PauliString>, gammas: &[f64], betas: &[f64]) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cost angle(s) but {} mixer angle(s)",
                gammas.len(),
                betas.len()
            )));
        }
        let mixer = (0..n_qubits)
            .map(|k| PauliString::single(n_qubits, k, Pauli::X, 1.0))
            .collect::<Result<Vec<_>>>()?;
        let mut segments = Vec::with_capacity(2 * gammas.len());
        for (&g, &b) in gammas.iter().zip(betas) {
            segments.push(Segment { duration: g, terms: cost.clone() });
            segments.push(Segment { duration: b, terms: mixer.clone() });
        }
        Ok(Self { n_qubits, segments })
    }
}

/// Piecewise-constant schedule: one term per distinct Pauli string (first
/// appearance order), holding the summed coefficient within each segment.
pub fn build_piecewise(program: &PiecewiseProgram) -> Result<HamiltonianSchedule> {
    let n = program.n_qubits;
    if program.segments.is_empty() {
        return Err(Error::InvalidParameter("piecewise program has no segments".into()));
    }
    for (i, s) in program.segments.iter().enumerate() {
        if !(s.duration > 0.0) || !s.duration.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "segment {i} has non-positive duration {}",
                s.duration
            )));
        }
        if let Some(p) = s.terms.iter().find(|p| p.n_qubits() != n) {
            return Err(Error::QubitMismatch { expected: n, found: p.n_qubits() });
        }
    }
    let mut strings: Vec<PauliString> = Vec::new();
    for s in &program.segments {
        for p in &s.terms {
            let u = p.unit();
            if !strings.contains(&u) {
                strings.push(u);
            }
        }
    }
    let mut starts = Vec::with_capacity(program.segments.len() + 1);
    let mut t = 0.0;
    for s in &program.segments {
        starts.push(t);
        t += s.duration;
    }
    let total = t;
    let mut terms = Vec::with_capacity(strings.len());
    for u in strings {
        let mut knots: Vec<(f64, f64)> = program
            .segments
            .iter()
            .zip(&starts)
            .map(|(s, &t0)| {
                let c: f64 = s.terms.iter().filter(|p| p.unit() == u).map(|p| p.coefficient()).sum();
                (t0, c)
            })
            .collect();
        let last = knots[knots.len() - 1].1;
        knots.push((total, last));
        terms.push((u, CoefficientSchedule::piecewise_constant(knots)?));
    }
    HamiltonianSchedule::new(n, terms, total)
}

/// One channel per qubit: `letter` on qubit `k` with strength `g`.
pub fn per_qubit_noise(n_qubits: usize, letter: Pauli, g: &CoefficientSchedule) -> Result<NoiseSpec> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("noise needs at least one qubit".into()));
    }
    if letter == Pauli::I {
        return Err(Error::InvalidParameter("identity noise channel has no effect on states; use X, Y or Z".into()));
    }
    let channels = (0..n_qubits)
        .map(|k| NoiseChannel::new(PauliString::single(n_qubits, k, letter, 1.0)?, g.clone()))
        .collect::<Result<Vec<_>>>()?;
    NoiseSpec::new(n_qubits, channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::gamma_integral;

    #[test]
    fn anneal_endpoints() {
        let p = AnnealingProblem::linear(2, vec![(0, 1, -1.0)], vec![0.0, 0.0], 2.0).unwrap();
        let h = build_tfim_anneal(&p).unwrap();
        let at0 = h.evaluate(0.0).unwrap();
        let nonzero: Vec<String> =
            at0.iter().filter(|(_, w)| *w != 0.0).map(|(p, _)| p.to_string()).collect();
        assert_eq!(nonzero, vec!["XI", "IX"]);
        let at_t = h.evaluate(2.0).unwrap();
        let nonzero: Vec<String> =
            at_t.iter().filter(|(_, w)| *w != 0.0).map(|(p, _)| p.to_string()).collect();
        assert_eq!(nonzero, vec!["ZZ"]);
    }

    #[test]
    fn empty_problem_part_vanishes_at_end() {
        let p = AnnealingProblem::linear(3, vec![], vec![0.0; 3], 1.0).unwrap();
        let h = build_tfim_anneal(&p).unwrap();
        assert!(h.evaluate(1.0).unwrap().iter().all(|(_, w)| *w == 0.0));
    }

    #[test]
    fn anneal_validation() {
        assert!(AnnealingProblem::linear(0, vec![], vec![], 1.0).is_err());
        assert!(AnnealingProblem::linear(2, vec![(0, 0, 1.0)], vec![0.0; 2], 1.0).is_err());
        assert!(AnnealingProblem::linear(2, vec![(0, 2, 1.0)], vec![0.0; 2], 1.0).is_err());
        assert!(AnnealingProblem::linear(2, vec![], vec![0.0], 1.0).is_err());
        let mut p = AnnealingProblem::linear(1, vec![], vec![1.0], 1.0).unwrap();
        p.driver = CoefficientSchedule::constant(1.0, 1.0).unwrap();
        assert!(build_tfim_anneal(&p).is_err());
    }

    #[test]
    fn ising_energy_convention() {
        let p = AnnealingProblem::linear(2, vec![(0, 1, -1.0)], vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(p.ising_energy(0), -1.0);
        assert_eq!(p.ising_energy(1), 1.0);
        assert_eq!(p.brute_force_ground_states(), (-1.0, vec![0, 3]));
        let q = AnnealingProblem::linear(1, vec![], vec![-1.0], 1.0).unwrap();
        assert_eq!(q.brute_force_ground_states(), (-1.0, vec![0]));
    }

    #[test]
    fn piecewise_validation() {
        let x: PauliString = "X".parse().unwrap();
        let bad = PiecewiseProgram {
            n_qubits: 1,
            segments: vec![Segment { duration: 0.0, terms: vec![x.clone()] }],
        };
        assert!(build_piecewise(&bad).is_err());
        let neg = PiecewiseProgram {
            n_qubits: 1,
            segments: vec![Segment { duration: -1.0, terms: vec![x] }],
        };
        assert!(build_piecewise(&neg).is_err());
        assert!(build_piecewise(&PiecewiseProgram { n_qubits: 1, segments: vec![] }).is_err());
    }

    #[test]
    fn piecewise_schedule_values() {
        let x: PauliString = "X".parse().unwrap();
        let z: PauliString = "Z".parse().unwrap();
        let prog = PiecewiseProgram {
            n_qubits: 1,
            segments: vec![
                Segment { duration: 1.0, terms: vec![x.with_coefficient(2.0)] },
                Segment { duration: 0.5, terms: vec![z.with_coefficient(-1.0), x.clone()] },
                Segment { duration: 0.5, terms: vec![] },
            ],
        };
        let h = build_piecewise(&prog).unwrap();
        assert_eq!(h.total_time(), 2.0);
        let w = |t| h.evaluate(t).unwrap().iter().map(|(_, w)| *w).collect::<Vec<_>>();
        assert_eq!(w(0.5), vec![2.0, 0.0]);
        assert_eq!(w(1.2), vec![1.0, -1.0]);
        assert_eq!(w(1.7), vec![0.0, 0.0]);
    }

    #[test]
    fn per_qubit_noise_gamma() {
        let g = CoefficientSchedule::constant(0.3, 2.0).unwrap();
        let spec = per_qubit_noise(2, Pauli::Z, &g).unwrap();
        assert_eq!(spec.len(), 2);
        assert!((gamma_integral(&spec, 2.0).unwrap() - 0.09 * 2.0).abs() < 1e-15);
        let zero = CoefficientSchedule::constant(0.0, 1.0).unwrap();
        assert_eq!(gamma_integral(&per_qubit_noise(1, Pauli::X, &zero).unwrap(), 1.0).unwrap(), 0.0);
        let g = CoefficientSchedule::constant(0.2, 1.0).unwrap();
        let spec = per_qubit_noise(3, Pauli::Z, &g).unwrap();
        assert!((gamma_integral(&spec, 1.0).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(spec.channels()[2].operator().to_string(), "IIZ");
    }

    #[test]
    fn qaoa_alternates() {
        let zz: PauliString = "ZZ".parse().unwrap();
        let prog = PiecewiseProgram::qaoa(2, vec![zz], &[0.3, 0.4], &[0.2, 0.1]).unwrap();
        assert_eq!(prog.segments.len(), 4);
        assert!((prog.total_time() - 1.0).abs() < 1e-15);
        assert!(PiecewiseProgram::qaoa(2, vec![], &[0.3], &[]).is_err());
    }
}
