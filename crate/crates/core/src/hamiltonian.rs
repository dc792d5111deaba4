use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::schedule::CoefficientSchedule;

/// `Ĥ(t) = Σ_j s_j(t)·P_j` on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSchedule {
    n_qubits: usize,
    terms: Vec<(PauliString, CoefficientSchedule)>,
    total_time: f64,
}

impl HamiltonianSchedule {
    /// Every term must act on `n_qubits` and every schedule must span `[0, total_time]`.
    pub fn new(
        n_qubits: usize,
        terms: Vec<(PauliString, CoefficientSchedule)>,
        total_time: f64,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("Hamiltonian needs at least one qubit".into()));
        }
        if !total_time.is_finite() || total_time < 0.0 {
            return Err(Error::InvalidParameter(format!("total time {total_time} must be ≥ 0")));
        }
        for (p, s) in &terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch { expected: n_qubits, found: p.n_qubits() });
            }
            if (s.total_time() - total_time).abs() > 1e-12 * total_time.max(1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "term {p} schedule ends at {} but T = {total_time}",
                    s.total_time()
                )));
            }
        }
        Ok(Self { n_qubits, terms, total_time })
    }

    /// `Ĥ = 0` on `[0, T]`.
    pub fn zero(n_qubits: usize, total_time: f64) -> Result<Self> {
        Self::new(n_qubits, Vec::new(), total_time)
    }

    /// Time-independent `Σ_j P_j` (coefficients taken from the strings).
    pub fn constant(n_qubits: usize, terms: Vec<PauliString>, total_time: f64) -> Result<Self> {
        let terms = terms
            .into_iter()
            .map(|p| {
                let c = p.coefficient();
                Ok((p.unit(), CoefficientSchedule::constant(c, total_time)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, terms, total_time)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn terms(&self) -> &[(PauliString, CoefficientSchedule)] {
        &self.terms
    }

    /// Unit-coefficient strings with their effective weights `c_j·s_j(t)`, in input order.
    pub fn evaluate(&self, t: f64) -> Result<Vec<(PauliString, f64)>> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::TimeOutOfRange { t, total_time: self.total_time });
        }
        Ok(self.evaluate_unchecked(t))
    }

    pub(crate) fn evaluate_unchecked(&self, t: f64) -> Vec<(PauliString, f64)> {
        self.terms
            .iter()
            .map(|(p, s)| (p.unit(), p.coefficient() * s.value_at(t)))
            .collect()
    }

    /// Weights only, same order as [`Self::terms`].
    pub(crate) fn weights_at(&self, t: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.terms.iter().map(|(p, s)| p.coefficient() * s.value_at(t)));
    }
}

/// Free-function form of [`HamiltonianSchedule::evaluate`].
pub fn evaluate_hamiltonian(h: &HamiltonianSchedule, t: f64) -> Result<Vec<(PauliString, f64)>> {
    h.evaluate(t)
}
