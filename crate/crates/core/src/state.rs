//! Dense state vectors over `n` qubits in the computational basis.
//!
//! Basis index `b` encodes the bitstring with qubit 0 as the least significant
//! bit, so `|q_{n-1} ... q_1 q_0⟩` maps to `Σ q_k 2^k`.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm deviation beyond which measurement sampling refuses a state.
pub const MEASUREMENT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes. The vector is not renormalized.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("state needs at least one qubit".into()));
        }
        if amplitudes.len() != 1usize << n_qubits {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes given for {} qubit(s), expected {}",
                amplitudes.len(),
                n_qubits,
                1usize << n_qubits
            )));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// The uniform superposition `|+⟩^{⊗n}`, ground state of `−Σ X_k`.
    pub fn uniform_superposition(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidParameter("state needs at least one qubit".into()));
        }
        let dim = 1usize << n_qubits;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self { n_qubits, amplitudes: vec![a; dim] })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns a copy scaled to unit norm. A zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.normalize();
        out
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_size(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|² / (‖self‖²‖other‖²)`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        let ov = self.inner(other)?;
        Ok(ov.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    /// Largest componentwise `|a_n − b_n|`.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.check_same_size(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_same_size(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(())
    }
}

/// The computational basis vector `|index⟩`.
pub fn basis_state(n_qubits: usize, index: usize) -> Result<StateVector> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("state needs at least one qubit".into()));
    }
    let dim = 1usize << n_qubits;
    if index >= dim {
        return Err(Error::IndexOutOfRange { index, n_qubits, dim });
    }
    let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
    amplitudes[index] = C64::new(1.0, 0.0);
    Ok(StateVector { n_qubits, amplitudes })
}

/// The coefficient `C_index` of `s` in the computational basis.
pub fn amplitude(s: &StateVector, index: usize) -> Result<C64> {
    s.amplitudes.get(index).copied().ok_or(Error::IndexOutOfRange {
        index,
        n_qubits: s.n_qubits,
        dim: s.dim(),
    })
}

/// Projective measurement in the computational basis (Born rule).
///
/// Rejects states whose norm has drifted by more than
/// [`MEASUREMENT_NORM_TOLERANCE`]; such drift means the integrator broke
/// unitarity.
pub fn sample_measurement<R: Rng + ?Sized>(s: &StateVector, rng: &mut R) -> Result<usize> {
    let norm = s.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > MEASUREMENT_NORM_TOLERANCE {
        return Err(Error::NormCorrupted { norm, tolerance: MEASUREMENT_NORM_TOLERANCE });
    }
    let u: f64 = rng.random::<f64>() * norm * norm;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, a) in s.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            last_nonzero = i;
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    Ok(last_nonzero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> StateVector {
        StateVector::uniform_superposition(1).unwrap()
    }

    #[test]
    fn basis_states() {
        let s = basis_state(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let s = basis_state(2, 3).unwrap();
        let expect: Vec<C64> = [0.0, 0.0, 0.0, 1.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        assert_eq!(s.amplitudes(), expect.as_slice());
        let err = basis_state(1, 2).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn amplitude_lookup() {
        assert_eq!(amplitude(&basis_state(1, 0).unwrap(), 0).unwrap(), C64::new(1.0, 0.0));
        assert!((amplitude(&plus(), 1).unwrap() - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert_eq!(amplitude(&basis_state(2, 3).unwrap(), 0).unwrap(), C64::new(0.0, 0.0));
        assert!(amplitude(&plus(), 2).is_err());
    }

    #[test]
    fn deterministic_measurement() {
        let s = basis_state(1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(sample_measurement(&s, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn measurement_rejects_corrupted_norm() {
        let s = StateVector::from_amplitudes(1, vec![C64::new(1.0, 0.0), C64::new(0.1, 0.0)])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_measurement(&s, &mut rng), Err(Error::NormCorrupted { .. })));
    }

    #[test]
    fn born_rule_plus_state() {
        let s = plus();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample_measurement(&s, &mut rng).unwrap() == 0).count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((zeros as f64 - 0.5 * n as f64).abs() < 3.0 * sigma, "zeros = {zeros}");
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(StateVector::from_amplitudes(2, vec![C64::new(1.0, 0.0); 3]).is_err());
    }
}
