//! Dense matrices for oracles and small reference solvers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::state::StateVector;

/// Largest qubit count for which dense `2^n × 2^n` matrices are built.
pub const DENSE_QUBIT_CAP: usize = 12;

pub type DenseMatrix = DMatrix<C64>;

pub(crate) fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits > DENSE_QUBIT_CAP {
        return Err(Error::DimensionCap { cap: DENSE_QUBIT_CAP, requested: n_qubits });
    }
    Ok(())
}

/// Dense matrix of a single Pauli string, coefficient included.
pub fn pauli_matrix(p: &PauliString) -> Result<DenseMatrix> {
    check_cap(p.n_qubits())?;
    let dim = 1usize << p.n_qubits();
    let mut m = DenseMatrix::zeros(dim, dim);
    let mut col = vec![C64::new(0.0, 0.0); dim];
    let mut unit = vec![C64::new(0.0, 0.0); dim];
    for b in 0..dim {
        unit[b] = C64::new(1.0, 0.0);
        p.apply_into(&unit, &mut col);
        for (row, v) in col.iter().enumerate() {
            m[(row, b)] = *v;
        }
        unit[b] = C64::new(0.0, 0.0);
    }
    Ok(m)
}

/// `Σ w_j·c_j·P_j` as a dense `2^n × 2^n` matrix.
pub fn dense_operator(terms: &[(PauliString, f64)], n_qubits: usize) -> Result<DenseMatrix> {
    check_cap(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut m = DenseMatrix::zeros(dim, dim);
    for (p, w) in terms {
        if p.n_qubits() != n_qubits {
            return Err(Error::QubitMismatch { expected: n_qubits, found: p.n_qubits() });
        }
        let scale = w * p.coefficient();
        let yp = y_phase(p) * scale;
        for b in 0..dim {
            m[(b ^ p.x_mask(), b)] += p.phase_on(b, yp);
        }
    }
    Ok(m)
}

fn y_phase(p: &PauliString) -> C64 {
    match (p.x_mask() & p.z_mask()).count_ones() % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Matrix exponential (scaling-and-squaring Padé).
pub fn expm(m: &DenseMatrix) -> DenseMatrix {
    m.exp()
}

/// `exp(−i·dt·M)`.
pub fn propagator(m: &DenseMatrix, dt: f64) -> DenseMatrix {
    expm(&(m * C64::new(0.0, -dt)))
}

pub fn apply_dense(m: &DenseMatrix, s: &StateVector) -> Result<StateVector> {
    if m.ncols() != s.dim() {
        return Err(Error::QubitMismatch {
            expected: m.ncols().trailing_zeros() as usize,
            found: s.n_qubits(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(s.amplitudes());
    let out = m * v;
    StateVector::from_amplitudes(s.n_qubits(), out.as_slice().to_vec())
}

/// `max |M − M†|` entrywise.
pub fn hermiticity_defect(m: &DenseMatrix) -> f64 {
    let a = m - m.adjoint();
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
