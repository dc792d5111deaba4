//! Local stochastic control errors `Ĥ_error,k(t) = g_k(t)·P_k` with `P_k² = I`.
//!
//! The local error condition `Ĥ_error,k² = g_k²·I` is what makes the
//! ensemble-mean state a scalar multiple of the noiseless state, with decay
//! exponent `Γ = ½∫₀ᵀ Σ_k g_k(t)² dt`.

use crate::dense::{check_cap, pauli_matrix, DenseMatrix};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::schedule::CoefficientSchedule;

/// Default tolerance for `op² ∝ I`.
pub const LOCAL_CONDITION_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseChannel {
    operator: PauliString,
    strength: CoefficientSchedule,
}

impl NoiseChannel {
    /// `operator` must be an involution (coefficient ±1). A −1 coefficient is
    /// folded into the strength, which leaves the noise law unchanged.
    pub fn new(operator: PauliString, strength: CoefficientSchedule) -> Result<Self> {
        if !operator.is_involution() {
            let c = operator.coefficient();
            return Err(Error::NonInvolutory { square: c * c });
        }
        let strength = if operator.coefficient() < 0.0 { strength.scaled(-1.0) } else { strength };
        Ok(Self { operator: operator.unit(), strength })
    }

    pub fn operator(&self) -> &PauliString {
        &self.operator
    }

    pub fn strength(&self) -> &CoefficientSchedule {
        &self.strength
    }
}

/// Ordered channels, each driven by its own independent Brownian motion.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    n_qubits: usize,
    channels: Vec<NoiseChannel>,
}

impl NoiseSpec {
    pub fn new(n_qubits: usize, channels: Vec<NoiseChannel>) -> Result<Self> {
        for ch in &channels {
            if ch.operator.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch {
                    expected: n_qubits,
                    found: ch.operator.n_qubits(),
                });
            }
        }
        Ok(Self { n_qubits, channels })
    }

    /// No channels: noiseless dynamics.
    pub fn none(n_qubits: usize) -> Self {
        Self { n_qubits, channels: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn channels(&self) -> &[NoiseChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `Σ_k g_k(t)²`.
    pub fn total_rate_at(&self, t: f64) -> f64 {
        self.channels.iter().map(|c| c.strength.value_at(t).powi(2)).sum()
    }
}

/// Outcome of [`verify_local_condition`]: `op² ≈ scalar²·I` when `passed`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LocalCheck {
    pub passed: bool,
    pub scalar: f64,
    /// Largest entrywise deviation of `op²` from `scalar²·I`.
    pub residual: f64,
}

/// Checks `op² = c²·I` within `tolerance` and extracts `c ≥ 0`.
pub fn verify_local_condition(op: &DenseMatrix, tolerance: f64) -> LocalCheck {
    let fail = LocalCheck { passed: false, scalar: 0.0, residual: f64::INFINITY };
    let dim = op.nrows();
    if dim == 0 || op.ncols() != dim || !dim.is_power_of_two() || check_cap(dim.trailing_zeros() as usize).is_err() {
        return fail;
    }
    let sq = op * op;
    let c2 = sq.trace() / dim as f64;
    let mut residual = c2.im.abs();
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { c2.re } else { 0.0 };
            residual = residual.max((sq[(i, j)] - target).norm());
        }
    }
    let passed = residual <= tolerance && c2.re >= -tolerance;
    LocalCheck { passed, scalar: c2.re.max(0.0).sqrt(), residual }
}

/// [`verify_local_condition`] for a Pauli string via its dense matrix.
pub fn verify_local_condition_pauli(p: &PauliString, tolerance: f64) -> Result<LocalCheck> {
    Ok(verify_local_condition(&pauli_matrix(p)?, tolerance))
}

/// `g_k(t)`.
pub fn strength_at(ch: &NoiseChannel, t: f64) -> Result<f64> {
    ch.strength.evaluate(t)
}

/// `Γ = ½∫₀ᵀ Σ_k g_k(t)² dt`, integrated exactly segment by segment.
pub fn gamma_integral(spec: &NoiseSpec, total_time: f64) -> Result<f64> {
    gamma_between(spec, 0.0, total_time)
}

/// `½∫_a^b Σ_k g_k(t)² dt`.
pub fn gamma_between(spec: &NoiseSpec, a: f64, b: f64) -> Result<f64> {
    let mut acc = 0.0;
    for ch in &spec.channels {
        acc += ch.strength.square_integral(a, b)?;
    }
    Ok(0.5 * acc)
}

/// Composite Simpson estimate of Γ, used to cross-check [`gamma_integral`].
pub fn gamma_quadrature(spec: &NoiseSpec, total_time: f64, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one step".into()));
    }
    if total_time == 0.0 {
        return Ok(0.0);
    }
    let h = total_time / steps as f64;
    let mut acc = 0.0;
    for i in 0..steps {
        let a = i as f64 * h;
        let b = if i + 1 == steps { total_time } else { a + h };
        let m = 0.5 * (a + b);
        // one-sided evaluation keeps piecewise-constant jumps at knots on the right side
        let fa = spec.total_rate_at(a + 1e-14 * h);
        let fb = spec.total_rate_at(b - 1e-14 * h);
        let fm = spec.total_rate_at(m);
        acc += (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    }
    Ok(0.5 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;
    use num_complex::Complex64 as C64;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z_channel(g: f64, t: f64) -> NoiseChannel {
        NoiseChannel::new(
            PauliString::single(1, 0, Pauli::Z, 1.0).unwrap(),
            CoefficientSchedule::constant(g, t).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn local_condition_examples() {
        let xz: PauliString = "XZ".parse().unwrap();
        let r = verify_local_condition_pauli(&xz, 1e-10).unwrap();
        assert!(r.passed);
        assert!((r.scalar - 1.0).abs() < 1e-12);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = DenseMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]);
        let r = verify_local_condition(&h, 1e-10);
        assert!(r.passed);
        assert!((r.scalar - 1.0).abs() < 1e-12);

        let d = DenseMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(2.0)]);
        assert!(!verify_local_condition(&d, 1e-10).passed);
    }

    #[test]
    fn local_condition_extracts_scale() {
        let p: PauliString = "YX".parse().unwrap();
        let r = verify_local_condition_pauli(&p.with_coefficient(0.3), 1e-10).unwrap();
        assert!(r.passed);
        assert!((r.scalar - 0.3).abs() < 1e-12);
    }

    #[test]
    fn non_square_fails() {
        assert!(!verify_local_condition(&DenseMatrix::zeros(2, 4), 1e-10).passed);
        assert!(!verify_local_condition(&DenseMatrix::zeros(3, 3), 1e-10).passed);
    }

    #[test]
    fn strengths() {
        assert_eq!(strength_at(&z_channel(0.3, 2.0), 1.3).unwrap(), 0.3);
        let ramp = NoiseChannel::new(
            "Z".parse().unwrap(),
            CoefficientSchedule::linear_ramp(0.0, 1.0, 2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(strength_at(&ramp, 1.0).unwrap(), 0.5);
        assert_eq!(strength_at(&z_channel(0.0, 1.0), 0.5).unwrap(), 0.0);
        assert!(strength_at(&z_channel(0.3, 1.0), 1.5).is_err());
    }

    #[test]
    fn gamma_constant_and_summed() {
        let spec = NoiseSpec::new(1, vec![z_channel(0.3, 2.0)]).unwrap();
        assert!((gamma_integral(&spec, 2.0).unwrap() - 0.09).abs() < 1e-15);
        let spec = NoiseSpec::new(1, vec![z_channel(0.3, 2.0); 4]).unwrap();
        assert!((gamma_integral(&spec, 2.0).unwrap() - 0.36).abs() < 1e-15);
    }

    #[test]
    fn gamma_linear_ramp_is_one_sixth() {
        let ch = NoiseChannel::new(
            "Z".parse().unwrap(),
            CoefficientSchedule::linear_ramp(0.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let spec = NoiseSpec::new(1, vec![ch]).unwrap();
        assert!((gamma_integral(&spec, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        // Simpson is exact on quadratics
        assert!((gamma_quadrature(&spec, 1.0, 7).unwrap() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn zero_strength_gamma_is_exactly_zero() {
        let spec = NoiseSpec::new(1, vec![z_channel(0.0, 3.0); 3]).unwrap();
        assert_eq!(gamma_integral(&spec, 3.0).unwrap(), 0.0);
        assert_eq!(gamma_integral(&NoiseSpec::none(2), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn channel_rejects_non_involution() {
        let p = PauliString::single(1, 0, Pauli::X, 2.0).unwrap();
        let s = CoefficientSchedule::constant(0.1, 1.0).unwrap();
        assert!(matches!(NoiseChannel::new(p, s), Err(Error::NonInvolutory { .. })));
    }

    #[test]
    fn negative_sign_folds_into_strength() {
        let p = PauliString::single(1, 0, Pauli::X, -1.0).unwrap();
        let ch = NoiseChannel::new(p, CoefficientSchedule::constant(0.2, 1.0).unwrap()).unwrap();
        assert_eq!(ch.operator().coefficient(), 1.0);
        assert_eq!(strength_at(&ch, 0.5).unwrap(), -0.2);
    }
}
