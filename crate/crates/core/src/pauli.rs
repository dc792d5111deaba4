//! Pauli strings and their action on state vectors via bit masks.
//!
//! A string over `{I, X, Y, Z}` is stored as an X mask and a Z mask. On a
//! basis state the operator acts as
//! `P|b⟩ = c · i^{#Y} · (−1)^{popcount(b & z)} |b ⊕ x⟩`, using `Y = iXZ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Tolerance on `c² = 1` for a string to count as an involution.
pub const INVOLUTION_TOLERANCE: f64 = 1e-10;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: usize,
    z_mask: usize,
    coefficient: f64,
}

impl PauliString {
    /// Builds a string from letters; `letters[k]` acts on qubit `k`.
    pub fn new(letters: &[Pauli], coefficient: f64) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidParameter("Pauli string needs at least one letter".into()));
        }
        if letters.len() >= usize::BITS as usize {
            return Err(Error::InvalidParameter(format!(
                "Pauli string of length {} exceeds mask width",
                letters.len()
            )));
        }
        let (mut x_mask, mut z_mask) = (0usize, 0usize);
        for (k, p) in letters.iter().enumerate() {
            let (x, z) = p.bits();
            x_mask |= (x as usize) << k;
            z_mask |= (z as usize) << k;
        }
        Ok(Self { n_qubits: letters.len(), x_mask, z_mask, coefficient })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(&vec![Pauli::I; n_qubits], 1.0)
    }

    /// A single letter on qubit `qubit`, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, letter: Pauli, coefficient: f64) -> Result<Self> {
        if qubit >= n_qubits {
            return Err(Error::InvalidParameter(format!(
                "qubit {qubit} out of range for {n_qubits} qubit(s)"
            )));
        }
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = letter;
        Self::new(&letters, coefficient)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn x_mask(&self) -> usize {
        self.x_mask
    }

    pub fn z_mask(&self) -> usize {
        self.z_mask
    }

    pub fn with_coefficient(&self, coefficient: f64) -> Self {
        Self { coefficient, ..self.clone() }
    }

    /// Same letters with coefficient 1.
    pub fn unit(&self) -> Self {
        self.with_coefficient(1.0)
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        let x = (self.x_mask >> qubit) & 1 == 1;
        let z = (self.z_mask >> qubit) & 1 == 1;
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|k| self.letter(k)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// `P² = c²·I` for every Pauli string; involution iff `c² = 1`.
    pub fn is_involution(&self) -> bool {
        (self.coefficient * self.coefficient - 1.0).abs() <= INVOLUTION_TOLERANCE
    }

    /// `i^{#Y}` as a power of `i` modulo 4.
    fn y_phase(&self) -> C64 {
        match (self.x_mask & self.z_mask).count_ones() % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// Phase `⟨b ⊕ x| P_unit |b⟩` picked up by basis state `b`.
    #[inline]
    pub(crate) fn phase_on(&self, b: usize, y_phase: C64) -> C64 {
        if (b & self.z_mask).count_ones() & 1 == 1 {
            -y_phase
        } else {
            y_phase
        }
    }

    /// Writes `P·src` into `dst` (both of length `2^n`).
    pub(crate) fn apply_into(&self, src: &[C64], dst: &mut [C64]) {
        let yp = self.y_phase() * self.coefficient;
        for (b, a) in src.iter().enumerate() {
            dst[b ^ self.x_mask] = self.phase_on(b, yp) * a;
        }
    }

    /// In-place `exp(−i·angle·P_unit)`; caller guarantees the qubit count.
    pub(crate) fn rotate_in_place(&self, angle: f64, amps: &mut [C64]) {
        let (sin, cos) = small_angle_sin_cos(angle);
        self.rotate_in_place_sc(cos, sin, amps);
    }

    /// As [`Self::rotate_in_place`] with precomputed `cos(angle)`, `sin(angle)`.
    pub(crate) fn rotate_in_place_sc(&self, cos: f64, sin: f64, amps: &mut [C64]) {
        let yp = self.y_phase();
        // −i·sin·phase
        let k = C64::new(0.0, -sin) * yp;
        if self.x_mask == 0 {
            // diagonal: each basis state picks up exp(∓i·angle·phase)
            let plus = C64::new(cos, 0.0) + k;
            let minus = C64::new(cos, 0.0) - k;
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= if (b & self.z_mask).count_ones() & 1 == 1 { minus } else { plus };
            }
            return;
        }
        let shift = usize::BITS - 1 - self.x_mask.leading_zeros();
        let low = (1usize << shift) - 1;
        for j in 0..amps.len() / 2 {
            // j with a zero inserted at the pivot bit
            let b = ((j & !low) << 1) | (j & low);
            let c = b ^ self.x_mask;
            let (ab, ac) = (amps[b], amps[c]);
            // (P s)[c] = phase(b)·s[b], (P s)[b] = phase(c)·s[c]
            let kc = if self.odd(c) { -k } else { k };
            let kb = if self.odd(b) { -k } else { k };
            amps[b] = ab * cos + kc * ac;
            amps[c] = ac * cos + kb * ab;
        }
    }

    #[inline]
    fn odd(&self, b: usize) -> bool {
        (b & self.z_mask).count_ones() & 1 == 1
    }
}

/// `(sin x, cos x)`, by Taylor series for the small angles of noise kicks.
#[inline]
pub(crate) fn small_angle_sin_cos(x: f64) -> (f64, f64) {
    if x.abs() > 0.0625 {
        return x.sin_cos();
    }
    // truncation below 2^-60 relative for |x| ≤ 1/16
    let x2 = x * x;
    let sin = x * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0))));
    let cos = 1.0 - x2 / 2.0 * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0))));
    (sin, cos)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses letters such as `"XIZ"`, where the character at position `k`
    /// acts on qubit `k`. The coefficient is 1.
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| {
                    Error::InvalidParameter(format!("invalid Pauli letter {c:?} in {s:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(&letters, 1.0)
    }
}

/// `p·s`, including the coefficient of `p`.
pub fn apply_pauli_string(p: &PauliString, s: &StateVector) -> Result<StateVector> {
    check_qubits(p, s)?;
    let mut out = vec![C64::new(0.0, 0.0); s.dim()];
    p.apply_into(s.amplitudes(), &mut out);
    StateVector::from_amplitudes(s.n_qubits(), out)
}

/// `exp(−i·angle·P)s = cos(angle)s − i sin(angle)(P s)` for an involution `P`.
pub fn apply_exp_pauli_rotation(
    p: &PauliString,
    angle: f64,
    s: &StateVector,
) -> Result<StateVector> {
    if !p.is_involution() {
        return Err(Error::NonInvolutory { square: p.coefficient * p.coefficient });
    }
    check_qubits(p, s)?;
    let mut out = s.clone();
    // a coefficient of −1 flips the rotation sense
    p.rotate_in_place(angle * p.coefficient.signum(), out.amplitudes_mut());
    Ok(out)
}

pub(crate) fn check_qubits(p: &PauliString, s: &StateVector) -> Result<()> {
    if p.n_qubits() != s.n_qubits() {
        return Err(Error::QubitMismatch { expected: p.n_qubits(), found: s.n_qubits() });
    }
    Ok(())
}
