//! Simulation and verification of isolated quantum dynamics under local
//! stochastic control errors.
//!
//! The noisy Schrödinger equation
//! `i d|φ⟩ = (Ĥ(t) dt + Σ_k g_k(t) P_k ∘ dW_k) |φ⟩` is integrated for small
//! qubit registers, trajectories are measured in the computational basis, and
//! the ensemble statistics are checked against the threshold relation
//! `ε + δ + α·e^{Γ} < 1`, `Γ = ½∫₀ᵀ Σ_k g_k² dt`.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod hamiltonian;
pub mod integrators;
pub mod models;
pub mod montecarlo;
pub mod noise;
pub mod pauli;
pub mod rng;
pub mod schedule;
pub mod state;
pub mod threshold;

pub use error::{Error, Result};
pub use hamiltonian::{evaluate_hamiltonian, HamiltonianSchedule};
pub use integrators::{Scheme, TrajectoryConfig, TrajectoryRunner};
pub use noise::{NoiseChannel, NoiseSpec};
pub use pauli::{Pauli, PauliString};
pub use schedule::{CoefficientSchedule, ScheduleKind};
pub use state::StateVector;
