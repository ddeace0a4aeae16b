//! Detection and quantification of correlated n-photon emission from a
//! driven qubit–cavity system.
//!
//! The library has two halves. The first computes photon statistics from a
//! steady-state density matrix: normally ordered moments ⟨a†ᵏaᵏ⟩, Glauber
//! g⁽ⁿ⁾(0), differential correlations C⁽ⁿ⁾(0), the conditional-rate ratios
//! R_{k,k−1}, and the correlation measure 𝓜ₙ built from surge and blockade
//! conditions. The second produces those steady states for the driven
//! Jaynes–Cummings model (Liouvillian construction and direct solve) and
//! cross-validates the moment route against photodetection click records
//! generated by a quantum-jump unraveling.
//!
//! Everything is expressed in the frame rotating at the drive frequency and
//! in units of the qubit–cavity coupling g; `scan` accepts the dimensionless
//! ratios κ/g, γ/g, 𝓔/κ and converts once.

pub mod hilbert;
pub mod jc;
pub mod lindblad;
pub mod moments;
pub mod scan;
pub mod trajectories;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument (wrong range, unknown name, malformed input).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Operands of incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A state failed one of the density-matrix invariants.
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    /// Requested moment order exceeds what the Fock truncation supports.
    #[error("truncation too small: {0}")]
    Truncation(String),

    /// The Liouvillian has more than one steady state.
    #[error("degenerate steady state: null-space dimension {null_dim}")]
    DegenerateSteadyState { null_dim: usize },

    /// The steady-state solve did not reach the required residual.
    #[error("steady-state solve did not converge: residual {residual:.3e}")]
    SteadyStateNotConverged { residual: f64 },

    /// Trajectory simulation failure (norm underflow, propagator breakdown).
    #[error("trajectory simulation failed: {0}")]
    Simulation(String),

    /// Too little data for a statistical estimate.
    #[error("insufficient statistics: {0}")]
    Statistics(String),

    /// Underlying linear-algebra routine failed.
    #[error("linear algebra error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed configuration file.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
