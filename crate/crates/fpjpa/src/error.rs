//! Error types shared across the toolkit.

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A domain type invariant was violated at construction or call time.
    #[error("validation: {0}")]
    Validation(String),

    /// Flux bias too close to a half flux quantum: the effective Josephson
    /// inductance diverges and the perturbative expansion breaks down.
    #[error("degenerate bias: |cos(phi_ex_eff)| = {cos_abs:.3e} below floor {floor:.1e}")]
    DegenerateBias { cos_abs: f64, floor: f64 },

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The pump amplitude reached or exceeded the parametric oscillation
    /// threshold; the linear gain formula diverges there.
    #[error("at or above parametric threshold (|denominator| = {denominator_abs:.3e})")]
    AtThreshold { denominator_abs: f64 },

    /// A design target set cannot be realized by any circuit.
    #[error("infeasible design targets: {constraint}")]
    InfeasibleDesign { constraint: String },

    /// Reference spectrum magnitude too small to normalize against.
    #[error("normalization underflow: |S11_ref| = {magnitude:.3e} below floor {floor:.1e}")]
    NormalizationUnderflow { magnitude: f64, floor: f64 },

    /// The spectrum peak touches the grid boundary; the 3-dB width cannot
    /// be bracketed.
    #[error("inconclusive bandwidth: {0}")]
    InconclusiveBandwidth(String),

    /// Generic argument-domain violation (negative power, gain <= 1, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// A least-squares problem was malformed (empty data, mask mismatch,
    /// dataset at threshold, ...).
    #[error("fit problem: {0}")]
    FitProblem(String),

    /// The effective-amplifier decomposition is degenerate (zero signal
    /// transmission).
    #[error("degenerate effective-amplifier decomposition: |c|^2 = 0")]
    DegenerateDecomposition,

    /// File or CSV format problem.
    #[error("io format: {0}")]
    Format(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
