//! Physical constants (CODATA 2018 / SI exact values).

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054571817e-34;

/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602176634e-19;

/// Reduced flux quantum Φ₀ = ħ/(2e) (Wb).
pub const PHI0: f64 = HBAR / (2.0 * E_CHARGE);

/// Quantum of resistance Z_Q = Φ₀/(2e) (Ω).
pub const Z_QUANTUM: f64 = PHI0 / (2.0 * E_CHARGE);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_have_expected_magnitudes() {
        assert!((PHI0 - 3.2911e-16).abs() / 3.2911e-16 < 1e-4);
        assert!((Z_QUANTUM - 1027.06).abs() / 1027.06 < 1e-4);
    }
}
