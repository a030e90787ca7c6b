//! Effective-amplifier decomposition of the full input-output relation,
//! added-noise prediction, and the SNR/power calibration arithmetic.

use num_complex::Complex64;

use crate::circuit::JpaParams;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::interference::{Branch, DriveParams, FabryPerotParams, THRESHOLD_FLOOR};

/// Complex amplitudes multiplying the eight input fields in the outgoing
/// signal field: c_in(ω_s), c_in†(ω_i), u_in(ω_s), u_in†(ω_i), v_in(ω_s),
/// v_in†(ω_i), d_in(ω_s), d_in†(ω_i).
#[derive(Debug, Clone, Copy)]
pub struct IOCoefficients {
    pub c: Complex64,
    pub c_prime: Complex64,
    pub u: Complex64,
    pub u_prime: Complex64,
    pub v: Complex64,
    pub v_prime: Complex64,
    pub d: Complex64,
    pub d_prime: Complex64,
}

impl IOCoefficients {
    /// Σ|unprimed|² (the effective gain).
    pub fn unprimed_norm_sqr(&self) -> f64 {
        self.c.norm_sqr() + self.u.norm_sqr() + self.v.norm_sqr() + self.d.norm_sqr()
    }

    /// Σ|primed|².
    pub fn primed_norm_sqr(&self) -> f64 {
        self.c_prime.norm_sqr()
            + self.u_prime.norm_sqr()
            + self.v_prime.norm_sqr()
            + self.d_prime.norm_sqr()
    }

    /// Commutator-preservation defect Σ|unprimed|² − Σ|primed|² − 1.
    pub fn unitarity_defect(&self) -> f64 {
        self.unprimed_norm_sqr() - self.primed_norm_sqr() - 1.0
    }
}

/// The eight coefficients of the outgoing signal field of the combined
/// JPA plus Fabry-Perot system, evaluated below threshold.
pub fn io_coefficients(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
) -> Result<IOCoefficients> {
    let kappa = jpa.kappa;
    let kappa0 = jpa.kappa0;
    let eta = fp.eta;
    let eta0 = fp.eta0;
    let omega_p = drive.omega_pump_amp;

    let r_s = crate::interference::round_trip_coeff(delta, fp, Branch::Signal);
    let r_i = crate::interference::round_trip_coeff(delta, fp, Branch::Idler);
    let chi_s = crate::interference::response_inverse(delta, jpa, fp, Branch::Signal);
    let chi_i_conj = crate::interference::response_inverse(delta, jpa, fp, Branch::Idler).conj();

    let det = chi_s * chi_i_conj - omega_p * omega_p / 4.0;
    if det.norm() <= THRESHOLD_FLOOR {
        return Err(Error::AtThreshold { denominator_abs: det.norm() });
    }

    let one = Complex64::new(1.0, 0.0);
    let om_s = one - r_s;
    let om_i_conj = one - r_i.conj();
    // Shared resonant factor 1/((1-R_s)*det).
    let f = one / (om_s * det);
    let pump = Complex64::new(0.0, omega_p / 2.0);

    Ok(IOCoefficients {
        c: -r_s.conj() / eta0 + eta * eta0 / om_s + eta * eta0 * kappa * chi_i_conj * f / om_s,
        u: (eta * eta0 * (1.0 - eta0)).sqrt() / om_s * (one + kappa * chi_i_conj * f),
        v: (eta * (1.0 - eta0)).sqrt() / om_s * (one + kappa * r_s * chi_i_conj * f),
        d: (eta * eta0 * kappa * kappa0).sqrt() * chi_i_conj * f,
        c_prime: pump * eta * eta0 * kappa * f / om_i_conj,
        u_prime: pump * (eta * eta0 * (1.0 - eta0)).sqrt() * kappa * f / om_i_conj,
        v_prime: pump * (eta * (1.0 - eta0)).sqrt() * kappa * r_i.conj() * f / om_i_conj,
        d_prime: pump * (eta * eta0 * kappa * kappa0).sqrt() * f,
    })
}

/// Effective beam-splitter-plus-ideal-amplifier decomposition.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveAmp {
    /// Effective gain G_eff = Σ|unprimed|².
    pub g_eff: f64,
    /// Effective transmittance η_eff = |c|²/G_eff.
    pub eta_eff: f64,
    /// Gain of the combined system, G_FPJ = G_eff·η_eff.
    pub g_fpj: f64,
    /// Added noise in photons, N_FPJ = (2 − η_eff)/(2η_eff).
    pub n_fpj: f64,
    /// False when G_eff sits below the configured high-gain floor, where
    /// the added-noise formula is only approximate.
    pub high_gain: bool,
}

/// Default high-gain floor (linear), 20 dB.
pub const HIGH_GAIN_FLOOR: f64 = 100.0;

/// Reduces the eight coefficients to the effective amplifier model.
///
/// Below `high_gain_floor` (default 100) the `n_fpj` value is flagged as
/// approximate via `high_gain = false`.
pub fn effective_amplifier(coeffs: &IOCoefficients, high_gain_floor: f64) -> Result<EffectiveAmp> {
    let g_eff = coeffs.unprimed_norm_sqr();
    if coeffs.c.norm_sqr() == 0.0 {
        return Err(Error::DegenerateDecomposition);
    }
    let eta_eff = coeffs.c.norm_sqr() / g_eff;
    Ok(EffectiveAmp {
        g_eff,
        eta_eff,
        g_fpj: g_eff * eta_eff,
        n_fpj: (2.0 - eta_eff) / (2.0 * eta_eff),
        high_gain: g_eff >= high_gain_floor,
    })
}

/// Measured and calibrated powers entering the added-noise extraction.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationInputs {
    /// Pump-on signal power (W).
    pub p_on_s: f64,
    /// Pump-on noise power (W).
    pub p_on_n: f64,
    /// Pump-off signal power (W).
    pub p_off_s: f64,
    /// Pump-off noise power (W).
    pub p_off_n: f64,
    /// Calibrated input signal power at the reference plane (W).
    pub p_calib_s: f64,
    /// One-way propagation transmittance η₀.
    pub eta0: f64,
    /// Power reflectance |S11_off|² of the unpumped JPA on resonance.
    pub s11_off_sq: f64,
    /// Vacuum noise power (W), ħω_s·B_IF/2 unless overridden.
    pub p_vac_n: f64,
    /// Signal angular frequency (rad/s).
    pub omega_s: f64,
    /// IF bandwidth of the analyzer (Hz).
    pub b_if: f64,
}

impl CalibrationInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_on_s", self.p_on_s),
            ("p_on_n", self.p_on_n),
            ("p_off_s", self.p_off_s),
            ("p_off_n", self.p_off_n),
            ("p_calib_s", self.p_calib_s),
            ("p_vac_n", self.p_vac_n),
        ] {
            if v < 0.0 {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.s11_off_sq >= 0.0 && self.s11_off_sq <= 1.0) {
            return Err(Error::Validation("s11_off_sq must lie in [0, 1]".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::Validation("eta0 must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Vacuum noise power for 0.5 photons in the IF bandwidth.
    pub fn vacuum_noise_power(omega_s: f64, b_if: f64) -> f64 {
        0.5 * HBAR * omega_s * b_if
    }
}

/// Power reflectance of the unpumped JPA on resonance,
/// |S11_off|² = (κ−κ₀)²/(κ+κ₀)².
pub fn s11_off_squared(jpa: &JpaParams) -> f64 {
    let num = jpa.kappa - jpa.kappa0;
    let den = jpa.kappa + jpa.kappa0;
    (num / den) * (num / den)
}

/// Added noise extracted from the measured SNR change.
#[derive(Debug, Clone, Copy)]
pub struct AddedNoise {
    /// Input-referred added noise power of the combined system (W).
    pub p_fpj_n: f64,
    /// The same in photon units, P/(ħω_s·B_IF).
    pub n_fpj: f64,
}

/// Inverts the measured pump-on/off signal and noise powers into the
/// added noise of the combined system.
pub fn added_noise_from_snr(cal: &CalibrationInputs) -> Result<AddedNoise> {
    cal.validate()?;
    if cal.p_on_s <= 0.0 {
        return Err(Error::Domain("p_on_s must be positive".into()));
    }
    let snr_term = cal.p_calib_s / cal.eta0 * (cal.p_on_n / cal.p_on_s - cal.p_off_n / cal.p_on_s);
    let vacuum_term = cal.p_vac_n
        * (1.0
            - cal.p_off_s / (cal.eta0 * cal.eta0 * cal.s11_off_sq * cal.p_on_s));
    let p_fpj_n = snr_term - vacuum_term;
    Ok(AddedNoise { p_fpj_n, n_fpj: p_fpj_n / (HBAR * cal.omega_s * cal.b_if) })
}

/// Reflection coefficient of a driven two-level system terminating a
/// waveguide, with radiative rate Γ_r, non-radiative rate Γ_nr, pure
/// dephasing Γ_p and drive rate Ω.
pub fn qubit_reflection(
    omega: f64,
    omega_q: f64,
    drive_rate: f64,
    gamma_r: f64,
    gamma_nr: f64,
    gamma_p: f64,
) -> Result<Complex64> {
    if !(gamma_r > 0.0) {
        return Err(Error::Domain("gamma_r must be positive".into()));
    }
    let gamma1 = gamma_r + gamma_nr;
    let gamma2 = gamma1 / 2.0 + gamma_p;
    let detuning = omega - omega_q;
    let numerator = Complex64::new(0.0, gamma_r * gamma1) * Complex64::new(detuning, -gamma2);
    let denominator =
        drive_rate * drive_rate * gamma2 + gamma1 * (detuning * detuning + gamma2 * gamma2);
    Ok(Complex64::new(1.0, 0.0) - numerator / denominator)
}

/// Probe power corresponding to a qubit drive rate,
/// P = ħω_q·Ω²/(4Γ_r).
pub fn probe_power_from_drive(omega_q: f64, drive_rate: f64, gamma_r: f64) -> Result<f64> {
    if !(gamma_r > 0.0) {
        return Err(Error::Domain("gamma_r must be positive".into()));
    }
    Ok(HBAR * omega_q * drive_rate * drive_rate / (4.0 * gamma_r))
}
