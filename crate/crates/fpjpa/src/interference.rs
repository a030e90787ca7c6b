//! Closed-form reflection and gain spectra of a JPA seen through a weakly
//! reflecting waveguide section (Fabry-Perot interference), with reference
//! normalization and net gain.
//!
//! All formulas work in the detuning variable δ = ω_s − ω_a with the pump
//! fixed at ω_p = 2ω_a, so the idler sits at −δ. The propagation delay is
//! folded into a per-round-trip phase 2πδ/Δ + φ₀, which is exact for
//! stationary single-frequency drive.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::JpaParams;
use crate::error::{Error, Result};
use crate::spectrum::{DetuningGrid, Spectrum, SpectrumData, SpectrumKind};

/// Magnitude floor on the parametric denominator χ⁻¹_s·χ⁻¹*_i − Ω²/4
/// (rad²/s²) before an evaluation is declared at-threshold.
pub const THRESHOLD_FLOOR: f64 = 1e-18;

/// Floor on |S11_ref| below which normalization is refused.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

/// Fabry-Perot environment parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FabryPerotParams {
    /// Mirror power transmittance η ∈ (0, 1].
    pub eta: f64,
    /// One-way propagation power transmittance η₀ ∈ (0, 1].
    pub eta0: f64,
    /// Free spectral range Δ (rad/s).
    pub fsr: f64,
    /// Round-trip phase at the JPA frequency, wrapped to (−π, π].
    pub phi0: f64,
    /// Reference phase φ_r of the far-detuned JPA reflection.
    pub phi_ref: f64,
}

/// Wraps an angle to (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut p = phi.rem_euclid(two_pi);
    if p > std::f64::consts::PI {
        p -= two_pi;
    }
    p
}

impl FabryPerotParams {
    /// Builds and validates; φ₀ is stored wrapped to (−π, π].
    pub fn new(eta: f64, eta0: f64, fsr: f64, phi0: f64, phi_ref: f64) -> Result<Self> {
        let fp = FabryPerotParams { eta, eta0, fsr, phi0: wrap_phase(phi0), phi_ref };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Validation(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::Validation(format!("eta0 must lie in (0, 1], got {}", self.eta0)));
        }
        if !(self.fsr > 0.0) {
            return Err(Error::Validation(format!("fsr must be positive, got {}", self.fsr)));
        }
        if !(self.round_trip_magnitude() < 1.0) {
            return Err(Error::Validation(format!(
                "round-trip magnitude {} must be < 1",
                self.round_trip_magnitude()
            )));
        }
        if !self.phi0.is_finite() || !self.phi_ref.is_finite() {
            return Err(Error::Validation("phases must be finite".into()));
        }
        Ok(())
    }

    /// |R| = η₀·√(1 − η), independent of detuning.
    pub fn round_trip_magnitude(&self) -> f64 {
        self.eta0 * (1.0 - self.eta).sqrt()
    }
}

/// Two coupled frequency branches of the parametric process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Signal at ω_a + δ; round-trip phase advances as +2πδ/Δ.
    Signal,
    /// Idler at ω_a − δ; round-trip phase advances as −2πδ/Δ.
    Idler,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Signal => 1.0,
            Branch::Idler => -1.0,
        }
    }
}

/// Two-photon drive at ω_p = 2ω_a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Drive amplitude Ω_p (rad/s).
    pub omega_pump_amp: f64,
}

impl DriveParams {
    pub fn new(omega_pump_amp: f64) -> Result<Self> {
        if omega_pump_amp < 0.0 {
            return Err(Error::Validation(format!(
                "omega_pump_amp must be >= 0, got {omega_pump_amp}"
            )));
        }
        Ok(DriveParams { omega_pump_amp })
    }
}

/// Round-trip coefficient R(δ) = η₀√(1−η)·e^{i(±2πδ/Δ + φ₀)}.
///
/// The detuning-dependent phase is reduced modulo one turn before
/// exponentiation, which makes the Δ-periodicity exact.
pub fn round_trip_coeff(delta: f64, fp: &FabryPerotParams, branch: Branch) -> Complex64 {
    let magnitude = fp.round_trip_magnitude();
    let turns = (branch.sign() * delta / fp.fsr).rem_euclid(1.0);
    let phase = 2.0 * std::f64::consts::PI * turns + fp.phi0;
    Complex64::from_polar(magnitude, phase)
}

/// Inverse response function χ⁻¹(δ) = ±iδ − (κ+κ₀)/2 − κ·R/(1−R).
///
/// The real and imaginary parts of the last term are the interference
/// modification of the decay rate and the frequency pull.
pub fn response_inverse(delta: f64, jpa: &JpaParams, fp: &FabryPerotParams, branch: Branch) -> Complex64 {
    let r = round_trip_coeff(delta, fp, branch);
    Complex64::new(0.0, branch.sign() * delta)
        - (jpa.kappa + jpa.kappa0) / 2.0
        - jpa.kappa * r / (Complex64::new(1.0, 0.0) - r)
}

/// Unpumped reflection spectrum,
/// S11 = −R*/η₀ + ηη₀/(1−R) + ηη₀κ/((1−R)²·χ⁻¹), signal branch.
pub fn reflection_spectrum(delta: f64, jpa: &JpaParams, fp: &FabryPerotParams) -> Complex64 {
    let r = round_trip_coeff(delta, fp, Branch::Signal);
    let chi_inv = response_inverse(delta, jpa, fp, Branch::Signal);
    let one_minus_r = Complex64::new(1.0, 0.0) - r;
    -r.conj() / fp.eta0
        + fp.eta * fp.eta0 / one_minus_r
        + fp.eta * fp.eta0 * jpa.kappa / (one_minus_r * one_minus_r * chi_inv)
}

/// Flux-pumped reflection (gain) spectrum; reduces to the unpumped form at
/// Ω_p = 0. Errors at the parametric-oscillation threshold.
pub fn gain_spectrum(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
) -> Result<Complex64> {
    let r_s = round_trip_coeff(delta, fp, Branch::Signal);
    let chi_inv_s = response_inverse(delta, jpa, fp, Branch::Signal);
    let chi_inv_i_conj = response_inverse(delta, jpa, fp, Branch::Idler).conj();
    let det = chi_inv_s * chi_inv_i_conj - drive.omega_pump_amp * drive.omega_pump_amp / 4.0;
    if det.norm() <= THRESHOLD_FLOOR {
        return Err(Error::AtThreshold { denominator_abs: det.norm() });
    }
    let one_minus_r = Complex64::new(1.0, 0.0) - r_s;
    Ok(-r_s.conj() / fp.eta0
        + fp.eta * fp.eta0 / one_minus_r
        + fp.eta * fp.eta0 * jpa.kappa * chi_inv_i_conj / (one_minus_r * one_minus_r * det))
}

/// Reflection of the environment alone, measured with the JPA far detuned:
/// S11_ref = −R*/η₀ + ηη₀·e^{iφ_r}/(1 − R·e^{iφ_r}).
pub fn reference_spectrum(delta: f64, fp: &FabryPerotParams) -> Complex64 {
    let r = round_trip_coeff(delta, fp, Branch::Signal);
    let phase = Complex64::from_polar(1.0, fp.phi_ref);
    -r.conj() / fp.eta0 + fp.eta * fp.eta0 * phase / (Complex64::new(1.0, 0.0) - r * phase)
}

/// A reference-normalized point.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedPoint {
    /// S̃11 = S11/S11_ref.
    pub s11_tilde: Complex64,
    /// Normalized power gain G̃ = |S̃11|².
    pub gain_tilde: f64,
    /// Net gain of the combined system, G_net = η₀²·G̃.
    pub net_gain: f64,
}

/// Normalizes the (pumped or unpumped) reflection by the far-detuned
/// reference and forms the net gain.
pub fn normalized_spectrum(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: Option<&DriveParams>,
) -> Result<NormalizedPoint> {
    let s11 = match drive {
        Some(d) => gain_spectrum(delta, jpa, fp, d)?,
        None => reflection_spectrum(delta, jpa, fp),
    };
    let reference = reference_spectrum(delta, fp);
    let magnitude = reference.norm();
    if magnitude < NORMALIZATION_FLOOR {
        return Err(Error::NormalizationUnderflow { magnitude, floor: NORMALIZATION_FLOOR });
    }
    let s11_tilde = s11 / reference;
    let gain_tilde = s11_tilde.norm_sqr();
    Ok(NormalizedPoint { s11_tilde, gain_tilde, net_gain: fp.eta0 * fp.eta0 * gain_tilde })
}

/// Which quantity a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Unpumped complex S11.
    Reflection,
    /// Pumped complex S11 (needs a drive).
    Gain,
    /// Normalized complex S̃11 (pumped when a drive is present).
    Normalized,
    /// Net gain in dB (pumped when a drive is present).
    NetGainDb,
}

/// Evaluates a pointwise quantity over a detuning grid. Points are
/// independent and evaluated in parallel; assembly order is the grid order.
pub fn sweep(
    grid: &DetuningGrid,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: Option<&DriveParams>,
    kind: SweepKind,
) -> Result<Spectrum> {
    fp.validate()?;
    let detunings = grid.points();
    match kind {
        SweepKind::Reflection => {
            let values: Vec<Complex64> = detunings
                .par_iter()
                .map(|&d| reflection_spectrum(d, jpa, fp))
                .collect();
            Spectrum::new(detunings, SpectrumData::Complex(values), SpectrumKind::ComplexS11)
        }
        SweepKind::Gain => {
            let d = drive.ok_or_else(|| Error::Domain("gain sweep needs a drive".into()))?;
            let values: Result<Vec<Complex64>> = detunings
                .par_iter()
                .map(|&x| gain_spectrum(x, jpa, fp, d))
                .collect();
            Spectrum::new(detunings, SpectrumData::Complex(values?), SpectrumKind::ComplexS11)
        }
        SweepKind::Normalized => {
            let values: Result<Vec<Complex64>> = detunings
                .par_iter()
                .map(|&x| normalized_spectrum(x, jpa, fp, drive).map(|p| p.s11_tilde))
                .collect();
            Spectrum::new(detunings, SpectrumData::Complex(values?), SpectrumKind::NormalizedS11)
        }
        SweepKind::NetGainDb => {
            let values: Result<Vec<f64>> = detunings
                .par_iter()
                .map(|&x| normalized_spectrum(x, jpa, fp, drive).map(|p| 10.0 * p.net_gain.log10()))
                .collect();
            Spectrum::new(detunings, SpectrumData::Gain(values?), SpectrumKind::NetGainDb)
        }
    }
}

/// Smallest pump amplitude that reaches the parametric threshold anywhere
/// on the grid; gain formulas are valid strictly below it.
pub fn threshold_pump_amplitude(grid: &DetuningGrid, jpa: &JpaParams, fp: &FabryPerotParams) -> f64 {
    grid.points()
        .iter()
        .map(|&d| {
            let chi_s = response_inverse(d, jpa, fp, Branch::Signal);
            let chi_i_conj = response_inverse(d, jpa, fp, Branch::Idler).conj();
            2.0 * (chi_s * chi_i_conj).norm().sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Calibrates Ω_p so the maximum on-chip power gain max|S11|² over the grid
/// equals the target (linear). Bisection against the monotone peak gain.
pub fn calibrate_drive_for_peak_gain(
    grid: &DetuningGrid,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    target_gain_linear: f64,
) -> Result<DriveParams> {
    if !(target_gain_linear > 1.0) {
        return Err(Error::Domain("target gain must exceed 1".into()));
    }
    let detunings = grid.points();
    let peak = |omega_p: f64| -> Result<f64> {
        let drive = DriveParams { omega_pump_amp: omega_p };
        let mut max = f64::NEG_INFINITY;
        for &d in &detunings {
            let g = gain_spectrum(d, jpa, fp, &drive)?.norm_sqr();
            if g > max {
                max = g;
            }
        }
        Ok(max)
    };
    let mut lo = 0.0;
    // 2*sqrt(min |chi_s chi_i*|) only lower-bounds the oscillation
    // threshold (the determinant is complex away from the resonant
    // detunings), so grow the cap until the target peak is bracketed or
    // an evaluation actually hits the threshold floor.
    let mut hi = 0.999_999 * threshold_pump_amplitude(grid, jpa, fp);
    let mut peak_hi = peak(hi)?;
    let mut guard = 0;
    while peak_hi < target_gain_linear && guard < 2000 {
        guard += 1;
        let cand = hi * 1.01;
        match peak(cand) {
            Ok(v) => {
                lo = hi;
                hi = cand;
                peak_hi = v;
            }
            Err(_) => break,
        }
    }
    if peak_hi < target_gain_linear {
        return Err(Error::Domain(format!(
            "target gain {target_gain_linear} not reachable below threshold"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if peak(mid)? < target_gain_linear {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    DriveParams::new(0.5 * (lo + hi))
}
