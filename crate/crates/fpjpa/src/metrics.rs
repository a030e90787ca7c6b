//! Scalar figures of merit of gain spectra: 3-dB bandwidth, the
//! gain-bandwidth exponent, ripple visibility and its map over the
//! environment parameters, and the saturation photon-flux scaling.

use rayon::prelude::*;

use crate::circuit::JpaParams;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::interference::{
    calibrate_drive_for_peak_gain, gain_spectrum, sweep, DriveParams, FabryPerotParams, SweepKind,
};
use crate::spectrum::{DetuningGrid, Spectrum};

/// Gain figures of merit extracted from one spectrum.
#[derive(Debug, Clone, Copy)]
pub struct GainMetrics {
    /// Peak gain, linear.
    pub max_gain_linear: f64,
    /// Full 3-dB bandwidth (rad/s).
    pub bandwidth_3db: f64,
    /// Gain-bandwidth exponent α.
    pub gb_exponent: Option<f64>,
    /// Other lobes also reach half maximum outside the measured interval.
    pub multi_lobe: bool,
}

/// 3-dB bandwidth result.
#[derive(Debug, Clone, Copy)]
pub struct Bandwidth {
    /// Full width of the contiguous half-power interval around the peak
    /// (rad/s), edges located by linear interpolation.
    pub full_width: f64,
    /// Peak gain, linear.
    pub peak_gain: f64,
    /// Detuning of the peak sample (rad/s).
    pub peak_detuning: f64,
    /// Samples outside the contiguous interval also reach half maximum.
    pub multi_lobe: bool,
}

/// Measures the full 3-dB width of the contiguous interval around the
/// global peak of a net-gain spectrum. The peak must be interior and
/// non-flat; multi-lobed spectra are measured around the main lobe and
/// flagged.
pub fn bandwidth_3db(spectrum: &Spectrum) -> Result<Bandwidth> {
    let gain = spectrum.gain_linear()?;
    let detunings = &spectrum.detunings;
    if gain.len() < 3 {
        return Err(Error::InconclusiveBandwidth("need at least 3 samples".into()));
    }
    let (peak_idx, &peak) = gain
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("gain values must not be NaN"))
        .expect("non-empty");
    let min = gain.iter().cloned().fold(f64::INFINITY, f64::min);
    if peak == min {
        return Err(Error::InconclusiveBandwidth("flat spectrum has no unique peak".into()));
    }
    if peak_idx == 0 || peak_idx == gain.len() - 1 {
        return Err(Error::InconclusiveBandwidth("peak sits on the grid boundary".into()));
    }
    let half = peak / 2.0;

    let mut lo = peak_idx;
    while lo > 0 && gain[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < gain.len() && gain[hi + 1] >= half {
        hi += 1;
    }
    if lo == 0 || hi == gain.len() - 1 {
        return Err(Error::InconclusiveBandwidth(
            "half-power interval touches the grid boundary".into(),
        ));
    }
    let left = detunings[lo - 1]
        + (detunings[lo] - detunings[lo - 1]) * (half - gain[lo - 1]) / (gain[lo] - gain[lo - 1]);
    let right = detunings[hi]
        + (detunings[hi + 1] - detunings[hi]) * (half - gain[hi]) / (gain[hi + 1] - gain[hi]);

    let multi_lobe = gain[..lo].iter().any(|&g| g >= half) || gain[hi + 1..].iter().any(|&g| g >= half);
    Ok(Bandwidth {
        full_width: right - left,
        peak_gain: peak,
        peak_detuning: detunings[peak_idx],
        multi_lobe,
    })
}

/// Gain-bandwidth exponent α from B·G^α = κ_tot/2.
///
/// `half_bandwidth` is the half-bandwidth (half of the full 3-dB width for
/// a symmetric peak); with that convention a single-pole amplifier gives
/// α ≈ 0.5 and a two-pole flat-top amplifier α ≈ 0.25.
pub fn gb_exponent(half_bandwidth: f64, gain: f64, kappa_tot: f64) -> Result<f64> {
    if !(gain > 1.0) {
        return Err(Error::Domain(format!("gain must exceed 1, got {gain}")));
    }
    if !(half_bandwidth > 0.0) {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    Ok((kappa_tot / (2.0 * half_bandwidth)).ln() / gain.ln())
}

/// Grid used for visibility evaluation.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityGrid {
    /// Points across the sweep; the span is ±2Δ around the JPA frequency.
    pub points: usize,
}

impl Default for VisibilityGrid {
    fn default() -> Self {
        VisibilityGrid { points: 2001 }
    }
}

/// Normalized contrast between the gain maximum and the center-frequency
/// gain; invariant under overall rescaling of the gains.
pub fn visibility_from_gains(max_gain: f64, center_gain: f64) -> f64 {
    let max = max_gain.max(center_gain);
    (max - center_gain) / (max + center_gain)
}

/// Ripple visibility V = (max|S11|² − |S11(0)|²)/(max|S11|² + |S11(0)|²),
/// evaluated on a dense grid over δ ∈ [−2Δ, 2Δ].
pub fn ripple_visibility(
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
    grid: VisibilityGrid,
) -> Result<f64> {
    let detunings = DetuningGrid::new(-2.0 * fp.fsr, 2.0 * fp.fsr, grid.points.max(3))?;
    let mut max = f64::NEG_INFINITY;
    for d in detunings.points() {
        let g = gain_spectrum(d, jpa, fp, drive)?.norm_sqr();
        if g > max {
            max = g;
        }
    }
    let center = gain_spectrum(0.0, jpa, fp, drive)?.norm_sqr();
    Ok(visibility_from_gains(max, center))
}

/// Visibility corresponding to a peak-to-center ripple of `ripple_db`.
pub fn visibility_of_ripple_db(ripple_db: f64) -> f64 {
    let r = 10f64.powf(ripple_db / 10.0);
    (r - 1.0) / (r + 1.0)
}

/// Configuration of the ripple-visibility map.
#[derive(Debug, Clone)]
pub struct VisibilityMapConfig {
    /// JPA rates; the pump is calibrated once against this device.
    pub jpa: JpaParams,
    /// One-way propagation transmittance of the environment.
    pub eta0: f64,
    /// Round-trip phase (resonant case is 0).
    pub phi0: f64,
    /// Peak gain (dB) the pump is calibrated to in the interference-free
    /// (η = 1) configuration.
    pub map_gain_db: f64,
    /// Mirror reflectances 1−η to scan.
    pub one_minus_eta: Vec<f64>,
    /// Free spectral ranges in units of the effective bandwidth.
    pub fsr_over_beff: Vec<f64>,
    /// Visibility evaluation grid.
    pub grid: VisibilityGrid,
}

impl VisibilityMapConfig {
    /// Defaults matching the published map: κ₀/2π = 10 MHz, η₀ = 0.9,
    /// φ₀ = 0; κ/2π = 280 MHz and a 25 dB calibration gain.
    pub fn with_default_device(one_minus_eta: Vec<f64>, fsr_over_beff: Vec<f64>) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        VisibilityMapConfig {
            jpa: JpaParams::from_rates(two_pi * 9.5e9, two_pi * 280e6, two_pi * 10e6),
            eta0: 0.9,
            phi0: 0.0,
            map_gain_db: 25.0,
            one_minus_eta,
            fsr_over_beff,
            grid: VisibilityGrid::default(),
        }
    }
}

/// The computed map: `values[i][j]` is the visibility at
/// `one_minus_eta[i]`, `fsr_over_beff[j]`.
#[derive(Debug, Clone)]
pub struct VisibilityMap {
    pub one_minus_eta: Vec<f64>,
    pub fsr_over_beff: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Effective (η = 1) full 3-dB bandwidth at the calibrated pump (rad/s).
    pub b_eff: f64,
    /// The calibrated pump amplitude (rad/s).
    pub omega_pump_amp: f64,
}

/// Effective interference-free bandwidth: the full 3-dB width of the
/// η = 1 gain spectrum at the given drive.
pub fn effective_bandwidth(jpa: &JpaParams, eta0: f64, drive: &DriveParams) -> Result<f64> {
    let fp = FabryPerotParams::new(1.0, eta0, jpa.kappa, 0.0, 0.0)?;
    let span = 3.0 * jpa.kappa_total();
    let grid = DetuningGrid::new(-span, span, 120_001)?;
    let spec = sweep(&grid, jpa, &fp, Some(drive), SweepKind::Gain)?;
    let gains: Vec<f64> = spec.complex_values()?.iter().map(|v| v.norm_sqr()).collect();
    let spectrum = Spectrum::new(
        spec.detunings.clone(),
        crate::spectrum::SpectrumData::Gain(gains),
        crate::spectrum::SpectrumKind::NetGainLinear,
    )?;
    Ok(bandwidth_3db(&spectrum)?.full_width)
}

/// Computes the ripple-visibility map. The pump is calibrated once in the
/// η = 1 configuration to `map_gain_db`, the effective bandwidth is taken
/// at that pump, and each cell evaluates the dressed spectrum. Rows are
/// evaluated in parallel.
pub fn visibility_map(config: &VisibilityMapConfig) -> Result<VisibilityMap> {
    let target = 10f64.powf(config.map_gain_db / 10.0);
    let fp_free = FabryPerotParams::new(1.0, config.eta0, config.jpa.kappa, config.phi0, 0.0)?;
    let span = 3.0 * config.jpa.kappa_total();
    let cal_grid = DetuningGrid::new(-span, span, 24_001)?;
    let drive = calibrate_drive_for_peak_gain(&cal_grid, &config.jpa, &fp_free, target)?;
    let b_eff = effective_bandwidth(&config.jpa, config.eta0, &drive)?;

    let values: Result<Vec<Vec<f64>>> = config
        .one_minus_eta
        .par_iter()
        .map(|&x| {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Domain(format!("1-eta must lie in [0, 1), got {x}")));
            }
            config
                .fsr_over_beff
                .iter()
                .map(|&ratio| {
                    if x == 0.0 {
                        // Transparent mirror: no ripples by construction.
                        return Ok(0.0);
                    }
                    let fp = FabryPerotParams::new(
                        1.0 - x,
                        config.eta0,
                        ratio * b_eff,
                        config.phi0,
                        0.0,
                    )?;
                    ripple_visibility(&config.jpa, &fp, &drive, config.grid)
                })
                .collect()
        })
        .collect();

    Ok(VisibilityMap {
        one_minus_eta: config.one_minus_eta.clone(),
        fsr_over_beff: config.fsr_over_beff.clone(),
        values: values?,
        b_eff,
        omega_pump_amp: drive.omega_pump_amp,
    })
}

/// Saturation input photon flux, n_sat = prefactor·κ²/(G·|K|). The
/// proportionality constant is a declared calibration input; only the
/// scaling is modeled. A vanishing Kerr coefficient returns infinity.
pub fn saturation_input_flux(kappa: f64, gain: f64, kerr: f64, prefactor: f64) -> Result<f64> {
    if !(gain > 1.0) {
        return Err(Error::Domain(format!("gain must exceed 1, got {gain}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain("kappa must be positive".into()));
    }
    if kerr == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(prefactor * kappa * kappa / (gain * kerr.abs()))
}

/// Converts a photon flux at ω_s into dBm.
pub fn photon_flux_to_dbm(omega_s: f64, flux: f64) -> f64 {
    10.0 * (HBAR * omega_s * flux / 1e-3).log10()
}

/// Extracts metrics from a net-gain spectrum. α uses the half-bandwidth
/// convention and needs the unpumped total linewidth.
pub fn gain_metrics(spectrum: &Spectrum, kappa_tot: Option<f64>) -> Result<GainMetrics> {
    let bw = bandwidth_3db(spectrum)?;
    let gb = match kappa_tot {
        Some(kt) => Some(gb_exponent(bw.full_width / 2.0, bw.peak_gain, kt)?),
        None => None,
    };
    Ok(GainMetrics {
        max_gain_linear: bw.peak_gain,
        bandwidth_3db: bw.full_width,
        gb_exponent: gb,
        multi_lobe: bw.multi_lobe,
    })
}
