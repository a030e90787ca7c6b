//! Nonlinear least-squares extraction of JPA and environment parameters
//! from normalized reflection and gain spectra.
//!
//! The reflection fit works on stacked real/imaginary residuals of the
//! normalized complex spectrum; the multi-power gain fit works on dB
//! residuals with the environment shared across pump powers and the pump
//! amplitudes constrained to Ω_p = c_p·√P. Both run from a small lattice
//! of phase starts and keep the best optimum.

pub mod lm;

use rayon::prelude::*;

use crate::circuit::JpaParams;
use crate::error::{Error, Result};
use crate::interference::{
    normalized_spectrum, reference_spectrum, reflection_spectrum, wrap_phase,
    DriveParams, FabryPerotParams,
};
use crate::spectrum::{Spectrum, SpectrumKind};
pub use lm::{LmOptions, Param, Transform};

/// A fitted parameter with its asymptotic uncertainty.
#[derive(Debug, Clone)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// One-sigma uncertainty from the Gauss-Newton covariance; absent for
    /// fixed parameters or unreliable covariances.
    pub uncertainty: Option<f64>,
    pub fixed: bool,
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<FittedParam>,
    /// Covariance over the free parameters, row-major, physical units.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub covariance_reliable: bool,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Objective-gradient infinity norm at the optimum.
    pub grad_inf_norm: f64,
    /// Residual norm per dataset.
    pub per_dataset_residuals: Vec<f64>,
    /// Index of the winning start in the multi-start schedule.
    pub best_start: usize,
    /// Objective value per start, in schedule order.
    pub start_costs: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Initial value plus fixed/free mask for one parameter.
#[derive(Debug, Clone, Copy)]
pub struct ParamInit {
    pub value: f64,
    pub fixed: bool,
}

impl ParamInit {
    pub fn free(value: f64) -> Self {
        ParamInit { value, fixed: false }
    }

    pub fn fixed(value: f64) -> Self {
        ParamInit { value, fixed: true }
    }
}

/// Environment parameter initialization shared by both fit kinds.
#[derive(Debug, Clone, Copy)]
pub struct FabryPerotInit {
    pub eta: ParamInit,
    pub eta0: ParamInit,
    pub fsr: ParamInit,
    pub phi0: ParamInit,
    pub phi_ref: ParamInit,
}

/// Reflection-fit problem: one normalized complex spectrum.
#[derive(Debug, Clone)]
pub struct ReflectionProblem {
    pub data: Spectrum,
    /// Center-frequency offset ω_a − ω_a^nominal (rad/s).
    pub delta0: ParamInit,
    pub kappa: ParamInit,
    pub kappa0: ParamInit,
    pub fp: FabryPerotInit,
}

/// One pumped dataset of the joint gain fit.
#[derive(Debug, Clone)]
pub struct GainDataset {
    /// Normalized gain in dB versus detuning.
    pub spectrum: Spectrum,
    /// Pump power at the source (W).
    pub pump_power: f64,
}

/// Joint multi-power gain-fit problem.
#[derive(Debug, Clone)]
pub struct GainMultiProblem {
    pub datasets: Vec<GainDataset>,
    pub fp: FabryPerotInit,
    /// Per-dataset (κ, κ0) initialization, one entry per dataset.
    pub rates: Vec<(ParamInit, ParamInit)>,
    /// Pump conversion factor c_p with Ω_p = c_p·√P (rad/s/√W).
    pub c_p: ParamInit,
}

/// Multi-start and solver options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Start the phase parameters from a lattice in addition to the
    /// user-supplied initialization.
    pub phase_lattice: bool,
    /// Additional starts jittered around the initialization (seeded).
    pub extra_starts: usize,
    /// Seed for the jittered starts.
    pub seed: u64,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { phase_lattice: true, extra_starts: 0, seed: 0, lm: LmOptions::default() }
    }
}

const PHASE_LATTICE: [(f64, f64); 8] = [
    (0.0, 0.0),
    (std::f64::consts::FRAC_PI_2, 0.0),
    (std::f64::consts::PI, 0.0),
    (-std::f64::consts::FRAC_PI_2, 0.0),
    (0.0, std::f64::consts::PI),
    (std::f64::consts::FRAC_PI_2, std::f64::consts::PI),
    (std::f64::consts::PI, std::f64::consts::PI),
    (-std::f64::consts::FRAC_PI_2, std::f64::consts::PI),
];

fn push_fp_params(params: &mut Vec<Param>, fp: &FabryPerotInit) {
    params.push(param("eta", fp.eta, Transform::LogisticUnit));
    params.push(param("eta0", fp.eta0, Transform::LogisticUnit));
    params.push(param("fsr", fp.fsr, Transform::LogPositive));
    params.push(param("phi0", fp.phi0, Transform::Unbounded));
    params.push(param("phi_ref", fp.phi_ref, Transform::Unbounded));
}

fn param(name: &str, init: ParamInit, transform: Transform) -> Param {
    if init.fixed {
        Param::fixed(name, init.value, transform)
    } else {
        Param::free(name, init.value, transform)
    }
}

fn fp_from_slice(p: &[f64]) -> Result<FabryPerotParams> {
    FabryPerotParams::new(p[0], p[1], p[2], p[3], p[4])
}

/// Both problems reject empty datasets.
fn require_data(len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::FitProblem("empty dataset".into()));
    }
    Ok(())
}

struct StartOutcome {
    start: usize,
    outcome: lm::LmOutcome,
}

fn run_starts<F>(
    base: &[Param],
    starts: Vec<Vec<f64>>,
    options: &FitOptions,
    residual: F,
) -> Result<(lm::LmOutcome, usize, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let results: Vec<Result<StartOutcome>> = starts
        .par_iter()
        .enumerate()
        .map(|(si, start)| {
            let mut params = base.to_vec();
            for (p, &v) in params.iter_mut().zip(start.iter()) {
                p.value = v;
            }
            let out = lm::levenberg_marquardt(&params, |p| residual(p), &options.lm)?;
            Ok(StartOutcome { start: si, outcome: out })
        })
        .collect();

    let mut costs = vec![f64::INFINITY; starts.len()];
    let mut best: Option<StartOutcome> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(s) => {
                costs[s.start] = s.outcome.cost;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        s.outcome.cost < b.outcome.cost
                            || (s.outcome.cost == b.outcome.cost && s.start < b.start)
                    }
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(b) => Ok((b.outcome, b.start, costs)),
        None => Err(last_err.unwrap_or_else(|| Error::FitProblem("no start converged".into()))),
    }
}

fn build_result(
    params: &[Param],
    outcome: lm::LmOutcome,
    best_start: usize,
    start_costs: Vec<f64>,
    per_dataset_residuals: Vec<f64>,
) -> FitResult {
    let free = &outcome.free_indices;
    let sigmas: Vec<Option<f64>> = match (&outcome.covariance, outcome.covariance_reliable) {
        (Some(cov), true) => {
            (0..free.len()).map(|k| Some(cov[(k, k)].max(0.0).sqrt())).collect()
        }
        _ => vec![None; free.len()],
    };
    let mut fitted = Vec::with_capacity(params.len());
    for (i, p) in params.iter().enumerate() {
        let uncertainty = free
            .iter()
            .position(|&f| f == i)
            .and_then(|k| sigmas.get(k).cloned().flatten());
        let mut value = outcome.params[i];
        if p.name.starts_with("phi") {
            value = wrap_phase(value);
        }
        fitted.push(FittedParam { name: p.name.clone(), value, uncertainty, fixed: p.fixed });
    }
    let covariance = outcome
        .covariance
        .as_ref()
        .map(|c| (0..free.len()).map(|i| (0..free.len()).map(|j| c[(i, j)]).collect()).collect());
    FitResult {
        params: fitted,
        covariance,
        covariance_reliable: outcome.covariance_reliable,
        residual_norm: outcome.residual_norm,
        n_iterations: outcome.n_iterations,
        converged: outcome.converged,
        grad_inf_norm: outcome.grad_inf_norm,
        per_dataset_residuals,
        best_start,
        start_costs,
    }
}

/// Fits the normalized complex reflection model to one dataset.
///
/// Free parameters: center offset, κ, κ0, η, η0, Δ, φ0, φ_r (modulo the
/// fixed mask). Residuals are the stacked real and imaginary parts of
/// S̃11(model) − S̃11(data).
pub fn fit_reflection(problem: &ReflectionProblem, options: &FitOptions) -> Result<FitResult> {
    if problem.data.kind != SpectrumKind::NormalizedS11 {
        return Err(Error::FitProblem("reflection fit needs a normalized complex spectrum".into()));
    }
    require_data(problem.data.len())?;
    let detunings = problem.data.detunings.clone();
    let data = problem.data.complex_values()?.to_vec();

    let mut base = vec![
        param("delta0", problem.delta0, Transform::Unbounded),
        param("kappa", problem.kappa, Transform::LogPositive),
        param("kappa0", problem.kappa0, Transform::LogPositive),
    ];
    push_fp_params(&mut base, &problem.fp);

    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let delta0 = p[0];
        let jpa = JpaParams::from_rates(1.0, p[1], p[2]);
        let fp = fp_from_slice(&p[3..8])?;
        let mut out = Vec::with_capacity(2 * data.len());
        for (&d, &meas) in detunings.iter().zip(&data) {
            let delta = d - delta0;
            let model = reflection_spectrum(delta, &jpa, &fp) / reference_spectrum(delta, &fp);
            out.push(model.re - meas.re);
            out.push(model.im - meas.im);
        }
        Ok(out)
    };

    let starts = phase_starts(&base, 6, 7, options);
    let (outcome, best_start, costs) = run_starts(&base, starts, options, residual)?;
    let norm = outcome.residual_norm;
    Ok(build_result(&base, outcome, best_start, costs, vec![norm]))
}

/// Fits every pumped dataset jointly: shared environment, per-power rates,
/// and a single pump conversion factor.
pub fn fit_gain_multi(problem: &GainMultiProblem, options: &FitOptions) -> Result<FitResult> {
    if problem.datasets.is_empty() {
        return Err(Error::FitProblem("at least one gain dataset required".into()));
    }
    if problem.rates.len() != problem.datasets.len() {
        return Err(Error::FitProblem("one (kappa, kappa0) init per dataset required".into()));
    }
    for ds in &problem.datasets {
        if ds.spectrum.kind != SpectrumKind::NetGainDb {
            return Err(Error::FitProblem("gain fit needs dB gain spectra".into()));
        }
        require_data(ds.spectrum.len())?;
        if !(ds.pump_power > 0.0) {
            return Err(Error::FitProblem("pump powers must be positive".into()));
        }
    }

    let mut base = Vec::new();
    push_fp_params(&mut base, &problem.fp);
    base.push(param("c_p", problem.c_p, Transform::LogPositive));
    for (i, (k, k0)) in problem.rates.iter().enumerate() {
        base.push(param(&format!("kappa_{i}"), *k, Transform::LogPositive));
        base.push(param(&format!("kappa0_{i}"), *k0, Transform::LogPositive));
    }

    let datasets: Vec<(Vec<f64>, Vec<f64>, f64)> = problem
        .datasets
        .iter()
        .map(|ds| {
            let db: Vec<f64> =
                ds.spectrum.gain_linear()?.iter().map(|g| 10.0 * g.log10()).collect();
            Ok((ds.spectrum.detunings.clone(), db, ds.pump_power))
        })
        .collect::<Result<_>>()?;

    // Reject datasets driven at or above the parametric threshold at the
    // initial point: |omega_p|^2/4 must stay below |chi_s * chi_i^*| on
    // the whole grid, otherwise the below-threshold gain model does not
    // apply to that dataset.
    {
        let fp = FabryPerotParams::new(
            problem.fp.eta.value,
            problem.fp.eta0.value,
            problem.fp.fsr.value,
            problem.fp.phi0.value,
            problem.fp.phi_ref.value,
        )?;
        for (i, (dets, _, power)) in datasets.iter().enumerate() {
            let jpa =
                JpaParams::from_rates(1.0, problem.rates[i].0.value, problem.rates[i].1.value);
            let omega_p = problem.c_p.value * power.sqrt();
            for &d in dets {
                let chi_s = crate::interference::response_inverse(d, &jpa, &fp, crate::interference::Branch::Signal);
                let chi_i = crate::interference::response_inverse(d, &jpa, &fp, crate::interference::Branch::Idler);
                if omega_p * omega_p / 4.0 >= (chi_s * chi_i.conj()).norm() {
                    return Err(Error::FitProblem(format!(
                        "dataset {i} sits at or above threshold at the initial parameters"
                    )));
                }
            }
        }
    }

    let n_datasets = datasets.len();
    let residual = move |p: &[f64]| -> Result<Vec<f64>> {
        let fp = fp_from_slice(&p[0..5])?;
        let c_p = p[5];
        let mut out = Vec::new();
        for (i, (dets, data_db, power)) in datasets.iter().enumerate() {
            let kappa = p[6 + 2 * i];
            let kappa0 = p[7 + 2 * i];
            let jpa = JpaParams::from_rates(1.0, kappa, kappa0);
            let drive = DriveParams::new(c_p * power.sqrt())?;
            for (&d, &meas_db) in dets.iter().zip(data_db) {
                let pt = normalized_spectrum(d, &jpa, &fp, Some(&drive))?;
                out.push(10.0 * pt.gain_tilde.log10() - meas_db);
            }
        }
        Ok(out)
    };

    let starts = phase_starts(&base, 3, 4, options);
    let (outcome, best_start, costs) = run_starts(&base, starts, options, residual)?;

    // Per-dataset residual norms at the optimum.
    let fp = fp_from_slice(&outcome.params[0..5])?;
    let c_p = outcome.params[5];
    let mut per_dataset = Vec::with_capacity(n_datasets);
    for (i, ds) in problem.datasets.iter().enumerate() {
        let jpa = JpaParams::from_rates(1.0, outcome.params[6 + 2 * i], outcome.params[7 + 2 * i]);
        let drive = DriveParams::new(c_p * ds.pump_power.sqrt())?;
        let mut ss = 0.0;
        let data_db: Vec<f64> =
            ds.spectrum.gain_linear()?.iter().map(|g| 10.0 * g.log10()).collect();
        for (&d, &meas) in ds.spectrum.detunings.iter().zip(&data_db) {
            let pt = normalized_spectrum(d, &jpa, &fp, Some(&drive))?;
            let r = 10.0 * pt.gain_tilde.log10() - meas;
            ss += r * r;
        }
        per_dataset.push(ss.sqrt());
    }

    Ok(build_result(&base, outcome, best_start, costs, per_dataset))
}

/// Builds the start list: the user initialization, then the 8-point
/// (φ0, φ_r) lattice when enabled and those parameters are free, then any
/// seeded jittered starts.
fn phase_starts(
    base: &[Param],
    phi0_idx: usize,
    phi_ref_idx: usize,
    options: &FitOptions,
) -> Vec<Vec<f64>> {
    let init: Vec<f64> = base.iter().map(|p| p.value).collect();
    let mut starts = vec![init.clone()];
    if options.phase_lattice && (!base[phi0_idx].fixed || !base[phi_ref_idx].fixed) {
        for (phi0, phi_ref) in PHASE_LATTICE {
            let mut s = init.clone();
            if !base[phi0_idx].fixed {
                s[phi0_idx] = phi0;
            }
            if !base[phi_ref_idx].fixed {
                s[phi_ref_idx] = phi_ref;
            }
            starts.push(s);
        }
    }
    if options.extra_starts > 0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..options.extra_starts {
            let mut s = init.clone();
            for (k, p) in base.iter().enumerate() {
                if p.fixed {
                    continue;
                }
                // Jitter in internal coordinates, scaled per transform.
                let amplitude = match p.transform {
                    Transform::LogPositive => 0.35,
                    Transform::LogisticUnit => 1.0,
                    Transform::Unbounded => 0.5,
                };
                let u = p.transform.to_internal(p.value) + rng.gen_range(-amplitude..amplitude);
                s[k] = p.transform.to_physical(u);
            }
            starts.push(s);
        }
    }
    starts
}

/// Free spectral range and residual mirror phase from wrapped round-trip
/// phases measured at several JPA frequencies.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSlopeFit {
    /// Free spectral range from the slope (rad/s); infinite for a flat
    /// phase sequence.
    pub fsr_from_slope: f64,
    /// Intercept phase φ_R.
    pub phi_r: f64,
    /// Regression slope dφ0/dω_a (s).
    pub slope: f64,
}

/// Unwraps φ0(ω_a) by nearest-2π continuation in frequency order and
/// fits a line; the slope is 2π/Δ.
pub fn unwrap_phase_vs_frequency(points: &[(f64, f64)]) -> Result<PhaseSlopeFit> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two (omega_a, phi0) points".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("frequencies must not be NaN"));

    let mut unwrapped = Vec::with_capacity(sorted.len());
    let mut prev = sorted[0].1;
    unwrapped.push((sorted[0].0, prev));
    for &(w, phi) in &sorted[1..] {
        let next = prev + wrap_phase(phi - prev);
        unwrapped.push((w, next));
        prev = next;
    }

    let n = unwrapped.len() as f64;
    let sw: f64 = unwrapped.iter().map(|p| p.0).sum();
    let sp: f64 = unwrapped.iter().map(|p| p.1).sum();
    let sww: f64 = unwrapped.iter().map(|p| p.0 * p.0).sum();
    let swp: f64 = unwrapped.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sww - sw * sw;
    if denom == 0.0 {
        return Err(Error::Domain("degenerate frequency spread".into()));
    }
    let slope = (n * swp - sw * sp) / denom;
    let intercept = (sp - slope * sw) / n;
    let fsr = if slope.abs() < f64::EPSILON {
        f64::INFINITY
    } else {
        2.0 * std::f64::consts::PI / slope
    };
    Ok(PhaseSlopeFit { fsr_from_slope: fsr, phi_r: intercept, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::wrap_phase;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn phase_slope_two_exact_points() {
        // Two points on the line phi0 = omega*(2*pi/fsr) + phi_R with
        // fsr/2pi = 140 MHz, close enough in frequency to avoid winding
        // ambiguity.
        let fsr = TWO_PI * 140e6;
        let phi_r = 0.37;
        let ws = [TWO_PI * 9.0e9, TWO_PI * 9.05e9];
        let pts: Vec<(f64, f64)> =
            ws.iter().map(|&w| (w, wrap_phase(w * TWO_PI / fsr + phi_r))).collect();
        let fit = unwrap_phase_vs_frequency(&pts).unwrap();
        assert!((fit.fsr_from_slope - fsr).abs() / fsr < 1e-9, "fsr {}", fit.fsr_from_slope);
    }

    #[test]
    fn phase_slope_flat_sequence() {
        let pts = vec![(1.0e9, 0.4), (2.0e9, 0.4), (3.0e9, 0.4)];
        let fit = unwrap_phase_vs_frequency(&pts).unwrap();
        assert!(fit.fsr_from_slope.is_infinite());
    }

    #[test]
    fn phase_slope_requires_two_points() {
        assert!(unwrap_phase_vs_frequency(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn phase_slope_recovers_noisy_line() {
        // Wrapped phases from a known line with deterministic +-0.05 rad
        // perturbations: slope recovered within 1%.
        let fsr = TWO_PI * 140e6;
        let phi_r = -1.9;
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let w = TWO_PI * (9.0e9 + 10e6 * i as f64);
                let noise = 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 };
                (w, wrap_phase(w * TWO_PI / fsr + phi_r + noise))
            })
            .collect();
        let fit = unwrap_phase_vs_frequency(&pts).unwrap();
        assert!(
            (fit.fsr_from_slope - fsr).abs() / fsr < 0.01,
            "fsr {} vs {}",
            fit.fsr_from_slope,
            fsr
        );
    }
}
