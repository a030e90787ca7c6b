//! Command-line front end: design synthesis, spectrum simulation, fitting,
//! noise calibration, metrics and the visibility map, plus hidden oracle
//! access for debugging.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation error, 4 numerical
//! failure (non-convergence or at-threshold).

#[allow(non_snake_case)]
mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fpjpa::circuit::JpaParams;
use fpjpa::fitting;
use fpjpa::interference::{sweep, DriveParams, SweepKind};
use fpjpa::metrics;
use fpjpa::noise;
use fpjpa::oracle;
use fpjpa::spectrum::{DetuningGrid, Spectrum};

use manifest::*;
use output::{write_atomic, write_csv_atomic, write_json_atomic};

#[derive(Parser)]
#[command(name = "fpjpa", version, about = "JPA + Fabry-Perot environment modeling toolkit")]
struct Cli {
    /// Worker threads for parallel sweeps and fits (FPJPA_JOBS as fallback).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GridArg {
    /// Detuning grid as start,stop,n in Hz.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    grid: GridSpec,
}

#[derive(Debug, Clone, Copy)]
struct GridSpec {
    start_hz: f64,
    stop_hz: f64,
    n: usize,
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected start,stop,n".into());
    }
    let start_hz: f64 = parts[0].trim().parse().map_err(|_| "bad start")?;
    let stop_hz: f64 = parts[1].trim().parse().map_err(|_| "bad stop")?;
    let n: usize = parts[2].trim().parse().map_err(|_| "bad n")?;
    Ok(GridSpec { start_hz, stop_hz, n })
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize circuit values from design targets.
    Design {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Evaluate reflection/gain/normalized spectra over a detuning grid.
    Simulate {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[command(flatten)]
        grid: GridArg,
        /// One of reflection, gain, normalized.
        #[arg(long)]
        kind: String,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Least-squares parameter extraction from spectrum CSVs.
    Fit {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Multi-start budget (1 = initialization only; up to 9 lattice
        /// starts; beyond that seeded jitter).
        #[arg(long, default_value_t = 9)]
        starts: usize,
        /// Seed for jittered extra starts.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Added-noise calibration or model-predicted noise sweeps.
    Noise {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Gain metrics from a spectrum CSV or a parameter set.
    Metrics {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Total unpumped linewidth in Hz, needed for the gain-bandwidth
        /// exponent when the input is a CSV.
        #[arg(long)]
        kappa_tot_hz: Option<f64>,
    },
    /// Ripple-visibility map over (1-eta, fsr/B_eff).
    VisibilityMap {
        #[arg(short = 'i', long)]
        input: PathBuf,
        /// 1-eta grid as start,stop,n.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        eta_grid: GridSpec,
        /// fsr/B_eff grid as start,stop,n.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        fsr_grid: GridSpec,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// Brute-force reference evaluations (debugging aid).
    #[command(hide = true)]
    Oracle {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("FPJPA_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(jobs) = jobs {
        if rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_err() {
            eprintln!("fpjpa: warning: thread pool already initialized");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fpjpa: error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Validation(_) => 3,
        CliError::Numerical(_) => 4,
    }
}

fn lib_error(err: fpjpa::Error) -> CliError {
    use fpjpa::Error::*;
    match err {
        AtThreshold { .. }
        | NonConvergence { .. }
        | NormalizationUnderflow { .. }
        | InconclusiveBandwidth(_)
        | DegenerateDecomposition => CliError::Numerical(err.to_string()),
        _ => CliError::Validation(err.to_string()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad manifest {}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Design { input, output } => cmd_design(&input, &output),
        Command::Simulate { input, grid, kind, output } => {
            cmd_simulate(&input, grid.grid, &kind, &output)
        }
        Command::Fit { input, output, starts, seed } => cmd_fit(&input, &output, starts, seed),
        Command::Noise { input, output } => cmd_noise(&input, &output),
        Command::Metrics { input, output, kappa_tot_hz } => {
            cmd_metrics(&input, &output, kappa_tot_hz)
        }
        Command::VisibilityMap { input, eta_grid, fsr_grid, output } => {
            cmd_visibility_map(&input, eta_grid, fsr_grid, &output)
        }
        Command::Oracle { input, output } => cmd_oracle(&input, &output),
    }
}

fn cmd_design(input: &Path, output: &Path) -> Result<(), CliError> {
    let targets: DesignTargetsJson = read_json(input)?;
    let design = fpjpa::design::synthesize(&targets.to_targets()).map_err(lib_error)?;
    let out = DesignOutputJson {
        circuit: CircuitJson::from_circuit(&design.circuit),
        jpa: JpaJson::from_jpa(&design.jpa),
        l_j_eff_H: design.l_j_eff,
        bias_phi_ex: design.bias.phi_ex,
        bias_phi_ex_eff: design.bias.phi_ex_eff,
    };
    write_json_atomic(output, &out)?;
    println!(
        "design: omega_a = {:.6} GHz, C_i = {:.2} fF, C_kappa = {:.2} fF, L_J_eff = {:.2} pH",
        out.jpa.omega_a_Hz / 1e9,
        out.circuit.c_internal_F * 1e15,
        out.circuit.c_coupling_F * 1e15,
        out.l_j_eff_H * 1e12,
    );
    println!("fpjpa-result command=design status=ok output={}", output.display());
    Ok(())
}

fn cmd_simulate(input: &Path, grid: GridSpec, kind: &str, output: &Path) -> Result<(), CliError> {
    let params: SimulateJson = read_json(input)?;
    let (jpa, drive) = params.resolve().map_err(CliError::Validation)?;
    let fp = params.fabry_perot.to_fp().map_err(lib_error)?;
    let sweep_kind = match kind {
        "reflection" => SweepKind::Reflection,
        "gain" => SweepKind::NetGainDb,
        "normalized" => SweepKind::Normalized,
        other => {
            return Err(CliError::Validation(format!(
                "unknown kind {other:?}; expected reflection, gain or normalized"
            )))
        }
    };
    if matches!(sweep_kind, SweepKind::NetGainDb) && drive.is_none() {
        return Err(CliError::Validation("gain simulation requires a drive block".into()));
    }
    let detunings = DetuningGrid::new(hz_to_rad(grid.start_hz), hz_to_rad(grid.stop_hz), grid.n)
        .map_err(lib_error)?;
    let spectrum =
        sweep(&detunings, &jpa, &fp, drive.as_ref(), sweep_kind).map_err(lib_error)?;
    write_csv_atomic(output, &spectrum)?;
    println!("simulate: {} points ({kind}) over [{}, {}] Hz", grid.n, grid.start_hz, grid.stop_hz);
    println!("fpjpa-result command=simulate status=ok output={}", output.display());
    Ok(())
}

fn load_spectrum(path: &str) -> Result<Spectrum, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot open {path}: {e}")))?;
    Spectrum::read_csv(file).map_err(lib_error)
}

fn result_to_json(result: &fitting::FitResult, units: &[(&str, &str, f64)]) -> FitResultJson {
    // units: (internal name, display unit, divisor to disk units)
    let params = result
        .params
        .iter()
        .map(|p| {
            let (unit, scale) = units
                .iter()
                .find(|(n, _, _)| p.name.starts_with(n))
                .map(|(_, u, s)| (*u, *s))
                .unwrap_or(("", 1.0));
            FittedParamJson {
                name: p.name.clone(),
                value: p.value / scale,
                unit: unit.to_string(),
                uncertainty: p.uncertainty.map(|u| u / scale),
                fixed: p.fixed,
            }
        })
        .collect();
    FitResultJson {
        params,
        residual_norm: result.residual_norm,
        n_iterations: result.n_iterations,
        converged: result.converged,
        covariance_reliable: result.covariance_reliable,
        covariance: result.covariance.clone(),
        per_dataset_residuals: result.per_dataset_residuals.clone(),
        best_start: result.best_start,
        start_costs: result.start_costs.clone(),
    }
}

fn cmd_fit(input: &Path, output: &Path, starts: usize, seed: Option<u64>) -> Result<(), CliError> {
    let manifest: FitManifestJson = read_json(input)?;
    // Start budget: the initialization, up to 8 lattice starts, then
    // seeded jitter for anything beyond.
    let lattice = starts > 1;
    let scheduled = 1 + if lattice { 8 } else { 0 };
    let options = fitting::FitOptions {
        phase_lattice: lattice,
        extra_starts: starts.saturating_sub(scheduled),
        seed: seed.unwrap_or(0),
        ..Default::default()
    };
    match manifest {
        FitManifestJson::Reflection {
            datasets,
            delta0_Hz,
            kappa_Hz,
            kappa0_Hz,
            eta,
            eta0,
            fsr_Hz,
            phi0_rad,
            phi_ref_rad,
        } => {
            let [dataset] = datasets.as_slice() else {
                return Err(CliError::Validation(
                    "reflection fit takes exactly one dataset".into(),
                ));
            };
            let data = load_spectrum(&dataset.csv)?;
            let problem = fitting::ReflectionProblem {
                data,
                delta0: delta0_Hz.to_init(TWO_PI),
                kappa: kappa_Hz.to_init(TWO_PI),
                kappa0: kappa0_Hz.to_init(TWO_PI),
                fp: fitting::FabryPerotInit {
                    eta: eta.to_init(1.0),
                    eta0: eta0.to_init(1.0),
                    fsr: fsr_Hz.to_init(TWO_PI),
                    phi0: phi0_rad.to_init(1.0),
                    phi_ref: phi_ref_rad.to_init(1.0),
                },
            };
            let result = fitting::fit_reflection(&problem, &options).map_err(lib_error)?;
            let json = result_to_json(
                &result,
                &[
                    ("delta0", "Hz", TWO_PI),
                    ("kappa0", "Hz", TWO_PI),
                    ("kappa", "Hz", TWO_PI),
                    ("fsr", "Hz", TWO_PI),
                    ("eta0", "", 1.0),
                    ("eta", "", 1.0),
                    ("phi0", "rad", 1.0),
                    ("phi_ref", "rad", 1.0),
                ],
            );
            write_json_atomic(output, &json)?;
            write_model_overlay_reflection(&result, &problem, output)?;
            print_fit_summary("reflection", &result, output);
        }
        FitManifestJson::GainMulti {
            datasets,
            eta,
            eta0,
            fsr_Hz,
            phi0_rad,
            phi_ref_rad,
            c_p_Hz_per_sqrtW,
            rates,
        } => {
            let mut gain_datasets = Vec::new();
            for d in &datasets {
                let power = d.pump_power_W.ok_or_else(|| {
                    CliError::Validation("gain datasets need pump_power_W".into())
                })?;
                gain_datasets
                    .push(fitting::GainDataset { spectrum: load_spectrum(&d.csv)?, pump_power: power });
            }
            let rate_inits: Vec<(fitting::ParamInit, fitting::ParamInit)> = if rates.len() == 1 {
                std::iter::repeat((
                    rates[0].kappa_Hz.to_init(TWO_PI),
                    rates[0].kappa0_Hz.to_init(TWO_PI),
                ))
                .take(gain_datasets.len())
                .collect()
            } else {
                rates
                    .iter()
                    .map(|r| (r.kappa_Hz.to_init(TWO_PI), r.kappa0_Hz.to_init(TWO_PI)))
                    .collect()
            };
            let problem = fitting::GainMultiProblem {
                datasets: gain_datasets,
                fp: fitting::FabryPerotInit {
                    eta: eta.to_init(1.0),
                    eta0: eta0.to_init(1.0),
                    fsr: fsr_Hz.to_init(TWO_PI),
                    phi0: phi0_rad.to_init(1.0),
                    phi_ref: phi_ref_rad.to_init(1.0),
                },
                rates: rate_inits,
                c_p: c_p_Hz_per_sqrtW.to_init(TWO_PI),
            };
            let result = fitting::fit_gain_multi(&problem, &options).map_err(lib_error)?;
            let json = result_to_json(
                &result,
                &[
                    ("kappa0", "Hz", TWO_PI),
                    ("kappa", "Hz", TWO_PI),
                    ("fsr", "Hz", TWO_PI),
                    ("c_p", "Hz/sqrt(W)", TWO_PI),
                    ("eta0", "", 1.0),
                    ("eta", "", 1.0),
                    ("phi0", "rad", 1.0),
                    ("phi_ref", "rad", 1.0),
                ],
            );
            write_json_atomic(output, &json)?;
            write_model_overlay_gain(&result, &problem, output)?;
            print_fit_summary("gain_multi", &result, output);
        }
    }
    Ok(())
}

fn print_fit_summary(kind: &str, result: &fitting::FitResult, output: &Path) {
    println!("fit ({kind}): converged = {}", result.converged);
    println!("  {:<10} {:>16} {:>14}", "parameter", "value", "sigma");
    for p in &result.params {
        match p.uncertainty {
            Some(u) => println!("  {:<10} {:>16.8e} {:>14.3e}", p.name, p.value, u),
            None => println!("  {:<10} {:>16.8e} {:>14}", p.name, p.value, "-"),
        }
    }
    println!(
        "  residual norm {:.6e} after {} iterations (best start {})",
        result.residual_norm, result.n_iterations, result.best_start
    );
    println!(
        "fpjpa-result command=fit status=ok converged={} residual_norm={:.17e} output={}",
        result.converged,
        result.residual_norm,
        output.display()
    );
}

fn model_output_path(output: &Path, index: usize) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("fit");
    output.with_file_name(format!("{stem}_model_{index}.csv"))
}

fn write_model_overlay_reflection(
    result: &fitting::FitResult,
    problem: &fitting::ReflectionProblem,
    output: &Path,
) -> Result<(), CliError> {
    let get = |n: &str| result.value(n).expect("fit parameter");
    let fp = fpjpa::interference::FabryPerotParams::new(
        get("eta"),
        get("eta0"),
        get("fsr"),
        get("phi0"),
        get("phi_ref"),
    )
    .map_err(lib_error)?;
    let jpa = JpaParams::from_rates(1.0, get("kappa"), get("kappa0"));
    let delta0 = get("delta0");
    let values: Vec<num_complex::Complex64> = problem
        .data
        .detunings
        .iter()
        .map(|&d| {
            fpjpa::interference::reflection_spectrum(d - delta0, &jpa, &fp)
                / fpjpa::interference::reference_spectrum(d - delta0, &fp)
        })
        .collect();
    let model = Spectrum::new(
        problem.data.detunings.clone(),
        fpjpa::spectrum::SpectrumData::Complex(values),
        fpjpa::spectrum::SpectrumKind::NormalizedS11,
    )
    .map_err(lib_error)?;
    write_csv_atomic(&model_output_path(output, 0), &model)
}

fn write_model_overlay_gain(
    result: &fitting::FitResult,
    problem: &fitting::GainMultiProblem,
    output: &Path,
) -> Result<(), CliError> {
    let get = |n: &str| result.value(n).expect("fit parameter");
    let fp = fpjpa::interference::FabryPerotParams::new(
        get("eta"),
        get("eta0"),
        get("fsr"),
        get("phi0"),
        get("phi_ref"),
    )
    .map_err(lib_error)?;
    let c_p = get("c_p");
    for (i, ds) in problem.datasets.iter().enumerate() {
        let jpa = JpaParams::from_rates(
            1.0,
            get(&format!("kappa_{i}")),
            get(&format!("kappa0_{i}")),
        );
        let drive = DriveParams::new(c_p * ds.pump_power.sqrt()).map_err(lib_error)?;
        let db: fpjpa::Result<Vec<f64>> = ds
            .spectrum
            .detunings
            .iter()
            .map(|&d| {
                fpjpa::interference::normalized_spectrum(d, &jpa, &fp, Some(&drive))
                    .map(|p| 10.0 * p.gain_tilde.log10())
            })
            .collect();
        let model = Spectrum::new(
            ds.spectrum.detunings.clone(),
            fpjpa::spectrum::SpectrumData::Gain(db.map_err(lib_error)?),
            fpjpa::spectrum::SpectrumKind::NetGainDb,
        )
        .map_err(lib_error)?;
        write_csv_atomic(&model_output_path(output, i), &model)?;
    }
    Ok(())
}

fn cmd_noise(input: &Path, output: &Path) -> Result<(), CliError> {
    let manifest: NoiseJson = read_json(input)?;
    match manifest {
        NoiseJson::Calibration {
            p_on_s_W,
            p_on_n_W,
            p_off_s_W,
            p_off_n_W,
            p_calib_s_W,
            eta0,
            s11_off_sq,
            kappa_Hz,
            kappa0_Hz,
            n_vac_photons,
            omega_s_Hz,
            b_if_Hz,
        } => {
            let omega_s = hz_to_rad(omega_s_Hz);
            let s11_off = match (s11_off_sq, kappa_Hz, kappa0_Hz) {
                (Some(v), _, _) => v,
                (None, Some(k), Some(k0)) => noise::s11_off_squared(&JpaParams::from_rates(
                    omega_s,
                    hz_to_rad(k),
                    hz_to_rad(k0),
                )),
                _ => {
                    return Err(CliError::Validation(
                        "give s11_off_sq or both kappa_Hz and kappa0_Hz".into(),
                    ))
                }
            };
            let n_vac = n_vac_photons.unwrap_or(0.5);
            let p_vac = n_vac * fpjpa::constants::HBAR * omega_s * b_if_Hz;
            let cal = noise::CalibrationInputs {
                p_on_s: p_on_s_W,
                p_on_n: p_on_n_W,
                p_off_s: p_off_s_W,
                p_off_n: p_off_n_W,
                p_calib_s: p_calib_s_W,
                eta0,
                s11_off_sq: s11_off,
                p_vac_n: p_vac,
                omega_s,
                b_if: b_if_Hz,
            };
            let out = noise::added_noise_from_snr(&cal).map_err(lib_error)?;
            write_json_atomic(
                output,
                &NoiseOutputJson { p_fpj_n_W: out.p_fpj_n, n_fpj_photons: out.n_fpj },
            )?;
            println!("noise: N_FPJ = {:.4} photons ({:.4e} W)", out.n_fpj, out.p_fpj_n);
            println!("fpjpa-result command=noise status=ok output={}", output.display());
        }
        NoiseJson::ModelSweep { jpa, fabry_perot, gain_db_start, gain_db_stop, n_points } => {
            if n_points < 2 {
                return Err(CliError::Validation("n_points must be >= 2".into()));
            }
            let jpa = jpa.to_jpa();
            let fp = fabry_perot.to_fp().map_err(lib_error)?;
            let grid = DetuningGrid::new(-2.0 * fp.fsr, 2.0 * fp.fsr, 2001).map_err(lib_error)?;
            let mut rows = Vec::with_capacity(n_points);
            for i in 0..n_points {
                let gain_db = gain_db_start
                    + (gain_db_stop - gain_db_start) * (i as f64) / (n_points - 1) as f64;
                let target = 10f64.powf(gain_db / 10.0);
                let drive =
                    fpjpa::interference::calibrate_drive_for_peak_gain(&grid, &jpa, &fp, target)
                        .map_err(lib_error)?;
                let io = noise::io_coefficients(0.0, &jpa, &fp, &drive).map_err(lib_error)?;
                let amp =
                    noise::effective_amplifier(&io, noise::HIGH_GAIN_FLOOR).map_err(lib_error)?;
                rows.push((gain_db, amp.n_fpj));
            }
            let mut text = String::from("gain_dB,n_fpj\n");
            for (g, n) in rows {
                text.push_str(&format!("{g},{n}\n"));
            }
            write_atomic(output, text.as_bytes())?;
            println!("noise: model sweep with {n_points} gain points");
            println!("fpjpa-result command=noise status=ok output={}", output.display());
        }
    }
    Ok(())
}

fn cmd_metrics(input: &Path, output: &Path, kappa_tot_hz: Option<f64>) -> Result<(), CliError> {
    let is_csv = input.extension().and_then(|e| e.to_str()) == Some("csv");
    let out = if is_csv {
        let spectrum = load_spectrum(&input.display().to_string())?;
        let m = metrics::gain_metrics(&spectrum, kappa_tot_hz.map(hz_to_rad))
            .map_err(lib_error)?;
        MetricsOutputJson {
            max_gain_db: 10.0 * m.max_gain_linear.log10(),
            max_gain_linear: m.max_gain_linear,
            bandwidth_3db_Hz: rad_to_hz(m.bandwidth_3db),
            gb_exponent: m.gb_exponent,
            multi_lobe: m.multi_lobe,
            ripple_visibility: None,
            saturation_flux_photons_per_s: None,
            saturation_power_dbm: None,
        }
    } else {
        let params: MetricsParamsJson = read_json(input)?;
        let jpa = params.jpa.to_jpa();
        let fp = params.fabry_perot.to_fp().map_err(lib_error)?;
        let drive = params.drive.to_drive().map_err(lib_error)?;
        let span = params.span_fsr.unwrap_or(2.0) * fp.fsr;
        let n = params.grid_points.unwrap_or(2001);
        let grid = DetuningGrid::new(-span, span, n).map_err(lib_error)?;
        let detunings = grid.points();
        let gains: fpjpa::Result<Vec<f64>> = detunings
            .iter()
            .map(|&d| {
                fpjpa::interference::normalized_spectrum(d, &jpa, &fp, Some(&drive))
                    .map(|p| p.net_gain)
            })
            .collect();
        let spectrum = Spectrum::new(
            detunings,
            fpjpa::spectrum::SpectrumData::Gain(gains.map_err(lib_error)?),
            fpjpa::spectrum::SpectrumKind::NetGainLinear,
        )
        .map_err(lib_error)?;
        let m = metrics::gain_metrics(&spectrum, Some(jpa.kappa_total())).map_err(lib_error)?;
        let visibility = metrics::ripple_visibility(
            &jpa,
            &fp,
            &drive,
            metrics::VisibilityGrid { points: n },
        )
        .map_err(lib_error)?;
        let (sat_flux, sat_dbm) = if jpa.kerr != 0.0 {
            let flux = metrics::saturation_input_flux(
                jpa.kappa,
                m.max_gain_linear,
                jpa.kerr,
                params.saturation_prefactor.unwrap_or(1.0),
            )
            .map_err(lib_error)?;
            (Some(flux), Some(metrics::photon_flux_to_dbm(jpa.omega_a, flux)))
        } else {
            (None, None)
        };
        MetricsOutputJson {
            max_gain_db: 10.0 * m.max_gain_linear.log10(),
            max_gain_linear: m.max_gain_linear,
            bandwidth_3db_Hz: rad_to_hz(m.bandwidth_3db),
            gb_exponent: m.gb_exponent,
            multi_lobe: m.multi_lobe,
            ripple_visibility: Some(visibility),
            saturation_flux_photons_per_s: sat_flux,
            saturation_power_dbm: sat_dbm,
        }
    };
    write_json_atomic(output, &out)?;
    println!(
        "metrics: max gain {:.2} dB, 3-dB bandwidth {:.3} MHz{}",
        out.max_gain_db,
        out.bandwidth_3db_Hz / 1e6,
        if out.multi_lobe { " (multi-lobe)" } else { "" }
    );
    println!("fpjpa-result command=metrics status=ok output={}", output.display());
    Ok(())
}

fn cmd_visibility_map(
    input: &Path,
    eta_grid: GridSpec,
    fsr_grid: GridSpec,
    output: &Path,
) -> Result<(), CliError> {
    let base: VisibilityMapBaseJson = read_json(input)?;
    let linspace = |g: GridSpec| -> Vec<f64> {
        (0..g.n)
            .map(|i| {
                if g.n == 1 {
                    g.start_hz
                } else {
                    g.start_hz + (g.stop_hz - g.start_hz) * i as f64 / (g.n - 1) as f64
                }
            })
            .collect()
    };
    let config = metrics::VisibilityMapConfig {
        jpa: JpaParams::from_rates(
            hz_to_rad(9.5e9),
            hz_to_rad(base.kappa_Hz),
            hz_to_rad(base.kappa0_Hz),
        ),
        eta0: base.eta0,
        phi0: base.phi0_rad,
        map_gain_db: base.map_gain_db.unwrap_or(25.0),
        one_minus_eta: linspace(eta_grid),
        fsr_over_beff: linspace(fsr_grid),
        grid: metrics::VisibilityGrid { points: base.grid_points.unwrap_or(2001) },
    };
    let map = metrics::visibility_map(&config).map_err(lib_error)?;
    let mut text = String::from("one_minus_eta,fsr_over_beff,visibility\n");
    for (i, &x) in map.one_minus_eta.iter().enumerate() {
        for (j, &r) in map.fsr_over_beff.iter().enumerate() {
            text.push_str(&format!("{x},{r},{}\n", map.values[i][j]));
        }
    }
    write_atomic(output, text.as_bytes())?;
    println!(
        "visibility-map: {}x{} cells, B_eff = {:.3} MHz",
        map.one_minus_eta.len(),
        map.fsr_over_beff.len(),
        rad_to_hz(map.b_eff) / 1e6
    );
    println!("fpjpa-result command=visibility-map status=ok output={}", output.display());
    Ok(())
}

fn cmd_oracle(input: &Path, output: &Path) -> Result<(), CliError> {
    let manifest: OracleJson = read_json(input)?;
    let json = match manifest {
        OracleJson::Series { jpa, fabry_perot, detuning_Hz, max_terms, tail_tolerance, pure_phase_rad } => {
            let spec =
                oracle::TruncationSpec::new(max_terms, tail_tolerance).map_err(lib_error)?;
            let reflector = match pure_phase_rad {
                Some(phi) => oracle::Reflector::PurePhase(phi),
                None => oracle::Reflector::JpaModel,
            };
            let res = oracle::truncated_series_reflection(
                hz_to_rad(detuning_Hz),
                &jpa.to_jpa(),
                &fabry_perot.to_fp().map_err(lib_error)?,
                &spec,
                reflector,
            )
            .map_err(lib_error)?;
            serde_json::json!({
                "re": res.value.re,
                "im": res.value.im,
                "terms_used": res.terms_used,
                "tail_bound": res.tail_bound,
                "truncated": res.truncated,
            })
        }
        OracleJson::Matrix { jpa, fabry_perot, drive, detuning_Hz } => {
            let v = oracle::signal_idler_matrix_solve(
                hz_to_rad(detuning_Hz),
                &jpa.to_jpa(),
                &fabry_perot.to_fp().map_err(lib_error)?,
                &drive.to_drive().map_err(lib_error)?,
            )
            .map_err(lib_error)?;
            serde_json::json!({ "re": v.re, "im": v.im })
        }
        OracleJson::Squid { phi, beta, phi_c } => {
            let s = oracle::squid_numeric_charge_flux(phi, beta, phi_c).map_err(lib_error)?;
            serde_json::json!({ "theta": s.theta, "theta_c": s.theta_c, "residual": s.residual })
        }
        OracleJson::TimeDomain { jpa, fabry_perot, detuning_Hz, duration_s } => {
            let mut spec = oracle::TimeDomainSpec::default();
            if let Some(d) = duration_s {
                spec.duration = d;
            }
            let res = oracle::time_domain_delay_simulation(
                hz_to_rad(detuning_Hz),
                &jpa.to_jpa(),
                &fabry_perot.to_fp().map_err(lib_error)?,
                &spec,
            )
            .map_err(lib_error)?;
            serde_json::json!({
                "re": res.s11.re,
                "im": res.s11.im,
                "settling": res.settling,
                "non_steady": res.non_steady,
            })
        }
    };
    write_json_atomic(output, &json)?;
    println!("fpjpa-result command=oracle status=ok output={}", output.display());
    Ok(())
}
