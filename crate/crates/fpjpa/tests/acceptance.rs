//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).

use std::f64::consts::{FRAC_PI_3, PI};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fpjpa::circuit::JpaParams;
use fpjpa::design::{synthesize, DesignTargets};
use fpjpa::fitting;
use fpjpa::interference::{
    calibrate_drive_for_peak_gain, gain_spectrum, normalized_spectrum, reflection_spectrum,
    response_inverse, sweep, Branch, DriveParams, FabryPerotParams, SweepKind,
};
use fpjpa::metrics;
use fpjpa::noise;
use fpjpa::oracle;
use fpjpa::spectrum::{DetuningGrid, Spectrum, SpectrumData, SpectrumKind};

const TWO_PI: f64 = 2.0 * PI;

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

struct Criterion {
    label: &'static str,
    failures: Vec<String>,
    checks: usize,
}

impl Criterion {
    fn new(label: &'static str) -> Self {
        Criterion { label, failures: Vec::new(), checks: 0 }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.checks += 1;
        if !ok {
            self.failures.push(detail.into());
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("{}: PASS ({} checks)", self.label, self.checks);
        } else {
            println!(
                "{}: FAIL ({}/{} checks failed)",
                self.label,
                self.failures.len(),
                self.checks
            );
            for f in &self.failures {
                println!("  - {f}");
            }
            panic!("{} failed: {:?}", self.label, self.failures);
        }
    }
}

fn fitted_jpa() -> JpaParams {
    JpaParams::from_rates(TWO_PI * 9.5e9, TWO_PI * 280e6, TWO_PI * 22e6)
}

fn fitted_fp() -> FabryPerotParams {
    FabryPerotParams::new(0.996, 0.803, TWO_PI * 140e6, -1.05, -0.048).unwrap()
}

/// Criterion 1: the design solve reproduces the published circuit values
/// within 5% relative.
#[test]
fn criterion_1_design_reproduction() {
    let start = Instant::now();
    let targets = DesignTargets {
        omega_a_target: TWO_PI * 9.5e9,
        kappabar_target: 0.04,
        p_j_target: 0.8,
        n_squids: 5,
        l_loop_fixed: 20e-12,
        l_geometric_fixed: 80e-12,
        bias_phi_eff: FRAC_PI_3,
        z_waveguide: 50.0,
    };
    let design = synthesize(&targets).unwrap();
    let elapsed = start.elapsed();

    let mut c = Criterion::new("criterion 1 (design reproduction)");
    let tol = 0.05 + 1e-12;
    let cases = [
        ("C_i", design.circuit.c_internal, 470e-15),
        ("C_kappa", design.circuit.c_coupling, 80e-15),
        ("L_J_eff", design.l_j_eff, 80e-12),
        ("alpha_a", design.jpa.alpha_a, 0.03),
        ("p_SQ", design.jpa.p_sq, 0.94),
        ("p_kappa", design.jpa.p_kappa, 0.15),
        ("Kbar", design.jpa.kbar, -7.5e-5),
    ];
    for (name, value, reference) in cases {
        let r = rel(value, reference);
        c.check(
            r <= tol,
            format!("{name} = {value:.6e} vs {reference:.6e} ({:.2}% off, tol 5%)", 100.0 * r),
        );
    }
    c.check(elapsed.as_secs_f64() < 1.0, format!("runtime {elapsed:?} exceeds 1 s"));
    c.finish();
}

struct RandomDraw {
    jpa: JpaParams,
    fp: FabryPerotParams,
    delta: f64,
    drive: DriveParams,
}

fn random_draw(rng: &mut ChaCha8Rng, pump_fraction_max: f64) -> RandomDraw {
    let kappa = TWO_PI * rng.gen_range(100e6..500e6);
    let kappa0 = TWO_PI * rng.gen_range(0.0..50e6);
    let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, kappa, kappa0);
    let eta = rng.gen_range(0.9..=1.0);
    let eta0 = rng.gen_range(0.5..=1.0);
    let fsr = TWO_PI * rng.gen_range(50e6..500e6);
    let phi0 = rng.gen_range(-PI..PI);
    let phi_ref = rng.gen_range(-PI..PI);
    let fp = FabryPerotParams::new(eta, eta0, fsr, phi0, phi_ref).unwrap();
    let delta = rng.gen_range(-2.0 * fsr..2.0 * fsr);
    let chi_s = response_inverse(delta, &jpa, &fp, Branch::Signal);
    let chi_i_conj = response_inverse(delta, &jpa, &fp, Branch::Idler).conj();
    let threshold = 2.0 * (chi_s * chi_i_conj).norm().sqrt();
    let drive =
        DriveParams::new(rng.gen_range(0.0..=pump_fraction_max) * threshold).unwrap();
    RandomDraw { jpa, fp, delta, drive }
}

/// Criterion 2: closed forms agree with the brute-force oracles on 1e4
/// random below-threshold draws.
#[test]
fn criterion_2_closed_form_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let spec = oracle::TruncationSpec::new(260, 1e-300).unwrap();
    let mut c = Criterion::new("criterion 2 (closed form vs oracle)");
    let mut worst_series = 0.0f64;
    let mut worst_matrix = 0.0f64;
    for _ in 0..10_000 {
        let draw = random_draw(&mut rng, 0.95);
        // Unpumped reflection vs the term-by-term series.
        let closed = reflection_spectrum(draw.delta, &draw.jpa, &draw.fp);
        let series = oracle::truncated_series_reflection(
            draw.delta,
            &draw.jpa,
            &draw.fp,
            &spec,
            oracle::Reflector::JpaModel,
        )
        .unwrap();
        let scale = closed.norm().max(1.0);
        worst_series = worst_series.max((series.value - closed).norm() / scale);

        // Pumped gain vs the numeric 2x2 matrix solve.
        let gain = gain_spectrum(draw.delta, &draw.jpa, &draw.fp, &draw.drive).unwrap();
        let matrix =
            oracle::signal_idler_matrix_solve(draw.delta, &draw.jpa, &draw.fp, &draw.drive)
                .unwrap();
        let scale = gain.norm().max(1.0);
        worst_matrix = worst_matrix.max((matrix - gain).norm() / scale);
    }
    let elapsed = start.elapsed();
    c.check(worst_series <= 1e-9, format!("series mismatch {worst_series:.3e} > 1e-9"));
    c.check(worst_matrix <= 1e-12, format!("matrix mismatch {worst_matrix:.3e} > 1e-12"));
    c.check(elapsed.as_secs_f64() < 30.0, format!("runtime {elapsed:?} exceeds 30 s"));
    c.finish();
}

/// Criterion 3: unitarity defect of the eight input-output coefficients
/// below 1e-10 on 1e4 random draws.
#[test]
fn criterion_3_unitarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut c = Criterion::new("criterion 3 (unitarity)");
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let draw = random_draw(&mut rng, 0.95);
        let io = noise::io_coefficients(draw.delta, &draw.jpa, &draw.fp, &draw.drive).unwrap();
        worst = worst.max(io.unitarity_defect().abs());
    }
    c.check(worst < 1e-10, format!("worst unitarity defect {worst:.3e} >= 1e-10"));
    c.finish();
}

/// Criterion 4: quantum-limited added noise for a lossless environment,
/// strictly above-limit noise with propagation loss.
#[test]
fn criterion_4_quantum_limit_noise() {
    let mut c = Criterion::new("criterion 4 (quantum-limit noise)");
    let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, TWO_PI * 280e6, 0.0);
    // Single-pole pump for ~46 dB at delta = 0.
    let g_target: f64 = 10f64.powf(4.6);
    let ratio = g_target.sqrt();
    let omega_p = jpa.kappa * ((ratio - 1.0) / (ratio + 1.0)).sqrt();
    let drive = DriveParams::new(omega_p).unwrap();

    let lossless = FabryPerotParams::new(1.0, 1.0, TWO_PI * 140e6, 0.0, 0.0).unwrap();
    let io = noise::io_coefficients(0.0, &jpa, &lossless, &drive).unwrap();
    let amp = noise::effective_amplifier(&io, noise::HIGH_GAIN_FLOOR).unwrap();
    c.check(
        amp.g_fpj >= 1e4,
        format!("lossless gain {:.1} dB below 40 dB", 10.0 * amp.g_fpj.log10()),
    );
    c.check(
        (amp.n_fpj - 0.5).abs() <= 1e-6,
        format!("lossless added noise {} differs from 0.5", amp.n_fpj),
    );

    let lossy = FabryPerotParams::new(1.0, 0.9, TWO_PI * 140e6, 0.0, 0.0).unwrap();
    let io = noise::io_coefficients(0.0, &jpa, &lossy, &drive).unwrap();
    let amp_lossy = noise::effective_amplifier(&io, noise::HIGH_GAIN_FLOOR).unwrap();
    c.check(
        amp_lossy.n_fpj > 0.5,
        format!("added noise {} not above 0.5 with eta0 = 0.9", amp_lossy.n_fpj),
    );
    c.finish();
}

fn net_gain_spectrum(
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
    span: f64,
    n: usize,
) -> Spectrum {
    let grid = DetuningGrid::new(-span, span, n).unwrap();
    let detunings = grid.points();
    let gains: Vec<f64> = detunings
        .iter()
        .map(|&d| normalized_spectrum(d, jpa, fp, Some(drive)).unwrap().net_gain)
        .collect();
    Spectrum::new(detunings, SpectrumData::Gain(gains), SpectrumKind::NetGainLinear).unwrap()
}

/// Criterion 5: gain-bandwidth exponent 0.5 +- 0.02 in the single-pole
/// limit over 20-40 dB, and below 0.35 at low gain in the resonant
/// strong-interference configuration.
#[test]
fn criterion_5_gain_bandwidth_law() {
    let mut c = Criterion::new("criterion 5 (gain-bandwidth law)");

    // eta -> 1 single-pole limit (kappa0 = 0 so the unpumped device is a
    // clean single pole).
    let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, TWO_PI * 280e6, 0.0);
    let fp = FabryPerotParams::new(1.0, 1.0, jpa.kappa, 0.0, 0.0).unwrap();
    let grid = DetuningGrid::new(-2.0 * jpa.kappa, 2.0 * jpa.kappa, 200_001).unwrap();
    for gain_db in [20.0, 30.0, 40.0] {
        let target = 10f64.powf(gain_db / 10.0);
        let drive = calibrate_drive_for_peak_gain(&grid, &jpa, &fp, target).unwrap();
        let spec = net_gain_spectrum(&jpa, &fp, &drive, 2.0 * jpa.kappa, 200_001);
        let bw = metrics::bandwidth_3db(&spec).unwrap();
        let g0 = normalized_spectrum(0.0, &jpa, &fp, Some(&drive)).unwrap().net_gain;
        let alpha = metrics::gb_exponent(bw.full_width / 2.0, g0, jpa.kappa_total()).unwrap();
        c.check(
            (alpha - 0.5).abs() <= 0.02,
            format!("single-pole alpha {alpha:.4} at {gain_db} dB outside 0.5 +- 0.02"),
        );
    }

    // Resonant strong-interference configuration: phi0 = 0,
    // 1 - eta = 5e-3, fsr = kappa: low-gain alpha drops below 0.35.
    let fp2 = FabryPerotParams::new(1.0 - 5e-3, 0.9, jpa.kappa, 0.0, 0.0).unwrap();
    for gain_db in [6.0, 10.0] {
        let target = 10f64.powf(gain_db / 10.0);
        let drive = calibrate_drive_for_peak_gain(&grid, &jpa, &fp2, target).unwrap();
        let spec = net_gain_spectrum(&jpa, &fp2, &drive, 2.0 * jpa.kappa, 200_001);
        let bw = metrics::bandwidth_3db(&spec).unwrap();
        let g0 = normalized_spectrum(0.0, &jpa, &fp2, Some(&drive)).unwrap().net_gain;
        let alpha = metrics::gb_exponent(bw.full_width / 2.0, g0, jpa.kappa_total()).unwrap();
        c.check(
            alpha < 0.35,
            format!("two-mode alpha {alpha:.4} at {gain_db} dB not below 0.35"),
        );
    }
    c.finish();
}

/// Criterion 6: visibility-map contour location and the four-panel family.
#[test]
fn criterion_6_visibility_map() {
    let mut c = Criterion::new("criterion 6 (visibility map)");

    // 1-dB-ripple contour at the VSWR-1.1 mirror: bisect the fsr/B_eff
    // ratio where V crosses 0.1146; it must sit at 10 within a factor 1.5.
    let ratios: Vec<f64> = (0..25).map(|i| 4.0 + i as f64).collect();
    let config = metrics::VisibilityMapConfig::with_default_device(vec![2.5e-3], ratios.clone());
    let map = metrics::visibility_map(&config).unwrap();
    let v_target = metrics::visibility_of_ripple_db(1.0);
    let row = &map.values[0];
    let crossing = ratios
        .windows(2)
        .zip(row.windows(2))
        .find_map(|(r, v)| {
            if (v[0] - v_target) * (v[1] - v_target) <= 0.0 && v[0] >= v[1] {
                let t = (v[0] - v_target) / (v[0] - v[1]);
                Some(r[0] + t * (r[1] - r[0]))
            } else {
                None
            }
        });
    match crossing {
        Some(x) => c.check(
            (10.0 / 1.5..=15.0).contains(&x),
            format!("1-dB contour at fsr/B_eff = {x:.2}, outside [6.67, 15]"),
        ),
        None => c.check(false, "1-dB contour not bracketed in the scanned range".to_string()),
    }

    // Shrinking free spectral range reproduces the published family:
    // visibilities rise monotonically from ~0 to above 0.8.
    let kappa = TWO_PI * 280e6;
    let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, kappa, 0.0);
    let mut family = Vec::new();
    for ratio in [3.0, 0.8, 0.3, 0.15] {
        let fsr = ratio * kappa;
        let fp = FabryPerotParams::new(0.995, 0.9, fsr, 0.0, 0.0).unwrap();
        let grid = DetuningGrid::new(-2.5 * kappa.max(fsr), 2.5 * kappa.max(fsr), 8001).unwrap();
        let drive = calibrate_drive_for_peak_gain(&grid, &jpa, &fp, 100.0).unwrap();
        let v = metrics::ripple_visibility(&jpa, &fp, &drive, metrics::VisibilityGrid::default())
            .unwrap();
        family.push(v);
    }
    c.check(
        family.windows(2).all(|w| w[1] > w[0]),
        format!("family {family:?} not monotone increasing as fsr shrinks"),
    );
    c.check(family[0] < 0.005, format!("largest-fsr visibility {} not ~0", family[0]));
    c.check(family[3] > 0.8, format!("smallest-fsr visibility {} not above 0.8", family[3]));
    c.finish();
}

/// Criterion 7: synthetic fit round trips at the stated noise levels,
/// tolerances and runtimes.
#[test]
fn criterion_7_fit_round_trip() {
    let mut c = Criterion::new("criterion 7 (fit round trip)");
    let truth_jpa = fitted_jpa();
    let truth_fp = fitted_fp();

    // --- Reflection fit with 1% complex Gaussian noise. ---
    let start = Instant::now();
    let grid = DetuningGrid::new(-TWO_PI * 300e6, TWO_PI * 300e6, 2001).unwrap();
    let clean = sweep(&grid, &truth_jpa, &truth_fp, None, SweepKind::Normalized).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let noisy: Vec<Complex64> = clean
        .complex_values()
        .unwrap()
        .iter()
        .map(|v| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            v + Complex64::new(0.01 * re, 0.01 * im)
        })
        .collect();
    let data = Spectrum::new(
        clean.detunings.clone(),
        SpectrumData::Complex(noisy),
        SpectrumKind::NormalizedS11,
    )
    .unwrap();

    let problem = fitting::ReflectionProblem {
        data,
        delta0: fitting::ParamInit::free(TWO_PI * 5e6),
        kappa: fitting::ParamInit::free(truth_jpa.kappa * 1.25),
        kappa0: fitting::ParamInit::free(truth_jpa.kappa0 * 0.7),
        fp: fitting::FabryPerotInit {
            eta: fitting::ParamInit::free(0.99),
            eta0: fitting::ParamInit::free(0.7),
            fsr: fitting::ParamInit::free(truth_fp.fsr * 1.2),
            phi0: fitting::ParamInit::free(0.0),
            phi_ref: fitting::ParamInit::free(0.0),
        },
    };
    let result = fitting::fit_reflection(&problem, &fitting::FitOptions::default()).unwrap();
    let elapsed = start.elapsed();

    let get = |name: &str| result.value(name).unwrap();
    c.check(
        rel(get("kappa"), truth_jpa.kappa) <= 0.01,
        format!("kappa recovered {:.4e} vs {:.4e}", get("kappa"), truth_jpa.kappa),
    );
    c.check(
        rel(get("kappa0"), truth_jpa.kappa0) <= 0.01,
        format!("kappa0 recovered {:.4e} vs {:.4e}", get("kappa0"), truth_jpa.kappa0),
    );
    c.check(
        rel(get("fsr"), truth_fp.fsr) <= 0.01,
        format!("fsr recovered {:.4e} vs {:.4e}", get("fsr"), truth_fp.fsr),
    );
    c.check(
        (get("phi0") - truth_fp.phi0).abs() <= 0.02,
        format!("phi0 recovered {:.4} vs {:.4}", get("phi0"), truth_fp.phi0),
    );
    c.check(
        (get("phi_ref") - truth_fp.phi_ref).abs() <= 0.02,
        format!("phi_ref recovered {:.4} vs {:.4}", get("phi_ref"), truth_fp.phi_ref),
    );
    c.check(
        elapsed.as_secs_f64() < 60.0,
        format!("reflection fit took {elapsed:?} (> 60 s)"),
    );

    // --- Joint five-power gain fit with 0.2 dB noise. ---
    // The environment initialization chains from the reflection fit, the
    // same protocol the pump-on analysis follows in practice; rates are
    // perturbed and the pump conversion starts 20% low (keeping every
    // dataset below threshold at the initial point).
    let refl = result;
    let start = Instant::now();
    let c_p_true = TWO_PI * 2e11;
    let mut datasets = Vec::new();
    let mut rate_inits = Vec::new();
    let gain_grid = DetuningGrid::new(-TWO_PI * 450e6, TWO_PI * 450e6, 2001).unwrap();
    // Per-power rates drift slightly, as in the measured device.
    let kappas = [280e6, 278e6, 276e6, 274e6, 272e6];
    let kappa0s = [22e6, 21.5e6, 21e6, 20.5e6, 20e6];
    for (i, target_db) in [6.0, 10.0, 14.0, 18.0, 22.0].iter().enumerate() {
        let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, TWO_PI * kappas[i], TWO_PI * kappa0s[i]);
        // The net gain tracks the on-chip |S11|^2 up to the small ripple
        // of the reference, so calibrating the on-chip peak to the target
        // puts the net maximum at about the requested level.
        let target_linear = 10f64.powf(target_db / 10.0);
        let drive =
            calibrate_drive_for_peak_gain(&gain_grid, &jpa, &truth_fp, target_linear).unwrap();
        let power = (drive.omega_pump_amp / c_p_true).powi(2);
        let mut db: Vec<f64> = gain_grid
            .points()
            .iter()
            .map(|&d| {
                let pt = normalized_spectrum(d, &jpa, &truth_fp, Some(&drive)).unwrap();
                10.0 * pt.gain_tilde.log10()
            })
            .collect();
        for v in &mut db {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            *v += 0.2 * n;
        }
        datasets.push(fitting::GainDataset {
            spectrum: Spectrum::new(
                gain_grid.points(),
                SpectrumData::Gain(db),
                SpectrumKind::NetGainDb,
            )
            .unwrap(),
            pump_power: power,
        });
        rate_inits.push((
            fitting::ParamInit::free(TWO_PI * kappas[i] * 1.1),
            fitting::ParamInit::free(TWO_PI * kappa0s[i] * 0.9),
        ));
    }
    let refl_value = |name: &str| refl.value(name).unwrap();
    let problem = fitting::GainMultiProblem {
        datasets,
        fp: fitting::FabryPerotInit {
            eta: fitting::ParamInit::free(refl_value("eta")),
            eta0: fitting::ParamInit::free(refl_value("eta0")),
            fsr: fitting::ParamInit::free(refl_value("fsr")),
            phi0: fitting::ParamInit::free(refl_value("phi0")),
            phi_ref: fitting::ParamInit::free(refl_value("phi_ref")),
        },
        rates: rate_inits,
        c_p: fitting::ParamInit::free(c_p_true * 0.8),
    };
    // Environment phases start from the unpumped-fit knowledge, so the
    // extra phase-lattice starts are unnecessary here.
    let options = fitting::FitOptions { phase_lattice: false, ..Default::default() };
    let result = fitting::fit_gain_multi(&problem, &options).unwrap();
    let elapsed = start.elapsed();

    let get = |name: &str| result.value(name).unwrap();
    c.check(rel(get("eta"), truth_fp.eta) <= 0.02, format!("eta {:.5} vs 0.996", get("eta")));
    c.check(rel(get("eta0"), truth_fp.eta0) <= 0.02, format!("eta0 {:.5} vs 0.803", get("eta0")));
    c.check(rel(get("fsr"), truth_fp.fsr) <= 0.02, format!("fsr {:.5e}", get("fsr")));
    c.check(
        (get("phi0") - truth_fp.phi0).abs() <= 0.02,
        format!("phi0 {:.4} vs {:.4}", get("phi0"), truth_fp.phi0),
    );
    c.check(
        (get("phi_ref") - truth_fp.phi_ref).abs() <= 0.05,
        format!("phi_ref {:.4} vs {:.4}", get("phi_ref"), truth_fp.phi_ref),
    );
    c.check(
        rel(get("c_p"), c_p_true) <= 0.01,
        format!("c_p {:.5e} vs {:.5e}", get("c_p"), c_p_true),
    );
    c.check(elapsed.as_secs_f64() < 60.0, format!("gain fit took {elapsed:?} (> 60 s)"));
    c.finish();
}

/// Criterion 8: the cubic charge-flux expansion misses the transcendental
/// solve by a phi^5 tail (log-log slope 5 +- 0.3 over [0.02, 0.3]).
#[test]
fn criterion_8_squid_expansion_accuracy() {
    let mut c = Criterion::new("criterion 8 (SQUID expansion accuracy)");
    let beta = 0.125;
    let phi_c = FRAC_PI_3;
    let circuit = fpjpa::circuit::CircuitParams {
        n_squids: 1,
        l_loop: 2.0 * beta * 80e-12,
        l_josephson: 80e-12,
        l_geometric: 1e-15,
        c_internal: 470e-15,
        c_coupling: 80e-15,
        z_waveguide: 50.0,
        mutual: 5e-12,
        l_pump_shunt: 150e-12,
    };
    let bias = fpjpa::circuit::BiasState::from_applied(phi_c, beta).unwrap();
    let expansion = fpjpa::circuit::charge_flux_expansion(&circuit, &bias).unwrap();

    let n = 9;
    let (lo, hi) = (0.02f64, 0.3f64);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let phi = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let numeric = oracle::squid_numeric_charge_flux(phi, beta, phi_c).unwrap();
        let dev = (numeric.theta - expansion.eval(phi)).abs();
        points.push((phi.ln(), dev.ln()));
    }
    let nf = n as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    c.check(
        (slope - 5.0).abs() <= 0.3,
        format!("log-log slope {slope:.4} outside 5 +- 0.3"),
    );
    c.finish();
}

/// Criterion 9: the purely experimental quantities (44 dB max net gain,
/// 0.8 photons lowest noise, the -121..-111 dBm compression window, the
/// frequency-dependent pumped kappa) are not reproducible at desk scale;
/// the model covers them only through the property suites above and this
/// order-of-magnitude saturation check.
#[test]
fn criterion_9_order_of_magnitude_saturation() {
    let mut c = Criterion::new("criterion 9 (saturation order of magnitude)");
    let omega_a = TWO_PI * 9.5e9;
    let kappa = TWO_PI * 280e6;
    let kerr = -7.5e-5 * omega_a;
    let flux = metrics::saturation_input_flux(kappa, 100.0, kerr, 1.0).unwrap();
    let dbm = metrics::photon_flux_to_dbm(omega_a, flux);
    // Within an order of magnitude (10 dB) of the observed -121..-111 dBm.
    c.check(
        (-131.0..=-101.0).contains(&dbm),
        format!("saturation estimate {dbm:.1} dBm far from the -121..-111 dBm window"),
    );
    c.finish();
}
