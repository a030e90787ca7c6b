//! Independent brute-force references for the closed forms: term-by-term
//! geometric series for the reflection formulas, a numeric 2x2 matrix
//! solve for the pumped signal-idler system, a transcendental solve of the
//! SQUID charge-flux relation, and a time-domain delayed-feedback
//! integrator for the linear response.
//!
//! Nothing here reuses the summed closed forms it is meant to check.

use num_complex::Complex64;

use crate::circuit::JpaParams;
use crate::error::{Error, Result};
use crate::interference::{Branch, DriveParams, FabryPerotParams};

/// Truncation control for the round-trip series.
#[derive(Debug, Clone, Copy)]
pub struct TruncationSpec {
    /// Maximum number of retained round trips.
    pub max_terms: usize,
    /// Stop early once the next term magnitude falls below this.
    pub tail_tolerance: f64,
}

impl TruncationSpec {
    pub fn new(max_terms: usize, tail_tolerance: f64) -> Result<Self> {
        if max_terms < 1 {
            return Err(Error::Validation("max_terms must be >= 1".into()));
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::Validation("tail_tolerance must be positive".into()));
        }
        Ok(TruncationSpec { max_terms, tail_tolerance })
    }
}

/// What sits at the JPA position in the series evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Reflector {
    /// The unpumped linear JPA response.
    JpaModel,
    /// A pure phase shift (far-detuned JPA), e^{i phi_r}.
    PurePhase(f64),
}

/// Outcome of a truncated-series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesResult {
    pub value: Complex64,
    /// Terms actually summed.
    pub terms_used: usize,
    /// Geometric bound on the discarded tail, |R|^n/(1-|R|).
    pub tail_bound: f64,
    /// Set when max_terms was reached before the tail tolerance.
    pub truncated: bool,
}

fn series_sums(r: Complex64, spec: &TruncationSpec) -> (Complex64, Complex64, usize, bool) {
    // s0 = sum_{n=0}^{N} r^n and s1 = s0 - 1, accumulated term by term.
    let mut term = Complex64::new(1.0, 0.0);
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut used = 0;
    let mut converged = false;
    for _ in 0..=spec.max_terms {
        s0 += term;
        used += 1;
        term *= r;
        if term.norm() < spec.tail_tolerance {
            converged = true;
            break;
        }
    }
    (s0, s0 - Complex64::new(1.0, 0.0), used, converged)
}

/// Evaluates the reflection spectrum by explicitly summing the round-trip
/// series, each delay mapped to one more factor of the round-trip
/// coefficient. With `Reflector::JpaModel` this rebuilds the unpumped
/// reflection; with `Reflector::PurePhase` it rebuilds the reference.
pub fn truncated_series_reflection(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    spec: &TruncationSpec,
    reflector: Reflector,
) -> Result<SeriesResult> {
    fp.validate()?;
    let r_mag = fp.round_trip_magnitude();
    if r_mag >= 1.0 {
        return Err(Error::Validation("series requires |R| < 1".into()));
    }
    let r = crate::interference::round_trip_coeff(delta, fp, Branch::Signal);
    let eta = fp.eta;
    let eta0 = fp.eta0;

    let (value, terms_used, converged) = match reflector {
        Reflector::JpaModel => {
            let (s0, s1, used, conv) = series_sums(r, spec);
            // Truncated response: chi_N = i*delta - (k+k0)/2 - k*s1.
            let chi_n = Complex64::new(-(jpa.kappa + jpa.kappa0) / 2.0, delta) - jpa.kappa * s1;
            let v = -r.conj() / eta0 + eta * eta0 * s0 + eta * eta0 * jpa.kappa * s0 * s0 / chi_n;
            (v, used, conv)
        }
        Reflector::PurePhase(phi_r) => {
            let phase = Complex64::from_polar(1.0, phi_r);
            let (s0, _, used, conv) = series_sums(r * phase, spec);
            let v = -r.conj() / eta0 + eta * eta0 * phase * s0;
            (v, used, conv)
        }
    };
    let tail_bound = r_mag.powi(terms_used as i32) / (1.0 - r_mag);
    Ok(SeriesResult { value, terms_used, tail_bound, truncated: !converged })
}

/// All eight input-output coefficients obtained from the numeric 2x2
/// solve: coefficients of (c_in, u_in, v_in, d_in) at the signal frequency
/// and of their daggered idler counterparts.
#[derive(Debug, Clone, Copy)]
pub struct MatrixIoCoefficients {
    pub c: Complex64,
    pub u: Complex64,
    pub v: Complex64,
    pub d: Complex64,
    pub c_prime: Complex64,
    pub u_prime: Complex64,
    pub v_prime: Complex64,
    pub d_prime: Complex64,
}

/// Solves the coupled signal-idler system by numerically inverting the 2x2
/// response matrix and propagating each drive channel through the output
/// relation. Returns all eight coefficients of the outgoing signal field.
pub fn matrix_io_coefficients(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
) -> Result<MatrixIoCoefficients> {
    let kappa = jpa.kappa;
    let kappa0 = jpa.kappa0;
    let eta = fp.eta;
    let eta0 = fp.eta0;
    let omega_p = drive.omega_pump_amp;
    let t_mag = eta.sqrt();

    let r_s = crate::interference::round_trip_coeff(delta, fp, Branch::Signal);
    let r_i = crate::interference::round_trip_coeff(delta, fp, Branch::Idler);
    let chi_s = crate::interference::response_inverse(delta, jpa, fp, Branch::Signal);
    let chi_i_conj = crate::interference::response_inverse(delta, jpa, fp, Branch::Idler).conj();

    // m = [[chi_s, i*Op/2], [-i*Op/2, chi_i*]]; invert numerically.
    let m12 = Complex64::new(0.0, omega_p / 2.0);
    let det = chi_s * chi_i_conj - m12 * (-m12);
    if det.norm() <= crate::interference::THRESHOLD_FLOOR {
        return Err(Error::AtThreshold { denominator_abs: det.norm() });
    }
    let inv11 = chi_i_conj / det;
    let inv12 = -m12 / det;

    let one = Complex64::new(1.0, 0.0);
    let om_s = one - r_s;
    let om_i_conj = one - r_i.conj();

    // Signal-row drive coefficients (of c_in, u_in, v_in, d_in at omega_s).
    let src_s = [
        (eta0 * kappa).sqrt() * t_mag / om_s,
        ((1.0 - eta0) * kappa).sqrt() / om_s,
        ((1.0 - eta0) * kappa / eta0).sqrt() * r_s / om_s,
        Complex64::new(kappa0.sqrt(), 0.0),
    ];
    // Idler-row drive coefficients (of the daggered fields at omega_i).
    let src_i = [
        -(eta0 * kappa).sqrt() * t_mag / om_i_conj,
        -((1.0 - eta0) * kappa).sqrt() / om_i_conj,
        -((1.0 - eta0) * kappa / eta0).sqrt() * r_i.conj() / om_i_conj,
        Complex64::new(-kappa0.sqrt(), 0.0),
    ];

    // a(omega_s) = i*(inv11*src_s[j] + inv12*src_i[j]) per channel, fed into
    // c_out = -i*T*sqrt(eta0*kappa)/(1-R_s)*a + direct terms.
    let a_fac = Complex64::new(0.0, -1.0) * t_mag * (eta0 * kappa).sqrt() / om_s;
    let through = |s: Complex64, i_src: Complex64| {
        a_fac * Complex64::new(0.0, 1.0) * (inv11 * s + inv12 * i_src)
    };

    let direct_c = -r_s.conj() / eta0 + eta * eta0 / om_s;
    let direct_u = t_mag * (eta0 * (1.0 - eta0)).sqrt() / om_s;
    let direct_v = t_mag * (1.0 - eta0).sqrt() / om_s;

    Ok(MatrixIoCoefficients {
        c: direct_c + through(src_s[0], Complex64::new(0.0, 0.0)),
        u: direct_u + through(src_s[1], Complex64::new(0.0, 0.0)),
        v: direct_v + through(src_s[2], Complex64::new(0.0, 0.0)),
        d: through(src_s[3], Complex64::new(0.0, 0.0)),
        c_prime: through(Complex64::new(0.0, 0.0), src_i[0]),
        u_prime: through(Complex64::new(0.0, 0.0), src_i[1]),
        v_prime: through(Complex64::new(0.0, 0.0), src_i[2]),
        d_prime: through(Complex64::new(0.0, 0.0), src_i[3]),
    })
}

/// The reflection (gain) spectrum through the numeric matrix solve: the
/// c_in coefficient of the outgoing signal field.
pub fn signal_idler_matrix_solve(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    drive: &DriveParams,
) -> Result<Complex64> {
    Ok(matrix_io_coefficients(delta, jpa, fp, drive)?.c)
}

/// Solution of the SQUID transcendental pair at one flux point.
#[derive(Debug, Clone, Copy)]
pub struct SquidChargeFlux {
    /// Normalized SQUID current theta = L_J*Qdot/(2*Phi0).
    pub theta: f64,
    /// Normalized circulating current theta_c = 2*L_J*Qdot_c/(2*Phi0).
    pub theta_c: f64,
    pub residual: f64,
}

/// Numerically solves the coupled pair
///   theta   = |cos(phi_c - beta*theta_c)| * sin(phi - beta*theta)
///   theta_c = sin(phi_c - beta*theta_c) * cos(phi - beta*theta)
/// (positive-cos branch) by outer bisection on theta_c with a safeguarded
/// Newton solve for theta inside.
pub fn squid_numeric_charge_flux(phi: f64, beta: f64, phi_c: f64) -> Result<SquidChargeFlux> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must lie in [0, 1], got {beta}")));
    }

    let inner_theta = |theta_c: f64| -> f64 {
        let cc = (phi_c - beta * theta_c).cos().abs();
        let mut th = cc * phi.sin();
        for _ in 0..200 {
            let f = th - cc * (phi - beta * th).sin();
            let fp = 1.0 + beta * cc * (phi - beta * th).cos();
            let step = f / fp;
            th -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        th
    };
    let outer = |theta_c: f64| -> f64 {
        let th = inner_theta(theta_c);
        theta_c - (phi_c - beta * theta_c).sin() * (phi - beta * th).cos()
    };

    let (mut lo, mut hi) = (-1.2f64, 1.2f64);
    if outer(lo) > 0.0 || outer(hi) < 0.0 {
        return Err(Error::NonConvergence { iterations: 0, residual: f64::NAN });
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if outer(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta_c = 0.5 * (lo + hi);
    let theta = inner_theta(theta_c);
    let res_theta = theta - (phi_c - beta * theta_c).cos().abs() * (phi - beta * theta).sin();
    let res_theta_c = outer(theta_c);
    let residual = res_theta.abs().max(res_theta_c.abs());
    if residual > 1e-12 {
        return Err(Error::NonConvergence { iterations: 120, residual });
    }
    Ok(SquidChargeFlux { theta, theta_c, residual })
}

/// Settings for the delayed-feedback time-domain integration.
#[derive(Debug, Clone, Copy)]
pub struct TimeDomainSpec {
    /// Total integration time (s); should be >> 1/kappa_total and >> tau.
    pub duration: f64,
    /// Steps per one-way delay tau (sets dt = tau/steps_per_tau when the
    /// delay is active).
    pub steps_per_tau: usize,
    /// Retained round trips in the delayed feedback.
    pub max_round_trips: usize,
}

impl Default for TimeDomainSpec {
    fn default() -> Self {
        TimeDomainSpec { duration: 0.0, steps_per_tau: 32, max_round_trips: 64 }
    }
}

/// Steady-state result of the time-domain run.
#[derive(Debug, Clone, Copy)]
pub struct TimeDomainResult {
    /// Steady-state S11 phasor (output/input envelope ratio).
    pub s11: Complex64,
    /// Relative drift of the field envelope over the last averaging window;
    /// large values mean the run was too short.
    pub settling: f64,
    /// Set when the settling metric exceeded the steady-state tolerance.
    pub non_steady: bool,
}

/// Integrates the classical delayed-feedback amplitude equation for the
/// unpumped linear JPA, with the round-trip history kept in an explicit
/// ring buffer, and extracts the steady-state reflection phasor.
///
/// The drive is monochromatic at detuning `delta`, so the probe envelope is
/// constant in the co-rotating frame and each delayed tap enters with its
/// exact phase factor while the system field history is taken from the
/// buffer.
pub fn time_domain_delay_simulation(
    delta: f64,
    jpa: &JpaParams,
    fp: &FabryPerotParams,
    spec: &TimeDomainSpec,
) -> Result<TimeDomainResult> {
    fp.validate()?;
    let kappa = jpa.kappa;
    let kappa0 = jpa.kappa0;
    let kappa_t = kappa + kappa0;
    let eta0 = fp.eta0;
    let t_mag = fp.eta.sqrt();
    let tau = std::f64::consts::PI / fp.fsr;
    let omega = jpa.omega_a + delta;

    // Mirror reflection with its intrinsic phase; the propagation phase
    // 2*n*omega*tau is applied per tap below. phi_R follows from phi0.
    let phi_r_mirror = fp.phi0 - 2.0 * omega_a_round(jpa.omega_a, tau);
    let r_mirror = Complex64::from_polar((1.0 - fp.eta).sqrt(), phi_r_mirror);

    let n_taps = if fp.round_trip_magnitude() > 0.0 {
        let needed = (1e-16f64.ln() / fp.round_trip_magnitude().ln()).ceil() as usize;
        needed.clamp(1, spec.max_round_trips)
    } else {
        0
    };

    // Delay taps must land on integer step counts, so dt divides the
    // round-trip time 2*tau; the kappa_total clamp keeps the fast linear
    // part resolved when tau is long.
    let (dt, delay_steps) = if n_taps > 0 {
        let dt_req = ((2.0 * tau) / spec.steps_per_tau as f64).min(0.02 / kappa_t);
        let steps = ((2.0 * tau) / dt_req).ceil() as usize;
        ((2.0 * tau) / steps as f64, steps)
    } else {
        (0.02 / kappa_t, 0)
    };

    let duration = if spec.duration > 0.0 {
        spec.duration
    } else {
        60.0 / kappa_t + 2.0 * tau * (n_taps as f64 + 1.0)
    };
    let total_steps = (duration / dt).ceil() as usize;

    // Ring buffer of a(t) envelopes at step resolution.
    let hist_len = delay_steps * n_taps + 1;
    let mut history = vec![Complex64::new(0.0, 0.0); hist_len.max(1)];
    let mut head = 0usize;

    // Per-tap coupling constants: (R*eta0)^n with propagation phase
    // e^{i*2*n*omega*tau} applied explicitly.
    let tap = |n: usize| -> Complex64 {
        let base = r_mirror * eta0;
        let phase = Complex64::from_polar(1.0, 2.0 * (n as f64) * omega * tau);
        base.powu(n as u32) * phase
    };
    let taps: Vec<Complex64> = (1..=n_taps).map(tap).collect();
    // Drive terms: the monochromatic input envelope is 1, delayed copies
    // only pick up phases.
    let drive_sum: Complex64 = (0..=n_taps).map(tap).sum();

    let c_in = Complex64::new(1.0, 0.0);
    let drive = Complex64::new(0.0, -1.0) * t_mag * (eta0 * kappa).sqrt() * drive_sum * c_in;

    let a_at = |history: &Vec<Complex64>, head: usize, steps_back: usize| -> Complex64 {
        if steps_back >= history.len() {
            return Complex64::new(0.0, 0.0);
        }
        let idx = (head + history.len() - steps_back) % history.len();
        history[idx]
    };

    // d a/dt = (i*delta - kappa_t/2) a - kappa*sum_n taps[n]*a(t - 2n tau) + drive
    let lin = Complex64::new(-kappa_t / 2.0, delta);
    let mut a = Complex64::new(0.0, 0.0);
    let mut window_acc = Complex64::new(0.0, 0.0);
    let mut prev_window = Complex64::new(0.0, 0.0);
    let window = (total_steps / 10).max(1);
    let mut window_count = 0usize;
    let mut settling = f64::INFINITY;

    for _ in 0..total_steps {
        // RK4 with the delayed terms held from the buffer over the step
        // (method of steps at sub-delay resolution).
        let delayed: Complex64 = taps
            .iter()
            .enumerate()
            .map(|(i, t)| *t * a_at(&history, head, delay_steps * (i + 1)))
            .sum();
        let f = |x: Complex64| lin * x - kappa * delayed + drive;
        let k1 = f(a);
        let k2 = f(a + 0.5 * dt * k1);
        let k3 = f(a + 0.5 * dt * k2);
        let k4 = f(a + dt * k3);
        a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        head = (head + 1) % history.len();
        history[head] = a;

        window_acc += a;
        window_count += 1;
        if window_count == window {
            let mean = window_acc / window as f64;
            if prev_window.norm() > 0.0 {
                settling = (mean - prev_window).norm() / mean.norm().max(1e-300);
            }
            prev_window = mean;
            window_acc = Complex64::new(0.0, 0.0);
            window_count = 0;
        }
    }

    // Output: c_out = -i*T*sqrt(eta0*kappa)*sum_n taps[n]*a(t-2n tau)
    //         - R*e^{-2 i omega tau} c_in + |T|^2 eta0 * drive_sum * c_in
    let delayed_out: Complex64 = (0..=n_taps)
        .map(|n| tap(n) * a_at(&history, head, delay_steps * n))
        .sum();
    let direct = -(r_mirror * Complex64::from_polar(1.0, 2.0 * omega * tau)).conj() * c_in
        + fp.eta * eta0 * drive_sum * c_in;
    let c_out = Complex64::new(0.0, -1.0) * t_mag * (eta0 * kappa).sqrt() * delayed_out + direct;

    let non_steady = !(settling < 1e-6);
    Ok(TimeDomainResult { s11: c_out / c_in, settling, non_steady })
}

// 2*omega_a*tau reduced modulo 2*pi, so phi_R stays well-conditioned even
// for omega_a*tau >> 1.
fn omega_a_round(omega_a: f64, tau: f64) -> f64 {
    (omega_a * tau).rem_euclid(std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::JpaParams;
    use crate::interference::{gain_spectrum, reference_spectrum, reflection_spectrum};
    use std::f64::consts::{FRAC_PI_3, PI};

    const TWO_PI: f64 = 2.0 * PI;

    fn fitted_jpa() -> JpaParams {
        JpaParams::from_rates(TWO_PI * 9.5e9, TWO_PI * 280e6, TWO_PI * 22e6)
    }

    fn fitted_fp() -> FabryPerotParams {
        FabryPerotParams::new(0.996, 0.803, TWO_PI * 140e6, -1.05, -0.048).unwrap()
    }

    #[test]
    fn series_single_term_at_transparent_mirror() {
        let jpa = fitted_jpa();
        let fp = FabryPerotParams::new(1.0, 0.9, TWO_PI * 140e6, 0.0, 0.0).unwrap();
        let spec = TruncationSpec::new(200, 1e-30).unwrap();
        let res = truncated_series_reflection(0.0, &jpa, &fp, &spec, Reflector::JpaModel).unwrap();
        assert_eq!(res.terms_used, 1); // the n=1 term already vanishes
        let closed = reflection_spectrum(0.0, &jpa, &fp);
        assert!((res.value - closed).norm() <= 1e-15 * closed.norm());
    }

    #[test]
    fn series_matches_closed_form_on_fitted_set() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let spec = TruncationSpec::new(200, 0.0_f64.max(1e-300)).unwrap();
        for i in 0..601 {
            let d = TWO_PI * (-300e6 + (i as f64) * 1e6);
            let res =
                truncated_series_reflection(d, &jpa, &fp, &spec, Reflector::JpaModel).unwrap();
            let closed = reflection_spectrum(d, &jpa, &fp);
            assert!(
                (res.value - closed).norm() <= 1e-9 * closed.norm().max(1e-6),
                "mismatch {} at {}",
                (res.value - closed).norm(),
                d
            );
        }
    }

    #[test]
    fn series_pure_phase_matches_reference() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let spec = TruncationSpec::new(300, 1e-300).unwrap();
        for d in [-TWO_PI * 200e6, 0.0, TWO_PI * 130e6] {
            let res =
                truncated_series_reflection(d, &jpa, &fp, &spec, Reflector::PurePhase(fp.phi_ref))
                    .unwrap();
            let closed = reference_spectrum(d, &fp);
            assert!((res.value - closed).norm() <= 1e-9 * closed.norm().max(1e-6));
        }
        // eta = 1 limit: eta0*exp(i*phi_r) in one term.
        let fp1 = FabryPerotParams::new(1.0, 0.803, TWO_PI * 140e6, 0.0, 0.3).unwrap();
        let res =
            truncated_series_reflection(0.0, &jpa, &fp1, &spec, Reflector::PurePhase(0.3)).unwrap();
        let expected = 0.803 * Complex64::from_polar(1.0, 0.3);
        assert!((res.value - expected).norm() < 1e-12);
    }

    #[test]
    fn series_tail_bound_is_respected() {
        let jpa = fitted_jpa();
        // Strong interference so the truncation error is visible.
        let fp = FabryPerotParams::new(0.7, 0.95, TWO_PI * 140e6, 0.9, 0.0).unwrap();
        let full = TruncationSpec::new(4000, 1e-300).unwrap();
        let reference = truncated_series_reflection(TWO_PI * 40e6, &jpa, &fp, &full, Reflector::JpaModel)
            .unwrap()
            .value;
        for n in [4, 8, 16, 32] {
            let spec = TruncationSpec::new(n, 1e-300).unwrap();
            let res =
                truncated_series_reflection(TWO_PI * 40e6, &jpa, &fp, &spec, Reflector::JpaModel)
                    .unwrap();
            assert!(res.truncated);
            // |closed - truncated| <= C * |R|^N with C from the parameters;
            // the geometric bound covers the c_in ladder up to an O(1)
            // prefactor from the resonant response. Allow that prefactor.
            let err = (res.value - reference).norm();
            let kappa_scale = 1.0 + jpa.kappa / (jpa.kappa_total() / 2.0);
            assert!(
                err <= 40.0 * kappa_scale * res.tail_bound,
                "err {} vs bound {} at n={}",
                err,
                res.tail_bound,
                n
            );
        }
    }

    #[test]
    fn response_inverse_matches_partial_geometric_sum() {
        // chi^-1 rebuilt from the explicit partial sum of round trips
        // agrees with the closed form once the tail is negligible.
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let delta = TWO_PI * 70e6;
        let r = crate::interference::round_trip_coeff(delta, &fp, Branch::Signal);
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut term = r;
        for _ in 0..200 {
            s1 += term;
            term *= r;
        }
        let chi_series =
            Complex64::new(-(jpa.kappa + jpa.kappa0) / 2.0, delta) - jpa.kappa * s1;
        let chi_closed =
            crate::interference::response_inverse(delta, &jpa, &fp, Branch::Signal);
        assert!((chi_series - chi_closed).norm() <= 1e-9 * chi_closed.norm());
    }

    #[test]
    fn matrix_solve_equals_series_at_zero_pump() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let drive = DriveParams::new(0.0).unwrap();
        let spec = TruncationSpec::new(400, 1e-300).unwrap();
        for d in [-TWO_PI * 150e6, TWO_PI * 10e6, TWO_PI * 220e6] {
            let m = signal_idler_matrix_solve(d, &jpa, &fp, &drive).unwrap();
            let s = truncated_series_reflection(d, &jpa, &fp, &spec, Reflector::JpaModel)
                .unwrap()
                .value;
            assert!((m - s).norm() <= 1e-9 * s.norm().max(1e-6));
        }
    }

    #[test]
    fn matrix_solve_equals_gain_closed_form() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let drive = DriveParams::new(0.7 * jpa.kappa).unwrap();
        for i in 0..500 {
            let d = TWO_PI * (-250e6 + i as f64 * 1e6);
            let m = signal_idler_matrix_solve(d, &jpa, &fp, &drive).unwrap();
            let g = gain_spectrum(d, &jpa, &fp, &drive).unwrap();
            assert!(
                (m - g).norm() <= 1e-12 * g.norm().max(1.0),
                "mismatch {:e} at {}",
                (m - g).norm(),
                d
            );
        }
    }

    #[test]
    fn matrix_solve_single_pole_point() {
        let kappa = TWO_PI * 280e6;
        let jpa = JpaParams::from_rates(TWO_PI * 9.5e9, kappa, 0.0);
        let fp = FabryPerotParams::new(1.0, 1.0, TWO_PI * 140e6, 0.0, 0.0).unwrap();
        let drive = DriveParams::new(0.6 * kappa).unwrap();
        let s11 = signal_idler_matrix_solve(0.0, &jpa, &fp, &drive).unwrap();
        assert!((s11 - Complex64::new(-2.125, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn squid_zero_flux_and_zero_beta() {
        let s = squid_numeric_charge_flux(0.0, 0.125, FRAC_PI_3).unwrap();
        assert!(s.theta.abs() < 1e-13);

        // beta = 0: theta = |cos(phi_c)|*sin(phi) exactly.
        for phi in [0.05, 0.2, 0.4] {
            let s = squid_numeric_charge_flux(phi, 0.0, FRAC_PI_3).unwrap();
            assert!((s.theta - FRAC_PI_3.cos() * phi.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn squid_solution_is_odd_in_phi() {
        for phi in [0.05, 0.13, 0.27] {
            let plus = squid_numeric_charge_flux(phi, 0.125, FRAC_PI_3).unwrap();
            let minus = squid_numeric_charge_flux(-phi, 0.125, FRAC_PI_3).unwrap();
            assert!((plus.theta + minus.theta).abs() < 1e-12);
        }
    }

    #[test]
    fn squid_cubic_expansion_deviation_scales_as_phi_fifth() {
        // beta = 0.125, phi_c = pi/3: the cubic truncation error must fall
        // off as phi^5 (odd series, next term is quintic).
        let beta = 0.125;
        let phi_c = FRAC_PI_3;
        let circuit = crate::circuit::CircuitParams {
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
        let bias = crate::circuit::BiasState::from_applied(phi_c, beta).unwrap();
        let exp = crate::circuit::charge_flux_expansion(&circuit, &bias).unwrap();

        let phis = [0.05, 0.1, 0.2];
        let devs: Vec<f64> = phis
            .iter()
            .map(|&phi| {
                let s = squid_numeric_charge_flux(phi, beta, phi_c).unwrap();
                (s.theta - exp.eval(phi)).abs()
            })
            .collect();
        let s1 = (devs[1] / devs[0]).ln() / (phis[1] / phis[0]).ln();
        let s2 = (devs[2] / devs[1]).ln() / (phis[2] / phis[1]).ln();
        assert!((s1 - 5.0).abs() < 0.3, "slope {s1}");
        assert!((s2 - 5.0).abs() < 0.3, "slope {s2}");

        // Relative truncation error bounded by a constant times phi^4 up
        // to phi = 0.3 (the constant here is about 7e-3).
        for i in 0..15 {
            let phi = 0.02 + 0.28 * (i as f64) / 14.0;
            let s = squid_numeric_charge_flux(phi, beta, phi_c).unwrap();
            let rel = (s.theta - exp.eval(phi)).abs() / s.theta.abs();
            assert!(rel <= 0.02 * phi.powi(4), "rel err {rel:.3e} at phi = {phi}");
        }
    }

    #[test]
    fn time_domain_zero_delay_limit_recovers_one_port_cavity() {
        // tau -> 0 (fsr huge) and eta = 1: the textbook one-port result.
        let jpa = fitted_jpa();
        let fp = FabryPerotParams::new(1.0, 0.9, TWO_PI * 1e12, 0.0, 0.0).unwrap();
        let res = time_domain_delay_simulation(0.0, &jpa, &fp, &TimeDomainSpec::default()).unwrap();
        assert!(!res.non_steady);
        let closed = reflection_spectrum(0.0, &jpa, &fp);
        assert!((res.s11 - closed).norm() < 1e-6, "dev {}", (res.s11 - closed).norm());
    }

    #[test]
    fn time_domain_matches_closed_form_on_fitted_set() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        for d in [0.0, TWO_PI * 60e6, -TWO_PI * 110e6] {
            let res =
                time_domain_delay_simulation(d, &jpa, &fp, &TimeDomainSpec::default()).unwrap();
            let closed = reflection_spectrum(d, &jpa, &fp);
            assert!(!res.non_steady);
            assert!(
                (res.s11 - closed).norm() <= 1e-3 * closed.norm().max(1.0),
                "dev {} at {}",
                (res.s11 - closed).norm(),
                d
            );
        }
    }

    #[test]
    fn time_domain_step_halving_converges() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        // steps_per_tau beyond the kappa clamp, so halving actually halves dt.
        let coarse = TimeDomainSpec { steps_per_tau: 1024, ..Default::default() };
        let fine = TimeDomainSpec { steps_per_tau: 2048, ..Default::default() };
        let a = time_domain_delay_simulation(0.0, &jpa, &fp, &coarse).unwrap();
        let b = time_domain_delay_simulation(0.0, &jpa, &fp, &fine).unwrap();
        assert!((a.s11 - b.s11).norm() < 1e-4, "dev {}", (a.s11 - b.s11).norm());
    }

    #[test]
    fn time_domain_flags_short_runs() {
        let jpa = fitted_jpa();
        let fp = fitted_fp();
        let spec = TimeDomainSpec { duration: 0.2 / jpa.kappa_total(), ..Default::default() };
        let res = time_domain_delay_simulation(0.0, &jpa, &fp, &spec).unwrap();
        assert!(res.non_steady);
    }
}
