//! Perturbative circuit model of a SQUID-array JPA with finite loop
//! inductance: effective inductances, participation ratios, and the
//! Hamiltonian-level parameters derived from them.
//!
//! The SQUID array with loop inductance reduces, to leading nonlinear
//! order, to a series combination of a linear inductor L_loop/4 per SQUID
//! and a flux-tunable junction L_J^eff = L_J/(2|cos φ_ex^eff|), where the
//! effective flux differs from the applied flux by the screening of the
//! circulating loop current.

use crate::constants::{E_CHARGE, PHI0, Z_QUANTUM};
use crate::error::{Error, Result};

/// Floor on |cos φ_ex^eff| below which the bias is rejected as degenerate
/// (the effective inductance diverges and ε ≪ 1 no longer holds).
pub const BIAS_COS_FLOOR: f64 = 1e-3;

/// Fixed-point solver tolerance for the circulating-flux equation.
pub const FLUX_SOLVER_TOL: f64 = 1e-12;
const FLUX_SOLVER_MAX_ITER: usize = 200;

/// Physical circuit values of the JPA.
///
/// All inductances in henry, capacitances in farad, impedance in ohm.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    /// Number of SQUIDs in the array.
    pub n_squids: u32,
    /// Loop inductance of a single SQUID (H).
    pub l_loop: f64,
    /// Josephson inductance of a single junction (H).
    pub l_josephson: f64,
    /// Geometric (stray) inductance in series with the array (H).
    pub l_geometric: f64,
    /// Internal shunt capacitance C_i (F).
    pub c_internal: f64,
    /// Coupling capacitance C_κ to the waveguide (F).
    pub c_coupling: f64,
    /// Waveguide characteristic impedance Z_0 (Ω).
    pub z_waveguide: f64,
    /// Mutual inductance between pump line and each SQUID loop (H).
    pub mutual: f64,
    /// Shunt inductance terminating the pump waveguide (H).
    pub l_pump_shunt: f64,
}

impl CircuitParams {
    /// Checks all type invariants, including the no-bistability condition
    /// β = (L_loop/2)/L_J ≤ 1.
    pub fn validate(&self) -> Result<()> {
        if self.n_squids < 1 {
            return Err(Error::Validation("n_squids must be >= 1".into()));
        }
        for (name, v) in [
            ("l_loop", self.l_loop),
            ("l_josephson", self.l_josephson),
            ("l_geometric", self.l_geometric),
            ("c_internal", self.c_internal),
            ("c_coupling", self.c_coupling),
            ("z_waveguide", self.z_waveguide),
            ("mutual", self.mutual),
            ("l_pump_shunt", self.l_pump_shunt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if self.beta() > 1.0 {
            return Err(Error::Validation(format!(
                "bistable SQUID: beta = (l_loop/2)/l_josephson = {} exceeds 1",
                self.beta()
            )));
        }
        Ok(())
    }

    /// Inductance ratio β = L_h/L_J with L_h = L_loop/2.
    pub fn beta(&self) -> f64 {
        (self.l_loop / 2.0) / self.l_josephson
    }

    /// Total capacitance C_tot = C_i + C_κ.
    pub fn c_total(&self) -> f64 {
        self.c_internal + self.c_coupling
    }
}

/// Flux bias of the SQUID array, in reduced-flux-quantum units.
///
/// `phi_ex` is the applied flux per SQUID, Φ_ex/(2Φ₀); `phi_ex_eff` is the
/// effective flux after subtracting the screening by the circulating loop
/// current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasState {
    /// Applied external flux per SQUID, Φ_ex/(2Φ₀) (dimensionless).
    pub phi_ex: f64,
    /// Effective external flux φ_ex^eff (dimensionless).
    pub phi_ex_eff: f64,
}

impl BiasState {
    /// Bias specified directly by its effective flux (the quantity that
    /// enters every downstream formula). The applied flux is then back-
    /// computed for bookkeeping, which needs no solve.
    pub fn from_effective(phi_ex_eff: f64, beta: f64) -> Self {
        // Inverting the fixed point on the positive-cos branch:
        // x = beta*sin(phi_eff), phi_ex = phi_eff + x.
        let x = beta * phi_ex_eff.sin();
        BiasState { phi_ex: phi_ex_eff + x, phi_ex_eff }
    }

    /// Bias specified by the applied flux; solves the circulating-current
    /// fixed point for the given circuit's β.
    pub fn from_applied(phi_ex: f64, beta: f64) -> Result<Self> {
        let sol = solve_circulating_flux(phi_ex, beta)?;
        Ok(BiasState { phi_ex, phi_ex_eff: sol.phi_ex_eff })
    }

    /// Bias specified as a dc current through the flux line together with a
    /// user-supplied current-to-flux coefficient (reduced flux quanta per
    /// ampere).
    pub fn from_bias_current(i_bias: f64, flux_per_ampere: f64, beta: f64) -> Result<Self> {
        Self::from_applied(i_bias * flux_per_ampere, beta)
    }
}

/// Solution of the circulating-flux fixed point.
#[derive(Debug, Clone, Copy)]
pub struct CirculatingFlux {
    /// x = L_loop·Q̇_c(0)/(2Φ₀), the screening flux (dimensionless).
    pub x: f64,
    /// Effective external flux φ_ex^eff = φ_c − x.
    pub phi_ex_eff: f64,
    /// Final residual |x − β sin(φ_c − x)|.
    pub residual: f64,
    /// Iterations used by the damped fixed-point stage.
    pub iterations: usize,
    /// True when the solution sits on the branch with cos(φ_ex^eff) < 0,
    /// i.e. the bias crossed π/2 on this branch.
    pub crossed_half_quantum: bool,
}

/// Solves the screening fixed point x = ±β·sin(φ_c − x) for the circulating
/// current at zero node flux, with the sign branch fixed by the potential
/// minimum (positive cos branch).
///
/// Damped iteration with a bisection fallback; g(x) = x − β sin(φ_c − x) is
/// monotone for β ≤ 1, so the fallback always brackets a root in [−β, β].
/// β = 1 reproduces the bare fixed point x = sin(φ_c − x); β → 0 is the
/// vanishing-loop-inductance limit x → 0.
pub fn solve_circulating_flux(phi_c: f64, beta: f64) -> Result<CirculatingFlux> {
    if !phi_c.is_finite() {
        return Err(Error::Domain("phi_c must be finite".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must lie in [0, 1], got {beta}")));
    }

    let f = |x: f64| beta * (phi_c - x).sin();
    let mut x = f(0.0);
    let mut residual = (x - f(x)).abs();
    let mut iterations = 0usize;
    // Damped Picard iteration; the map has contraction factor <= beta away
    // from the degenerate points, damping handles beta near 1.
    let damping = 0.5;
    while residual > FLUX_SOLVER_TOL && iterations < FLUX_SOLVER_MAX_ITER {
        x += damping * (f(x) - x);
        residual = (x - f(x)).abs();
        iterations += 1;
    }
    if residual > FLUX_SOLVER_TOL {
        // Bisection fallback on the monotone g(x) = x - f(x) over [-beta, beta].
        let g = |x: f64| x - f(x);
        let (mut lo, mut hi) = (-beta - FLUX_SOLVER_TOL, beta + FLUX_SOLVER_TOL);
        if g(lo) > 0.0 || g(hi) < 0.0 {
            return Err(Error::NonConvergence { iterations, residual });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = 0.5 * (lo + hi);
        residual = g(x).abs();
        if residual > FLUX_SOLVER_TOL {
            return Err(Error::NonConvergence { iterations: iterations + 200, residual });
        }
    }
    let phi_ex_eff = phi_c - x;
    Ok(CirculatingFlux {
        x,
        phi_ex_eff,
        residual,
        iterations,
        crossed_half_quantum: phi_ex_eff.cos() < 0.0,
    })
}

/// Flux-tunable effective Josephson inductance L_J^eff = L_J/(2|cos φ_ex^eff|).
pub fn effective_josephson_inductance(l_j: f64, phi_ex_eff: f64) -> Result<f64> {
    if !(l_j > 0.0) {
        return Err(Error::Domain(format!("l_j must be positive, got {l_j}")));
    }
    let cos_abs = phi_ex_eff.cos().abs();
    if cos_abs < BIAS_COS_FLOOR {
        return Err(Error::DegenerateBias { cos_abs, floor: BIAS_COS_FLOOR });
    }
    Ok(l_j / (2.0 * cos_abs))
}

/// Hamiltonian-level JPA parameters, dimensional and dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JpaParams {
    /// Resonance frequency ω_a (rad/s).
    pub omega_a: f64,
    /// External coupling rate κ (rad/s).
    pub kappa: f64,
    /// Intrinsic loss rate κ₀ (rad/s).
    pub kappa0: f64,
    /// Self-Kerr coefficient K (rad/s); non-positive.
    pub kerr: f64,
    /// Two-photon drive amplitude Ω_p (rad/s).
    pub omega_pump_amp: f64,
    /// Effective fine-structure constant α_a = Z/Z_Q.
    pub alpha_a: f64,
    /// Josephson participation ratio p_J = N·L_J^eff/L_tot.
    pub p_j: f64,
    /// SQUID-internal participation ratio p_SQ = L_J^eff/(L_loop/4 + L_J^eff).
    pub p_sq: f64,
    /// Capacitive participation ratio p_κ = C_κ/C_tot.
    pub p_kappa: f64,
    /// Dimensionless Kerr coefficient K̄ = K/ω_a.
    pub kbar: f64,
    /// Dimensionless drive amplitude Ω̄_p = Ω_p/ω_a.
    pub omegabar_p: f64,
    /// Dimensionless coupling κ̄ = κ/ω_a.
    pub kappabar: f64,
}

impl JpaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_a > 0.0) {
            return Err(Error::Validation("omega_a must be positive".into()));
        }
        if self.kappa <= 0.0 || self.kappa0 < 0.0 {
            return Err(Error::Validation("kappa must be > 0 and kappa0 >= 0".into()));
        }
        if self.kerr > 0.0 {
            return Err(Error::Validation("kerr must be <= 0".into()));
        }
        if self.p_j > self.p_sq + 1e-12 {
            return Err(Error::Validation(format!("p_j = {} exceeds p_sq = {}", self.p_j, self.p_sq)));
        }
        if !(self.p_kappa > 0.0 && self.p_kappa < 1.0) {
            return Err(Error::Validation("p_kappa must lie in (0, 1)".into()));
        }
        if !(self.p_sq > 0.0 && self.p_sq <= 1.0) {
            return Err(Error::Validation("p_sq must lie in (0, 1]".into()));
        }
        if self.omega_pump_amp < 0.0 {
            return Err(Error::Validation("omega_pump_amp must be >= 0".into()));
        }
        Ok(())
    }

    /// Total linewidth κ + κ₀ (rad/s).
    pub fn kappa_total(&self) -> f64 {
        self.kappa + self.kappa0
    }

    /// Convenience constructor for rate-level modeling and fitting, where
    /// only (ω_a, κ, κ₀) matter. Participation ratios are set to benign
    /// placeholder values.
    pub fn from_rates(omega_a: f64, kappa: f64, kappa0: f64) -> Self {
        JpaParams {
            omega_a,
            kappa,
            kappa0,
            kerr: 0.0,
            omega_pump_amp: 0.0,
            alpha_a: f64::NAN,
            p_j: f64::NAN,
            p_sq: f64::NAN,
            p_kappa: f64::NAN,
            kbar: 0.0,
            omegabar_p: 0.0,
            kappabar: kappa / omega_a,
        }
    }

    /// Returns a copy with the two-photon drive amplitude set.
    pub fn with_pump(mut self, omega_pump_amp: f64) -> Self {
        self.omega_pump_amp = omega_pump_amp;
        self.omegabar_p = omega_pump_amp / self.omega_a;
        self
    }
}

/// Derives the Hamiltonian parameters of the biased circuit.
///
/// L_tot = N(L_loop/4 + L_J^eff) + L_g, ω_a = 1/√(L_tot·C_tot),
/// K̄ = −α_a·p_J³/(8N²), κ̄ = (α₀/α_a)·p_κ². The intrinsic loss κ₀ is not
/// predicted by the circuit model and is returned as zero.
pub fn hamiltonian_params(circuit: &CircuitParams, bias: &BiasState) -> Result<JpaParams> {
    circuit.validate()?;
    let n = f64::from(circuit.n_squids);
    let l_j_eff = effective_josephson_inductance(circuit.l_josephson, bias.phi_ex_eff)?;
    let l_quarter = circuit.l_loop / 4.0;
    let l_tot = n * (l_quarter + l_j_eff) + circuit.l_geometric;
    let c_tot = circuit.c_total();
    let omega_a = 1.0 / (l_tot * c_tot).sqrt();

    let p_j = n * l_j_eff / l_tot;
    let p_sq = l_j_eff / (l_quarter + l_j_eff);
    let p_kappa = circuit.c_coupling / c_tot;

    let z = (l_tot / c_tot).sqrt();
    let alpha_a = z / Z_QUANTUM;
    let alpha_0 = circuit.z_waveguide / Z_QUANTUM;

    let kbar = -alpha_a * p_j.powi(3) / (8.0 * n * n);
    let kappabar = (alpha_0 / alpha_a) * p_kappa * p_kappa;

    let params = JpaParams {
        omega_a,
        kappa: kappabar * omega_a,
        kappa0: 0.0,
        kerr: kbar * omega_a,
        omega_pump_amp: 0.0,
        alpha_a,
        p_j,
        p_sq,
        p_kappa,
        kbar,
        omegabar_p: 0.0,
        kappabar,
    };
    params.validate()?;
    Ok(params)
}

/// Dimensional self-Kerr coefficient through the charging-energy route,
/// ħK = −p_J³·E_C_tot/(4N²). Used as an independent consistency check on
/// the dimensionless form.
pub fn kerr_from_charging_energy(circuit: &CircuitParams, p_j: f64) -> f64 {
    let n = f64::from(circuit.n_squids);
    let e_c = (2.0 * E_CHARGE).powi(2) / (2.0 * circuit.c_total());
    -p_j.powi(3) * e_c / (4.0 * n * n * crate::constants::HBAR)
}

/// Result of the pump-line drive conversion.
#[derive(Debug, Clone, Copy)]
pub struct PumpDrive {
    /// Dimensionless pump flux amplitude φ_p.
    pub phi_p: f64,
    /// Two-photon drive amplitude Ω_p (rad/s).
    pub omega_pump_amp: f64,
}

/// Converts applied pump power to flux-pump amplitude and two-photon drive.
///
/// φ_p = 2√2·M·√(P·Z₀)/(Φ₀·√(Z₀² + (ω_p·L_p)²)) and
/// Ω_p = ω_a·p_J·p_SQ·tan(φ_ex^eff)·φ_p/4. The unsimplified impedance
/// divider is always used; it reduces to 1/Z₀ when ω_p·L_p ≪ Z₀.
pub fn pump_amplitude(
    circuit: &CircuitParams,
    pump_power: f64,
    omega_p: f64,
    jpa: &JpaParams,
    bias: &BiasState,
) -> Result<PumpDrive> {
    if pump_power < 0.0 {
        return Err(Error::Domain(format!("pump power must be >= 0, got {pump_power}")));
    }
    let z0 = circuit.z_waveguide;
    let divider = (z0 * z0 + (omega_p * circuit.l_pump_shunt).powi(2)).sqrt();
    let phi_p = 2.0 * std::f64::consts::SQRT_2 * circuit.mutual * (pump_power * z0).sqrt()
        / (PHI0 * divider);
    let omega_pump_amp =
        jpa.omega_a * jpa.p_j * jpa.p_sq * bias.phi_ex_eff.tan() * phi_p / 4.0;
    Ok(PumpDrive { phi_p, omega_pump_amp })
}

/// Cubic charge–flux expansion of the SQUID, θ(φ) ≈ c1·φ + c3·φ³/6.
#[derive(Debug, Clone, Copy)]
pub struct ChargeFluxExpansion {
    /// Linear coefficient c1 = |C_c(0)|/(1 + β|C_c(0)|).
    pub linear: f64,
    /// Cubic coefficient c3 = −|C_c(0)|(1 + ε)/(1 + β|C_c(0)|)⁴.
    pub cubic: f64,
    /// Kerr correction ε = 3(1 − p_SQ)·tan²(φ_ex^eff).
    pub epsilon: f64,
}

impl ChargeFluxExpansion {
    /// Evaluates the truncated series at reduced flux φ.
    pub fn eval(&self, phi: f64) -> f64 {
        self.linear * phi + self.cubic * phi.powi(3) / 6.0
    }
}

/// Maclaurin coefficients of the SQUID charge–flux relation at the given
/// bias, with the loop-inductance correction ε of the cubic term.
pub fn charge_flux_expansion(circuit: &CircuitParams, bias: &BiasState) -> Result<ChargeFluxExpansion> {
    circuit.validate()?;
    let beta = circuit.beta();
    let cos_abs = bias.phi_ex_eff.cos().abs();
    if cos_abs < BIAS_COS_FLOOR {
        return Err(Error::DegenerateBias { cos_abs, floor: BIAS_COS_FLOOR });
    }
    let denom = 1.0 + beta * cos_abs;
    let sin0 = bias.phi_ex_eff.sin();
    let epsilon = 3.0 * beta * sin0 * sin0 / (cos_abs * denom);
    Ok(ChargeFluxExpansion {
        linear: cos_abs / denom,
        cubic: -cos_abs * (1.0 + epsilon) / denom.powi(4),
        epsilon,
    })
}
