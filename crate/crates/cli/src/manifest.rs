//! JSON manifests and their conversion to the library's internal types.
//!
//! On-disk units: Hz, W, H, F, Ohm, rad. Internally everything angular is
//! rad/s. Unknown fields are rejected so typos fail loudly.

use serde::{Deserialize, Serialize};

use fpjpa::circuit::{CircuitParams, JpaParams};
use fpjpa::fitting::ParamInit;
use fpjpa::interference::{DriveParams, FabryPerotParams};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitJson {
    pub n_squids: u32,
    pub l_loop_H: f64,
    pub l_josephson_H: f64,
    pub l_geometric_H: f64,
    pub c_internal_F: f64,
    pub c_coupling_F: f64,
    pub z_waveguide_Ohm: f64,
    pub mutual_H: f64,
    pub l_pump_shunt_H: f64,
}

impl CircuitJson {
    pub fn to_circuit(&self) -> CircuitParams {
        CircuitParams {
            n_squids: self.n_squids,
            l_loop: self.l_loop_H,
            l_josephson: self.l_josephson_H,
            l_geometric: self.l_geometric_H,
            c_internal: self.c_internal_F,
            c_coupling: self.c_coupling_F,
            z_waveguide: self.z_waveguide_Ohm,
            mutual: self.mutual_H,
            l_pump_shunt: self.l_pump_shunt_H,
        }
    }

    pub fn from_circuit(c: &CircuitParams) -> Self {
        CircuitJson {
            n_squids: c.n_squids,
            l_loop_H: c.l_loop,
            l_josephson_H: c.l_josephson,
            l_geometric_H: c.l_geometric,
            c_internal_F: c.c_internal,
            c_coupling_F: c.c_coupling,
            z_waveguide_Ohm: c.z_waveguide,
            mutual_H: c.mutual,
            l_pump_shunt_H: c.l_pump_shunt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JpaJson {
    pub omega_a_Hz: f64,
    pub kappa_Hz: f64,
    #[serde(default)]
    pub kappa0_Hz: f64,
    #[serde(default)]
    pub kerr_Hz: f64,
    #[serde(default)]
    pub omega_pump_amp_Hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegabar_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappabar: Option<f64>,
}

impl JpaJson {
    pub fn to_jpa(&self) -> JpaParams {
        JpaParams::from_rates(
            hz_to_rad(self.omega_a_Hz),
            hz_to_rad(self.kappa_Hz),
            hz_to_rad(self.kappa0_Hz),
        )
        .with_pump(hz_to_rad(self.omega_pump_amp_Hz))
    }

    pub fn from_jpa(j: &JpaParams) -> Self {
        JpaJson {
            omega_a_Hz: rad_to_hz(j.omega_a),
            kappa_Hz: rad_to_hz(j.kappa),
            kappa0_Hz: rad_to_hz(j.kappa0),
            kerr_Hz: rad_to_hz(j.kerr),
            omega_pump_amp_Hz: rad_to_hz(j.omega_pump_amp),
            alpha_a: Some(j.alpha_a),
            p_j: Some(j.p_j),
            p_sq: Some(j.p_sq),
            p_kappa: Some(j.p_kappa),
            kbar: Some(j.kbar),
            omegabar_p: Some(j.omegabar_p),
            kappabar: Some(j.kappabar),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FabryPerotJson {
    pub eta: f64,
    pub eta0: f64,
    pub fsr_Hz: f64,
    pub phi0_rad: f64,
    #[serde(default)]
    pub phi_ref_rad: f64,
}

impl FabryPerotJson {
    pub fn to_fp(&self) -> fpjpa::Result<FabryPerotParams> {
        FabryPerotParams::new(
            self.eta,
            self.eta0,
            hz_to_rad(self.fsr_Hz),
            self.phi0_rad,
            self.phi_ref_rad,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignTargetsJson {
    pub omega_a_Hz: f64,
    pub kappabar: f64,
    pub p_j: f64,
    pub n_squids: u32,
    pub l_loop_H: f64,
    pub l_geometric_H: f64,
    pub bias_phi_eff_rad: f64,
    pub z_waveguide_Ohm: f64,
}

impl DesignTargetsJson {
    pub fn to_targets(&self) -> fpjpa::design::DesignTargets {
        fpjpa::design::DesignTargets {
            omega_a_target: hz_to_rad(self.omega_a_Hz),
            kappabar_target: self.kappabar,
            p_j_target: self.p_j,
            n_squids: self.n_squids,
            l_loop_fixed: self.l_loop_H,
            l_geometric_fixed: self.l_geometric_H,
            bias_phi_eff: self.bias_phi_eff_rad,
            z_waveguide: self.z_waveguide_Ohm,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignOutputJson {
    pub circuit: CircuitJson,
    pub jpa: JpaJson,
    pub l_j_eff_H: f64,
    pub bias_phi_ex: f64,
    pub bias_phi_ex_eff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJson {
    /// Rate-level JPA description; alternatively give `circuit` plus
    /// `bias_phi_eff_rad`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jpa: Option<JpaJson>,
    /// Physical circuit description, reduced through the circuit model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_phi_eff_rad: Option<f64>,
    /// Intrinsic loss to attach when starting from a circuit (the circuit
    /// model itself does not predict it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa0_Hz: Option<f64>,
    /// Pump power for the circuit path; converted through the flux-pump
    /// chain at omega_p = 2*omega_a.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power_W: Option<f64>,
    pub fabry_perot: FabryPerotJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveJson>,
}

impl SimulateJson {
    /// Resolves either description to (JpaParams, optional drive).
    pub fn resolve(&self) -> Result<(JpaParams, Option<DriveParams>), String> {
        let mut drive = match &self.drive {
            Some(d) => Some(d.to_drive().map_err(|e| e.to_string())?),
            None => None,
        };
        let jpa = match (&self.jpa, &self.circuit) {
            (Some(j), None) => j.to_jpa(),
            (None, Some(c)) => {
                let circuit = c.to_circuit();
                let phi_eff = self
                    .bias_phi_eff_rad
                    .ok_or("circuit input needs bias_phi_eff_rad")?;
                let bias =
                    fpjpa::circuit::BiasState::from_effective(phi_eff, circuit.beta());
                let mut jpa = fpjpa::circuit::hamiltonian_params(&circuit, &bias)
                    .map_err(|e| e.to_string())?;
                if let Some(k0) = self.kappa0_Hz {
                    jpa.kappa0 = hz_to_rad(k0);
                }
                if let Some(power) = self.pump_power_W {
                    let pump = fpjpa::circuit::pump_amplitude(
                        &circuit,
                        power,
                        2.0 * jpa.omega_a,
                        &jpa,
                        &bias,
                    )
                    .map_err(|e| e.to_string())?;
                    jpa = jpa.with_pump(pump.omega_pump_amp);
                    if drive.is_none() {
                        drive = Some(
                            DriveParams::new(pump.omega_pump_amp).map_err(|e| e.to_string())?,
                        );
                    }
                }
                jpa
            }
            _ => return Err("give exactly one of `jpa` or `circuit`".into()),
        };
        Ok((jpa, drive))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveJson {
    pub omega_pump_amp_Hz: f64,
}

impl DriveJson {
    pub fn to_drive(&self) -> fpjpa::Result<DriveParams> {
        DriveParams::new(hz_to_rad(self.omega_pump_amp_Hz))
    }
}

/// Free/fixed initialization of one fit parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamInitJson {
    pub value: f64,
    #[serde(default)]
    pub fixed: bool,
}

impl ParamInitJson {
    pub fn to_init(self, scale: f64) -> ParamInit {
        ParamInit { value: self.value * scale, fixed: self.fixed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDatasetJson {
    pub csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power_W: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind")]
pub enum FitManifestJson {
    #[serde(rename = "reflection")]
    Reflection {
        datasets: Vec<FitDatasetJson>,
        delta0_Hz: ParamInitJson,
        kappa_Hz: ParamInitJson,
        kappa0_Hz: ParamInitJson,
        eta: ParamInitJson,
        eta0: ParamInitJson,
        fsr_Hz: ParamInitJson,
        phi0_rad: ParamInitJson,
        phi_ref_rad: ParamInitJson,
    },
    #[serde(rename = "gain_multi")]
    GainMulti {
        datasets: Vec<FitDatasetJson>,
        eta: ParamInitJson,
        eta0: ParamInitJson,
        fsr_Hz: ParamInitJson,
        phi0_rad: ParamInitJson,
        phi_ref_rad: ParamInitJson,
        /// Pump conversion c_p in Hz/sqrt(W): Omega_p/2pi = c_p*sqrt(P).
        c_p_Hz_per_sqrtW: ParamInitJson,
        /// One (kappa, kappa0) entry per dataset, or a single entry that
        /// is broadcast.
        rates: Vec<RateInitJson>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateInitJson {
    pub kappa_Hz: ParamInitJson,
    pub kappa0_Hz: ParamInitJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct FittedParamJson {
    pub name: String,
    pub value: f64,
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    pub fixed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResultJson {
    pub params: Vec<FittedParamJson>,
    pub residual_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub covariance_reliable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    pub per_dataset_residuals: Vec<f64>,
    pub best_start: usize,
    pub start_costs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode")]
pub enum NoiseJson {
    /// Invert measured pump-on/off powers into added noise.
    #[serde(rename = "calibration")]
    Calibration {
        p_on_s_W: f64,
        p_on_n_W: f64,
        p_off_s_W: f64,
        p_off_n_W: f64,
        p_calib_s_W: f64,
        eta0: f64,
        /// Direct power reflectance of the unpumped JPA; alternatively
        /// give kappa_Hz and kappa0_Hz.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s11_off_sq: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa_Hz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa0_Hz: Option<f64>,
        /// Vacuum photon number; 0.5 unless a thermal excess is known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_vac_photons: Option<f64>,
        omega_s_Hz: f64,
        b_if_Hz: f64,
    },
    /// Model-predicted added noise over a gain sweep (CSV gain_dB,n_fpj).
    #[serde(rename = "model_sweep")]
    ModelSweep {
        jpa: JpaJson,
        fabry_perot: FabryPerotJson,
        gain_db_start: f64,
        gain_db_stop: f64,
        n_points: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseOutputJson {
    pub p_fpj_n_W: f64,
    pub n_fpj_photons: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsParamsJson {
    pub jpa: JpaJson,
    pub fabry_perot: FabryPerotJson,
    pub drive: DriveJson,
    /// Sweep span in units of the free spectral range (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_fsr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Saturation prefactor; the scaling law carries an undetermined O(1)
    /// constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_prefactor: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsOutputJson {
    pub max_gain_db: f64,
    pub max_gain_linear: f64,
    pub bandwidth_3db_Hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gb_exponent: Option<f64>,
    pub multi_lobe: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ripple_visibility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_flux_photons_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityMapBaseJson {
    pub kappa_Hz: f64,
    pub kappa0_Hz: f64,
    pub eta0: f64,
    #[serde(default)]
    pub phi0_rad: f64,
    /// Calibration gain of the map in dB (default 25).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_gain_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "op")]
pub enum OracleJson {
    #[serde(rename = "series")]
    Series {
        jpa: JpaJson,
        fabry_perot: FabryPerotJson,
        detuning_Hz: f64,
        max_terms: usize,
        tail_tolerance: f64,
        /// Pure-phase reflector instead of the JPA model.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pure_phase_rad: Option<f64>,
    },
    #[serde(rename = "matrix")]
    Matrix {
        jpa: JpaJson,
        fabry_perot: FabryPerotJson,
        drive: DriveJson,
        detuning_Hz: f64,
    },
    #[serde(rename = "squid")]
    Squid { phi: f64, beta: f64, phi_c: f64 },
    #[serde(rename = "time_domain")]
    TimeDomain {
        jpa: JpaJson,
        fabry_perot: FabryPerotJson,
        detuning_Hz: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_s: Option<f64>,
    },
}
