//! Device description and the default nanowire preset.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::materials::{
    channel_workfunction, thermal_voltage, DielectricMaterial, GateMaterial, SemiconductorMaterial,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateCoverage {
    DoubleGate,
    TriGate,
}

/// Geometry (nm), doping (cm^-3, positive = donors), gate stack and temperature
/// of one junctionless device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub channel_length_nm: f64,
    pub channel_width_nm: f64,
    pub channel_height_nm: f64,
    pub sd_extension_nm: f64,
    pub channel_doping_cm3: f64,
    pub sd_doping_cm3: f64,
    pub channel_material: SemiconductorMaterial,
    pub dielectric: DielectricMaterial,
    pub dielectric_thickness_nm: f64,
    pub gate: GateMaterial,
    pub gate_coverage: GateCoverage,
    pub temperature_k: f64,
    /// Multiplies the per-depth current of the double-gate slice.
    pub effective_width_factor: f64,
}

impl DeviceSpec {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Every violated invariant; empty when the spec is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, len) in [
            ("channel length", self.channel_length_nm),
            ("channel width", self.channel_width_nm),
            ("channel height", self.channel_height_nm),
            ("S/D extension length", self.sd_extension_nm),
        ] {
            if !(len > 0.0 && len.is_finite()) {
                v.push(format!("{name} must be positive (got {len} nm)"));
            }
        }
        if !(self.channel_doping_cm3.is_finite() && self.channel_doping_cm3 != 0.0) {
            v.push("channel doping must be nonzero".into());
        }
        if !(self.sd_doping_cm3.is_finite() && self.sd_doping_cm3 != 0.0) {
            v.push("S/D doping must be nonzero".into());
        }
        if self.channel_doping_cm3 * self.sd_doping_cm3 < 0.0 {
            v.push("doping sign mismatch (junctionless requires uniform type)".into());
        }
        if !(self.dielectric_thickness_nm > 0.5 && self.dielectric_thickness_nm <= 20.0) {
            v.push(format!(
                "dielectric thickness {} nm outside (0.5, 20] nm",
                self.dielectric_thickness_nm
            ));
        }
        if !(self.dielectric.relative_permittivity >= 1.0) {
            v.push(format!(
                "dielectric {}: permittivity must be at least 1",
                self.dielectric.name
            ));
        }
        if !(self.effective_width_factor > 0.0 && self.effective_width_factor.is_finite()) {
            v.push("effective width factor must be positive".into());
        }
        if !(200.0..=500.0).contains(&self.temperature_k) {
            v.push(format!(
                "temperature {} K outside [200, 500] K",
                self.temperature_k
            ));
        }
        v.extend(self.channel_material.violations());
        v.extend(self.gate.violations());
        v
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidSpec)
    }

    pub fn thermal_voltage(&self) -> f64 {
        thermal_voltage(self.temperature_k)
    }

    pub fn intrinsic_density(&self) -> f64 {
        self.channel_material.intrinsic_density(self.temperature_k)
    }

    /// Channel semiconductor workfunction (eV).
    pub fn channel_workfunction(&self) -> Result<f64> {
        channel_workfunction(
            &self.channel_material,
            self.channel_doping_cm3,
            self.temperature_k,
        )
    }

    /// Depth of the simulated slice times the coverage factor (nm).
    pub fn effective_width_nm(&self) -> f64 {
        self.channel_width_nm * self.effective_width_factor
    }

    /// Source-to-drain contact spacing (nm).
    pub fn total_length_nm(&self) -> f64 {
        self.channel_length_nm + 2.0 * self.sd_extension_nm
    }

    pub fn with_workfunction(&self, phi_m: f64) -> Self {
        Self {
            gate: GateMaterial::Metal {
                workfunction_ev: phi_m,
            },
            ..self.clone()
        }
    }

    /// Short stable hash of the serialized spec.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("DeviceSpec serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The 22 x 10 x 10 nm n-type nanowire with a 2 nm HfO2 / tungsten gate.
pub fn default_paper_device() -> DeviceSpec {
    let width = 10.0;
    let height = 10.0;
    DeviceSpec {
        channel_length_nm: 22.0,
        channel_width_nm: width,
        channel_height_nm: height,
        sd_extension_nm: 10.0,
        channel_doping_cm3: 2e19,
        sd_doping_cm3: 2e19,
        channel_material: SemiconductorMaterial::silicon(),
        dielectric: DielectricMaterial::hfo2(),
        dielectric_thickness_nm: 2.0,
        gate: GateMaterial::Metal {
            workfunction_ev: 4.63,
        },
        gate_coverage: GateCoverage::DoubleGate,
        temperature_k: 300.0,
        // tri-gate perimeter W + 2H carried by the two gates of the slice
        effective_width_factor: (width + 2.0 * height) / (2.0 * height),
    }
}

/// Terminal voltages (V).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasPoint {
    pub v_g: f64,
    pub v_d: f64,
    pub v_s: f64,
}

impl BiasPoint {
    pub fn new(v_g: f64, v_d: f64) -> Self {
        Self { v_g, v_d, v_s: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [("V_g", self.v_g), ("V_d", self.v_d), ("V_s", self.v_s)] {
            if !(v.abs() <= 5.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v} V outside [-5, 5] V"
                )));
            }
        }
        Ok(())
    }
}
