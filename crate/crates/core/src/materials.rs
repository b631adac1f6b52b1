//! Material records, physical constants and workfunction arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge (C).
pub const Q: f64 = 1.602_176_634e-19;
/// Boltzmann constant (eV/K).
pub const K_B: f64 = 8.617_333_262e-5;
/// Vacuum permittivity (F/cm).
pub const EPS0: f64 = 8.854_187_812_8e-14;

/// Bundle of the constants above, for callers that want them as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub q: f64,
    pub k_b: f64,
    pub vacuum_permittivity: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            q: Q,
            k_b: K_B,
            vacuum_permittivity: EPS0,
        }
    }
}

impl PhysicalConstants {
    pub fn thermal_voltage(&self, temperature: f64) -> f64 {
        self.k_b * temperature
    }
}

/// kT/q in volts.
pub fn thermal_voltage(temperature: f64) -> f64 {
    K_B * temperature
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiconductorMaterial {
    pub name: String,
    pub relative_permittivity: f64,
    /// Electron affinity (eV).
    pub electron_affinity_ev: f64,
    /// Bandgap (eV).
    pub bandgap_ev: f64,
    /// Conduction-band effective density of states (cm^-3).
    pub nc_cm3: f64,
    /// Valence-band effective density of states (cm^-3).
    pub nv_cm3: f64,
    /// Low-field electron mobility as (doping cm^-3, mobility cm^2/Vs) pairs,
    /// ordered by increasing doping.
    pub mobility_table: Vec<(f64, f64)>,
}

impl SemiconductorMaterial {
    pub fn silicon() -> Self {
        Self {
            name: "Si".into(),
            relative_permittivity: 11.7,
            electron_affinity_ev: 4.05,
            bandgap_ev: 1.12,
            nc_cm3: 2.8e19,
            nv_cm3: 1.04e19,
            mobility_table: vec![
                (1e15, 1350.0),
                (1e16, 1200.0),
                (1e17, 800.0),
                (1e18, 270.0),
                (1e19, 130.0),
                (2e19, 100.0),
                (1e20, 70.0),
                (1e21, 50.0),
            ],
        }
    }

    /// Intrinsic carrier density under Boltzmann statistics.
    pub fn intrinsic_density(&self, temperature: f64) -> f64 {
        let vt = thermal_voltage(temperature);
        (self.nc_cm3 * self.nv_cm3).sqrt() * (-self.bandgap_ev / (2.0 * vt)).exp()
    }

    /// Mobility at the given doping magnitude, log-linear between table entries
    /// and clamped at the ends.
    pub fn mobility(&self, doping: f64) -> f64 {
        let table = &self.mobility_table;
        let d = doping.abs().max(1.0);
        match table.len() {
            0 => 0.0,
            1 => table[0].1,
            _ => {
                if d <= table[0].0 {
                    return table[0].1;
                }
                let last = table[table.len() - 1];
                if d >= last.0 {
                    return last.1;
                }
                let k = table.partition_point(|&(n, _)| n <= d);
                let (n0, m0) = table[k - 1];
                let (n1, m1) = table[k];
                let t = (d.ln() - n0.ln()) / (n1.ln() - n0.ln());
                m0 + t * (m1 - m0)
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.relative_permittivity > 1.0) {
            v.push(format!(
                "semiconductor {}: permittivity must exceed 1",
                self.name
            ));
        }
        if !(self.bandgap_ev > 0.0 && self.bandgap_ev < 10.0) {
            v.push(format!(
                "semiconductor {}: bandgap outside (0, 10) eV",
                self.name
            ));
        }
        if !(self.nc_cm3 > 0.0 && self.nv_cm3 > 0.0) {
            v.push(format!(
                "semiconductor {}: Nc and Nv must be positive",
                self.name
            ));
        }
        if self.mobility_table.is_empty() {
            v.push(format!("semiconductor {}: empty mobility table", self.name));
        }
        if self
            .mobility_table
            .iter()
            .any(|&(n, mu)| !(n > 0.0 && mu > 0.0))
        {
            v.push(format!(
                "semiconductor {}: mobility table entries must be positive",
                self.name
            ));
        }
        if self
            .mobility_table
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || w[1].1 > w[0].1)
        {
            v.push(format!(
                "semiconductor {}: mobility table must be ordered by doping and non-increasing",
                self.name
            ));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DielectricMaterial {
    pub name: String,
    pub relative_permittivity: f64,
}

impl DielectricMaterial {
    pub fn hfo2() -> Self {
        Self {
            name: "HfO2".into(),
            relative_permittivity: 22.0,
        }
    }

    pub fn sio2() -> Self {
        Self {
            name: "SiO2".into(),
            relative_permittivity: 3.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateMaterial {
    Metal {
        workfunction_ev: f64,
    },
    /// Doped polysilicon; positive doping is n-type, negative p-type.
    DopedPoly {
        poly_doping_cm3: f64,
    },
}

impl GateMaterial {
    pub fn violations(&self) -> Vec<String> {
        match *self {
            GateMaterial::Metal { workfunction_ev } => {
                if (3.0..=6.5).contains(&workfunction_ev) {
                    vec![]
                } else {
                    vec![format!(
                        "metal workfunction {workfunction_ev} eV outside [3.0, 6.5] eV"
                    )]
                }
            }
            GateMaterial::DopedPoly { poly_doping_cm3 } => {
                if (1e18..=1e21).contains(&poly_doping_cm3.abs()) {
                    vec![]
                } else {
                    vec![format!(
                        "poly doping magnitude {poly_doping_cm3:e} cm^-3 outside [1e18, 1e21]"
                    )]
                }
            }
        }
    }
}

/// Workfunction of a doped semiconductor under Boltzmann statistics.
///
/// Positive `net_doping` is n-type. The Fermi level is pinned to the band edge
/// once the doping reaches the effective density of states.
pub fn channel_workfunction(
    material: &SemiconductorMaterial,
    net_doping: f64,
    temperature: f64,
) -> Result<f64> {
    if net_doping == 0.0 || !net_doping.is_finite() {
        return Err(Error::InvalidInput(
            "channel workfunction undefined for zero net doping".into(),
        ));
    }
    if !(200.0..=500.0).contains(&temperature) {
        return Err(Error::InvalidInput(format!(
            "temperature {temperature} K outside [200, 500] K"
        )));
    }
    let kt = K_B * temperature;
    if net_doping > 0.0 {
        let ec_minus_ef = (kt * (material.nc_cm3 / net_doping).ln()).max(0.0);
        Ok(material.electron_affinity_ev + ec_minus_ef)
    } else {
        let ef_minus_ev = (kt * (material.nv_cm3 / -net_doping).ln()).max(0.0);
        Ok(material.electron_affinity_ev + material.bandgap_ev - ef_minus_ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelType {
    N,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateClass {
    NDepleting,
    PDepleting,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateClassification {
    pub class: GateClass,
    /// Set when the gate does not deplete the given channel type.
    pub warning: bool,
}

/// Classify a gate by which channel type its workfunction depletes.
pub fn classify_gate(
    phi_m: f64,
    channel_phi_s: f64,
    channel_type: ChannelType,
) -> Result<GateClassification> {
    for (label, phi) in [("gate", phi_m), ("channel", channel_phi_s)] {
        if !(3.0..=6.5).contains(&phi) {
            return Err(Error::InvalidInput(format!(
                "{label} workfunction {phi} eV outside [3.0, 6.5] eV"
            )));
        }
    }
    let diff = phi_m - channel_phi_s;
    if diff.abs() < 1e-3 {
        return Ok(GateClassification {
            class: GateClass::Flat,
            warning: false,
        });
    }
    let class = if diff > 0.0 {
        GateClass::NDepleting
    } else {
        GateClass::PDepleting
    };
    let warning = !matches!(
        (class, channel_type),
        (GateClass::NDepleting, ChannelType::N) | (GateClass::PDepleting, ChannelType::P)
    );
    Ok(GateClassification { class, warning })
}

const METALS: &[(&str, f64)] = &[
    ("Aluminum", 4.28),
    ("Titanium", 4.33),
    ("Tantalum", 4.25),
    ("Molybdenum", 4.6),
    ("Tungsten", 4.63),
    ("Copper", 4.65),
    ("Silver", 4.26),
    ("Cobalt", 5.0),
    ("Gold", 5.1),
    ("Palladium", 5.12),
    ("Nickel", 5.22),
    ("Iridium", 5.27),
    ("Platinum", 5.65),
];

/// Clean-surface metal workfunctions (eV).
pub fn builtin_metal_table() -> &'static [(&'static str, f64)] {
    METALS
}

pub fn metal_workfunction(name: &str) -> Option<f64> {
    METALS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, phi)| phi)
}
