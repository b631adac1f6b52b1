//! Closed-form charge model of a symmetric double-gate junctionless channel.
//!
//! Used as a fast estimate and as an order-of-magnitude cross-check of the
//! numerical solver. Mobile charge per unit gate area (C/cm^2), as a function
//! of the local gate-to-channel voltage v:
//!
//! * below V_th: none;
//! * V_th..V_FB: neutral core growing linearly to q*N_d*t_si;
//! * above V_FB: full core plus accumulation 2*C_ox*(v - V_FB) from both gates.
//!
//! The ungated source/drain extensions enter as a series resistance.

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::materials::{GateMaterial, EPS0, Q};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactParams {
    /// F/cm^2, one gate.
    pub c_ox_per_area: f64,
    /// cm.
    pub t_si: f64,
    pub v_fb: f64,
    pub n_d: f64,
    pub mu_n: f64,
    /// Gate length, cm.
    pub l: f64,
    pub w_eff: f64,
    /// F/cm.
    pub eps_si: f64,
    /// Source plus drain extension resistance, ohm.
    pub series_resistance: f64,
}

impl CompactParams {
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self> {
        spec.ensure_valid()?;
        if spec.channel_doping_cm3 <= 0.0 {
            return Err(Error::InvalidInput(
                "compact model covers n-type channels only".into(),
            ));
        }
        let v_fb = flat_band_voltage(spec)?;
        let n_d = spec.channel_doping_cm3;
        let t_si = spec.channel_height_nm * 1e-7;
        let w_eff = spec.effective_width_nm() * 1e-7;
        let mu_n = spec.channel_material.mobility(n_d);
        let n_sd = spec.sd_doping_cm3;
        let mu_sd = spec.channel_material.mobility(n_sd);
        let series_resistance =
            2.0 * spec.sd_extension_nm * 1e-7 / (Q * mu_sd * n_sd * t_si * w_eff);
        Ok(Self {
            c_ox_per_area: spec.dielectric.relative_permittivity * EPS0
                / (spec.dielectric_thickness_nm * 1e-7),
            t_si,
            v_fb,
            n_d,
            mu_n,
            l: spec.channel_length_nm * 1e-7,
            w_eff,
            eps_si: spec.channel_material.relative_permittivity * EPS0,
            series_resistance,
        })
    }

    pub fn threshold_voltage(&self) -> f64 {
        let q_b = Q * self.n_d * self.t_si;
        self.v_fb - q_b / (2.0 * self.c_ox_per_area) - q_b * self.t_si / (8.0 * self.eps_si)
    }

    /// Mobile charge per unit gate area at local gate-channel voltage `v`.
    pub fn mobile_charge(&self, v: f64) -> f64 {
        let q_b = Q * self.n_d * self.t_si;
        let v_th = self.threshold_voltage();
        let core = q_b * ((v - v_th) / (self.v_fb - v_th)).clamp(0.0, 1.0);
        core + 2.0 * self.c_ox_per_area * (v - self.v_fb).max(0.0)
    }

    /// Antiderivative of `mobile_charge`, zero below threshold.
    fn charge_integral(&self, v: f64) -> f64 {
        let q_b = Q * self.n_d * self.t_si;
        let v_th = self.threshold_voltage();
        let span = self.v_fb - v_th;
        if v <= v_th {
            0.0
        } else if v <= self.v_fb {
            q_b * (v - v_th).powi(2) / (2.0 * span)
        } else {
            let over = v - self.v_fb;
            q_b * span / 2.0 + q_b * over + self.c_ox_per_area * over * over
        }
    }

    /// Channel current with the source at zero and no series resistance.
    pub fn intrinsic_current(&self, v_gs: f64, v_ds: f64) -> f64 {
        let v_ds = v_ds.max(0.0);
        self.w_eff / self.l
            * self.mu_n
            * (self.charge_integral(v_gs) - self.charge_integral(v_gs - v_ds))
    }

    /// Terminal current including the extension resistance.
    pub fn drain_current(&self, v_g: f64, v_d: f64) -> f64 {
        let v_d = v_d.max(0.0);
        let rs = 0.5 * self.series_resistance;
        let i0 = self.intrinsic_current(v_g, v_d);
        if rs == 0.0 || i0 == 0.0 {
            return i0;
        }
        let excess = |i: f64| i - self.intrinsic_current(v_g - i * rs, v_d - 2.0 * i * rs);
        let (mut lo, mut hi) = (0.0, i0.min(v_d / (2.0 * rs)));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// V_FB = phi_m - phi_s for a metal gate.
pub fn flat_band_voltage(spec: &DeviceSpec) -> Result<f64> {
    match spec.gate {
        GateMaterial::Metal { workfunction_ev } => {
            Ok(workfunction_ev - spec.channel_workfunction()?)
        }
        GateMaterial::DopedPoly { .. } => Err(Error::InvalidInput(
            "flat-band voltage of a poly gate depends on gate depletion; use the solver".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub v_th: f64,
    /// Set when the estimate is negative (device conducts at zero gate bias).
    pub normally_on: bool,
}

/// Full-depletion threshold of the symmetric double gate.
pub fn threshold_voltage_analytic(spec: &DeviceSpec) -> Result<ThresholdEstimate> {
    let v_th = CompactParams::from_spec(spec)?.threshold_voltage();
    Ok(ThresholdEstimate {
        v_th,
        normally_on: v_th < 0.0,
    })
}

pub fn drain_current_compact(spec: &DeviceSpec, v_g: f64, v_d: f64) -> Result<f64> {
    if v_d < 0.0 {
        return Err(Error::InvalidInput(
            "compact model requires V_d >= 0".into(),
        ));
    }
    Ok(CompactParams::from_spec(spec)?.drain_current(v_g, v_d))
}
