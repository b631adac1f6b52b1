//! Figures of merit from I-V curves and field solutions.

use serde::{Deserialize, Serialize};

use crate::device::{BiasPoint, DeviceSpec};
use crate::error::{Error, Result};
use crate::materials::GateMaterial;
use crate::mesh::{build_mesh, Resolution, StructuredMesh};
use crate::solver::{self, BiasSweep, SolverSettings, SweepVar};

/// Currents below this are treated as numerical zero in on/off ratios (A).
pub const CURRENT_FLOOR: f64 = 1e-18;
/// Constant-current criterion per unit W_eff/L (A).
pub const CRITERION_CURRENT: f64 = 100e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Transfer,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    /// Swept terminal voltage (V).
    pub v: f64,
    /// Drain current (A); NaN when the point failed.
    pub i_d: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvCurve {
    pub kind: SweepKind,
    pub fixed_bias: BiasPoint,
    pub points: Vec<IvPoint>,
    pub spec_fingerprint: String,
}

impl IvCurve {
    /// Converged (v, i) pairs in ascending v.
    fn usable(&self) -> Result<Vec<(f64, f64)>> {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.converged && p.i_d.is_finite())
            .map(|p| (p.v, p.i_d))
            .collect();
        if pts.len() < 5 {
            return Err(Error::Extraction(format!(
                "{} converged points, at least 5 required",
                pts.len()
            )));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Extraction(
                "swept values not strictly monotone".into(),
            ));
        }
        Ok(pts)
    }

    fn drain_bias(&self) -> f64 {
        self.fixed_bias.v_d - self.fixed_bias.v_s
    }
}

pub fn criterion_current(spec: &DeviceSpec) -> f64 {
    CRITERION_CURRENT * spec.effective_width_nm() / spec.channel_length_nm
}

/// Gate voltage where the drain current first crosses the criterion current,
/// interpolated linearly in log(I).
pub fn extract_vth_constant_current(curve: &IvCurve, spec: &DeviceSpec) -> Result<f64> {
    let pts = curve.usable()?;
    let target = criterion_current(spec);
    let log = |i: f64| i.max(1e-300).log10();
    for w in pts.windows(2) {
        let ((v0, i0), (v1, i1)) = (w[0], w[1]);
        if i0 < target && i1 >= target {
            let t = (log(target) - log(i0)) / (log(i1) - log(i0));
            return Ok(v0 + t * (v1 - v0));
        }
    }
    Err(Error::Extraction("curve does not bracket threshold".into()))
}

fn transconductance(pts: &[(f64, f64)]) -> Vec<f64> {
    let n = pts.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (pts[b].1 - pts[a].1) / (pts[b].0 - pts[a].0)
        })
        .collect()
}

/// Linear extrapolation from the maximum-transconductance point, minus V_d/2.
pub fn extract_vth_max_gm(curve: &IvCurve, _spec: &DeviceSpec) -> Result<f64> {
    let pts = curve.usable()?;
    if pts.len() < 7 {
        return Err(Error::Extraction(
            "max-gm extraction needs at least 7 converged points".into(),
        ));
    }
    let gm = transconductance(&pts);
    let gm_max = gm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = gm
        .iter()
        .position(|&g| g >= gm_max - 1e-9 * gm_max.abs())
        .expect("maximum exists");
    if k == 0 || k == pts.len() - 1 || gm_max <= 0.0 {
        return Err(Error::Extraction(
            "transconductance peak not resolved inside the curve".into(),
        ));
    }
    let (v, i) = pts[k];
    Ok(v - i / gm_max - 0.5 * curve.drain_bias())
}

pub fn max_transconductance(curve: &IvCurve) -> Result<f64> {
    let pts = curve.usable()?;
    Ok(transconductance(&pts)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Least-squares dV_g / dlog10(I_d) over [I_crit/1000, I_crit/10], in mV/dec.
pub fn subthreshold_swing(curve: &IvCurve, spec: &DeviceSpec) -> Result<f64> {
    let pts = curve.usable()?;
    let crit = criterion_current(spec);
    let (lo, hi) = (crit / 1000.0, crit / 10.0);
    let min_i = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if min_i > lo {
        return Err(Error::Extraction(
            "fewer than 3 decades of subthreshold current".into(),
        ));
    }
    let window: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.1 >= lo && p.1 <= hi)
        .map(|&(v, i)| (i.log10(), v))
        .collect();
    if window.len() < 3 {
        return Err(Error::Extraction(format!(
            "{} points in the subthreshold window, at least 3 required",
            window.len()
        )));
    }
    let fit = least_squares(&window)
        .ok_or_else(|| Error::Extraction("degenerate subthreshold window".into()))?;
    Ok(fit.slope * 1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares; `None` when all x are equal or fewer than 2 points.
pub fn least_squares(xy: &[(f64, f64)]) -> Option<LinearFit> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnOff {
    pub i_on: f64,
    pub i_off: f64,
    pub ratio: f64,
    /// I_off was below `CURRENT_FLOOR`; the ratio uses the floor instead.
    pub floored: bool,
}

fn interpolate(pts: &[(f64, f64)], v: f64) -> Option<f64> {
    pts.windows(2).find_map(|w| {
        let ((v0, i0), (v1, i1)) = (w[0], w[1]);
        (v >= v0 && v <= v1).then(|| i0 + (v - v0) / (v1 - v0) * (i1 - i0))
    })
}

/// I_on at V_g = V_dd and I_off at V_g = 0 from a transfer curve taken at V_d = V_dd.
pub fn on_off_metrics(curve: &IvCurve, v_dd: f64) -> Result<OnOff> {
    let pts = curve.usable()?;
    let at = |v: f64| {
        interpolate(&pts, v)
            .ok_or_else(|| Error::Extraction(format!("curve does not cover V_g = {v} V")))
    };
    let i_on = at(v_dd)?.max(0.0);
    let i_off = at(0.0)?.max(0.0);
    let floored = i_off < CURRENT_FLOOR;
    let ratio = if i_on == i_off {
        1.0
    } else {
        i_on.max(CURRENT_FLOOR) / i_off.max(CURRENT_FLOOR)
    };
    Ok(OnOff {
        i_on,
        i_off,
        ratio,
        floored,
    })
}

/// Quasi-static gate capacitance from a symmetric charge difference (F).
pub fn gate_capacitance(
    spec: &DeviceSpec,
    mesh: &StructuredMesh,
    settings: &SolverSettings,
    v_g: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(
            "capacitance step must be positive".into(),
        ));
    }
    let solve = |vg: f64| solver::solve_bias(mesh, spec, BiasPoint::new(vg, 0.0), settings, None);
    let (up, down) = join(|| solve(v_g + delta), || solve(v_g - delta));
    let (up, down) = (up?, down?);
    let qu = solver::electron_charge(&up, mesh, spec);
    let qd = solver::electron_charge(&down, mesh, spec);
    let dq: f64 = qu.iter().zip(&qd).map(|(a, b)| a - b).sum();
    Ok(dq / (2.0 * delta))
}

#[cfg(feature = "parallel")]
fn join<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

/// Bias grids used to characterize one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasProtocol {
    /// Supply voltage defining I_on and I_off (V).
    pub v_dd: f64,
    /// Drain bias of the linear-region transfer curve (V).
    pub v_d_linear: f64,
    pub vg_start: f64,
    pub vg_stop: f64,
    pub vg_step: f64,
    /// Gate step of the V_d = V_dd transfer curve.
    pub vg_step_supply: f64,
    /// Drain step of the output curve at V_g = V_dd.
    pub vd_step: f64,
}

impl Default for BiasProtocol {
    fn default() -> Self {
        Self {
            v_dd: 1.0,
            v_d_linear: 0.05,
            vg_start: -0.4,
            vg_stop: 1.2,
            vg_step: 0.025,
            vg_step_supply: 0.1,
            vd_step: 0.05,
        }
    }
}

pub(crate) fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl BiasProtocol {
    pub fn check(&self) -> Result<()> {
        let ok = self.v_dd > 0.0
            && self.v_d_linear > 0.0
            && self.vg_stop > self.vg_start
            && self.vg_step > 0.0
            && self.vg_step_supply > 0.0
            && self.vd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "bias protocol steps and ranges must be positive".into(),
            ))
        }
    }

    pub fn linear_transfer(&self) -> BiasSweep {
        BiasSweep {
            vary: SweepVar::Vg,
            fixed: BiasPoint::new(0.0, self.v_d_linear),
            points: grid(self.vg_start, self.vg_stop, self.vg_step),
        }
    }

    pub fn supply_transfer(&self) -> BiasSweep {
        let mut points = grid(0.0, self.v_dd, self.vg_step_supply);
        if (points.last().copied().unwrap_or(0.0) - self.v_dd).abs() > 1e-9 {
            points.push(self.v_dd);
        }
        BiasSweep {
            vary: SweepVar::Vg,
            fixed: BiasPoint::new(0.0, self.v_dd),
            points,
        }
    }

    pub fn output(&self) -> BiasSweep {
        let mut points = grid(0.0, self.v_dd, self.vd_step);
        if (points.last().copied().unwrap_or(0.0) - self.v_dd).abs() > 1e-9 {
            points.push(self.v_dd);
        }
        BiasSweep {
            vary: SweepVar::Vd,
            fixed: BiasPoint::new(self.v_dd, 0.0),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    #[serde(rename = "V_th")]
    pub v_th: f64,
    #[serde(rename = "V_th_method")]
    pub v_th_method: String,
    #[serde(rename = "SS")]
    pub ss: f64,
    #[serde(rename = "I_on")]
    pub i_on: f64,
    #[serde(rename = "I_off")]
    pub i_off: f64,
    pub on_off_ratio: f64,
    pub on_off_floored: bool,
    pub gm_max: f64,
    #[serde(rename = "C_gg_samples")]
    pub c_gg_samples: Vec<(f64, f64)>,
}

/// Curves and metrics of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub metrics: DeviceMetrics,
    pub linear: IvCurve,
    pub supply: IvCurve,
    /// Number of bias points that failed to converge across both curves.
    pub failed_points: usize,
}

pub fn metrics_from_curves(
    spec: &DeviceSpec,
    linear: &IvCurve,
    supply: &IvCurve,
    v_dd: f64,
) -> Result<DeviceMetrics> {
    let v_th = extract_vth_constant_current(linear, spec)?;
    let ss = subthreshold_swing(linear, spec)?;
    let gm_max = max_transconductance(linear)?;
    let oo = on_off_metrics(supply, v_dd)?;
    Ok(DeviceMetrics {
        v_th,
        v_th_method: "constant_current".into(),
        ss,
        i_on: oo.i_on,
        i_off: oo.i_off,
        on_off_ratio: oo.ratio,
        on_off_floored: oo.floored,
        gm_max,
        c_gg_samples: Vec::new(),
    })
}

/// Linear and supply transfer curves plus metrics for one device.
pub fn characterize(
    spec: &DeviceSpec,
    mesh: &StructuredMesh,
    settings: &SolverSettings,
    protocol: &BiasProtocol,
) -> Result<Characterization> {
    protocol.check()?;
    let linear = solver::iv_sweep(mesh, spec, settings, &protocol.linear_transfer())?;
    let supply = solver::iv_sweep(mesh, spec, settings, &protocol.supply_transfer())?;
    let metrics = metrics_from_curves(spec, &linear, &supply, protocol.v_dd)?;
    let failed_points = linear
        .points
        .iter()
        .chain(&supply.points)
        .filter(|p| !p.converged)
        .count();
    Ok(Characterization {
        metrics,
        linear,
        supply,
        failed_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSummary {
    pub gate: GateMaterial,
    pub v_th: f64,
    pub ss_mv_per_dec: f64,
    pub i_on: f64,
    pub i_off: f64,
    pub on_off_ratio: f64,
}

impl StackSummary {
    fn of(spec: &DeviceSpec, m: &DeviceMetrics) -> Self {
        Self {
            gate: spec.gate,
            v_th: m.v_th,
            ss_mv_per_dec: m.ss,
            i_on: m.i_on,
            i_off: m.i_off,
            on_off_ratio: m.on_off_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStackComparison {
    pub metal: StackSummary,
    pub other: StackSummary,
    /// Metal workfunction after threshold matching (eV).
    pub matched_workfunction: f64,
    pub v_th_mismatch: f64,
    /// Metal on/off ratio divided by the other stack's.
    pub ratio_quotient: f64,
    pub bisection_steps: usize,
}

/// Workfunction window searched when matching thresholds (eV).
pub const MATCH_WINDOW: (f64, f64) = (4.2, 5.6);
const MATCH_TOLERANCE: f64 = 0.02;

/// Sign of V_th(phi) - target from a transfer curve over a window around the
/// target; `Ok(value)` when the threshold falls inside the window.
fn threshold_offset(
    spec: &DeviceSpec,
    mesh: &StructuredMesh,
    settings: &SolverSettings,
    protocol: &BiasProtocol,
    target: f64,
) -> Result<f64> {
    let half = 0.3;
    let sweep = BiasSweep {
        vary: SweepVar::Vg,
        fixed: BiasPoint::new(0.0, protocol.v_d_linear),
        points: grid(target - half, target + half, protocol.vg_step),
    };
    let curve = solver::iv_sweep(mesh, spec, settings, &sweep)?;
    match extract_vth_constant_current(&curve, spec) {
        Ok(v) => Ok(v - target),
        Err(_) => {
            let crit = criterion_current(spec);
            let above = curve
                .points
                .iter()
                .filter(|p| p.converged)
                .all(|p| p.i_d >= crit);
            // whole window conducting => threshold below the window
            Ok(if above { -half } else { half })
        }
    }
}

/// Compare a metal-gated device with another gate stack at matched threshold.
pub fn compare_gate_stacks(
    metal_spec: &DeviceSpec,
    other_spec: &DeviceSpec,
    resolution: Resolution,
    settings: &SolverSettings,
    protocol: &BiasProtocol,
) -> Result<GateStackComparison> {
    let phi0 = match metal_spec.gate {
        GateMaterial::Metal { workfunction_ev } => workfunction_ev,
        _ => {
            return Err(Error::InvalidInput(
                "first stack of a comparison must be metal-gated".into(),
            ))
        }
    };
    let other_mesh = build_mesh(other_spec, resolution)?;
    let other = characterize(other_spec, &other_mesh, settings, protocol)?;
    let target = other.metrics.v_th;

    let metal_mesh = build_mesh(metal_spec, resolution)?;
    let offset = |phi: f64| {
        threshold_offset(
            &metal_spec.with_workfunction(phi),
            &metal_mesh,
            settings,
            protocol,
            target,
        )
    };
    let mut steps = 0;
    let mut phi = phi0;
    let mut off = offset(phi0)?;
    if off.abs() >= MATCH_TOLERANCE {
        let (mut lo, mut hi) = MATCH_WINDOW;
        let (mut f_lo, f_hi) = (offset(lo)?, offset(hi)?);
        if f_lo.signum() == f_hi.signum() {
            return Err(Error::Extraction(format!(
                "threshold {target:.3} V not reachable with workfunctions in [{lo}, {hi}] eV"
            )));
        }
        loop {
            steps += 1;
            phi = 0.5 * (lo + hi);
            off = offset(phi)?;
            if off.abs() < MATCH_TOLERANCE {
                break;
            }
            if steps >= 30 {
                return Err(Error::Extraction(
                    "workfunction bisection did not converge".into(),
                ));
            }
            if off.signum() == f_lo.signum() {
                lo = phi;
                f_lo = off;
            } else {
                hi = phi;
            }
        }
    }
    let matched = metal_spec.with_workfunction(phi);
    let metal = characterize(&matched, &metal_mesh, settings, protocol)?;
    Ok(GateStackComparison {
        metal: StackSummary::of(&matched, &metal.metrics),
        other: StackSummary::of(other_spec, &other.metrics),
        matched_workfunction: phi,
        v_th_mismatch: metal.metrics.v_th - target,
        ratio_quotient: metal.metrics.on_off_ratio / other.metrics.on_off_ratio,
        bisection_steps: steps,
    })
}
