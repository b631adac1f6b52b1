//! Parameter sweeps over device specs and linear trend fits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::extraction::{characterize, least_squares, BiasProtocol, DeviceMetrics, LinearFit};
use crate::materials::GateMaterial;
use crate::mesh::{build_mesh, Resolution};
use crate::solver::SolverSettings;

/// Largest cartesian product a plan may expand to.
pub const MAX_SWEEP_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamPath {
    /// Metal gate workfunction (eV).
    GateWorkfunction,
    /// Channel and source/drain doping together (cm^-3, signed).
    ChannelDoping,
    /// Dielectric thickness (nm).
    Tox,
    Length,
    Width,
    Height,
    SdExtension,
}

impl ParamPath {
    pub fn column(self) -> &'static str {
        match self {
            ParamPath::GateWorkfunction => "gate_workfunction_eV",
            ParamPath::ChannelDoping => "channel_doping_cm3",
            ParamPath::Tox => "tox_nm",
            ParamPath::Length => "length_nm",
            ParamPath::Width => "width_nm",
            ParamPath::Height => "height_nm",
            ParamPath::SdExtension => "sd_extension_nm",
        }
    }

    /// Copy of `spec` with this parameter set to `value`. A tri-gate width
    /// factor derived from W and H follows geometry changes.
    pub fn apply(self, spec: &DeviceSpec, value: f64) -> Result<DeviceSpec> {
        let mut s = spec.clone();
        let derived = |s: &DeviceSpec| {
            (s.channel_width_nm + 2.0 * s.channel_height_nm) / (2.0 * s.channel_height_nm)
        };
        let was_derived = (spec.effective_width_factor - derived(spec)).abs() < 1e-12;
        match self {
            ParamPath::GateWorkfunction => match &mut s.gate {
                GateMaterial::Metal { workfunction_ev } => *workfunction_ev = value,
                GateMaterial::DopedPoly { .. } => {
                    return Err(Error::InvalidInput(
                        "workfunction axis requires a metal gate".into(),
                    ))
                }
            },
            ParamPath::ChannelDoping => {
                s.channel_doping_cm3 = value;
                s.sd_doping_cm3 = value;
            }
            ParamPath::Tox => s.dielectric_thickness_nm = value,
            ParamPath::Length => s.channel_length_nm = value,
            ParamPath::Width => s.channel_width_nm = value,
            ParamPath::Height => s.channel_height_nm = value,
            ParamPath::SdExtension => s.sd_extension_nm = value,
        }
        if was_derived && matches!(self, ParamPath::Width | ParamPath::Height) {
            s.effective_width_factor = derived(&s);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: ParamPath,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub base_spec: DeviceSpec,
    pub axes: Vec<SweepAxis>,
    pub protocol: BiasProtocol,
    pub resolution: Resolution,
    /// Maximum number of concurrent device solves.
    pub parallelism: usize,
    pub settings: SolverSettings,
}

impl SweepPlan {
    pub fn new(base_spec: DeviceSpec, axes: Vec<SweepAxis>) -> Self {
        Self {
            base_spec,
            axes,
            protocol: BiasProtocol::default(),
            resolution: Resolution::Default,
            parallelism: 1,
            settings: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.axes.is_empty() {
            problems.push("sweep needs at least one axis".to_string());
        }
        let mut size = 1usize;
        for a in &self.axes {
            if a.values.is_empty() {
                problems.push(format!("axis {} has no values", a.param.column()));
            }
            if a.values.iter().any(|v| !v.is_finite()) {
                problems.push(format!("axis {} has non-finite values", a.param.column()));
            }
            size = size.saturating_mul(a.values.len());
        }
        for (k, a) in self.axes.iter().enumerate() {
            if self.axes[..k].iter().any(|b| b.param == a.param) {
                problems.push(format!("axis {} repeated", a.param.column()));
            }
        }
        if size > MAX_SWEEP_POINTS {
            problems.push(format!(
                "sweep expands to {size} points, limit is {MAX_SWEEP_POINTS}"
            ));
        }
        if self.parallelism == 0 {
            problems.push("parallelism must be at least 1".into());
        }
        problems.extend(self.base_spec.violations());
        if let Err(e) = self.protocol.check() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.settings.check() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems))
        }
    }

    /// Parameter tuples in lexicographic axis order (first axis slowest).
    pub fn tuples(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for a in &self.axes {
            out = out
                .into_iter()
                .flat_map(|t| {
                    a.values.iter().map(move |&v| {
                        let mut t = t.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        out
    }

    fn spec_for(&self, tuple: &[f64]) -> Result<DeviceSpec> {
        let mut spec = self.base_spec.clone();
        for (a, &v) in self.axes.iter().zip(tuple) {
            spec = a.param.apply(&spec, v)?;
        }
        spec.ensure_valid()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub mesh_nodes: usize,
    /// Bias points that did not converge in the two transfer curves.
    pub failed_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Position in the cartesian product.
    pub index: usize,
    pub params: Vec<f64>,
    pub metrics: DeviceMetrics,
    pub diagnostics: SweepDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub params: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<ParamPath>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

type Outcome = std::result::Result<SweepRow, SweepFailure>;

fn evaluate(plan: &SweepPlan, index: usize, params: Vec<f64>) -> Outcome {
    let run = || -> Result<SweepRow> {
        let spec = plan.spec_for(&params)?;
        let mesh = build_mesh(&spec, plan.resolution)?;
        let ch = characterize(&spec, &mesh, &plan.settings, &plan.protocol)?;
        Ok(SweepRow {
            index,
            params: params.clone(),
            metrics: ch.metrics,
            diagnostics: SweepDiagnostics {
                mesh_nodes: mesh.node_count(),
                failed_points: ch.failed_points,
            },
        })
    };
    run().map_err(|e| SweepFailure {
        index,
        params: params.clone(),
        error: e.to_string(),
    })
}

fn collect(plan: &SweepPlan, outcomes: Vec<Outcome>) -> SweepResult {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(f) => failures.push(f),
        }
    }
    SweepResult {
        axes: plan.axes.iter().map(|a| a.param).collect(),
        rows,
        failures,
    }
}

/// Evaluate every tuple of the plan one after another.
pub fn run_sweep_sequential(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let outcomes = plan
        .tuples()
        .into_iter()
        .enumerate()
        .map(|(i, t)| evaluate(plan, i, t))
        .collect();
    Ok(collect(plan, outcomes))
}

/// Evaluate the plan on a pool of `plan.parallelism` workers. Output order
/// does not depend on the pool size.
#[cfg(feature = "parallel")]
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    use rayon::prelude::*;
    plan.validate()?;
    if plan.parallelism == 1 {
        return run_sweep_sequential(plan);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let tuples = plan.tuples();
    let outcomes = pool.install(|| {
        tuples
            .into_par_iter()
            .enumerate()
            .map(|(i, t)| evaluate(plan, i, t))
            .collect()
    });
    Ok(collect(plan, outcomes))
}

#[cfg(not(feature = "parallel"))]
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    run_sweep_sequential(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricField {
    VTh,
    Ss,
    IOn,
    IOff,
    OnOffRatio,
    GmMax,
}

impl MetricField {
    pub fn of(self, m: &DeviceMetrics) -> f64 {
        match self {
            MetricField::VTh => m.v_th,
            MetricField::Ss => m.ss,
            MetricField::IOn => m.i_on,
            MetricField::IOff => m.i_off,
            MetricField::OnOffRatio => m.on_off_ratio,
            MetricField::GmMax => m.gm_max,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricField::VTh => "V_th (V)",
            MetricField::Ss => "SS (mV/dec)",
            MetricField::IOn => "I_on (A)",
            MetricField::IOff => "I_off (A)",
            MetricField::OnOffRatio => "I_on/I_off",
            MetricField::GmMax => "g_m,max (S)",
        }
    }
}

/// Least-squares line of metric `y` against axis `x` over the successful rows.
pub fn fit_linear_trend(result: &SweepResult, x: ParamPath, y: MetricField) -> Result<LinearFit> {
    let k = result
        .axes
        .iter()
        .position(|&a| a == x)
        .ok_or_else(|| Error::InvalidInput(format!("sweep has no {} axis", x.column())))?;
    let rows = &result.rows;
    if rows.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{} successful rows, at least 3 required",
            rows.len()
        )));
    }
    let others = |r: &SweepRow| {
        r.params
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, v)| v.to_bits())
            .collect::<Vec<_>>()
    };
    if rows.iter().any(|r| others(r) != others(&rows[0])) {
        return Err(Error::InvalidInput(
            "rows vary along more than the fitted axis".into(),
        ));
    }
    let xy: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.params[k], y.of(&r.metrics)))
        .collect();
    least_squares(&xy).ok_or_else(|| Error::InvalidInput("degenerate x values".into()))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "nan".into()
    }
}

impl SweepResult {
    /// One line per tuple in cartesian order; failed tuples carry the error.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for a in &self.axes {
            out.push_str(a.column());
            out.push(',');
        }
        out.push_str("V_th_V,SS_mV_per_dec,I_on_A,I_off_A,on_off_ratio,gm_max_S,failed_points,status,error\n");
        let mut entries: Vec<(usize, String)> = Vec::new();
        for r in &self.rows {
            let m = &r.metrics;
            let mut line: Vec<String> = r.params.iter().map(|&v| num(v)).collect();
            line.extend([m.v_th, m.ss, m.i_on, m.i_off, m.on_off_ratio, m.gm_max].map(num));
            line.push(r.diagnostics.failed_points.to_string());
            line.push("ok".into());
            line.push(String::new());
            entries.push((r.index, line.join(",")));
        }
        for f in &self.failures {
            let mut line: Vec<String> = f.params.iter().map(|&v| num(v)).collect();
            line.extend(std::iter::repeat_n(String::new(), 7));
            line.push("failed".into());
            line.push(format!("\"{}\"", f.error.replace('"', "'")));
            entries.push((f.index, line.join(",")));
        }
        entries.sort_by_key(|e| e.0);
        for (_, l) in entries {
            let _ = writeln!(out, "{l}");
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("serializing sweep result: {e}")))
    }
}
