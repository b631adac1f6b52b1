//! Run configuration and file output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::{default_paper_device, DeviceSpec};
use crate::error::{Error, Result};
use crate::extraction::{BiasProtocol, DeviceMetrics, IvCurve, IvPoint, LinearFit, SweepKind};
use crate::mesh::{Resolution, StructuredMesh};
use crate::solver::{FieldSolution, SolverSettings};
use crate::sweep::{fit_linear_trend, MetricField, ParamPath, SweepAxis, SweepPlan, SweepResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_fields: bool,
    #[serde(default)]
    pub emit_plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
    pub device: DeviceSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub protocol: BiasProtocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    pub fn paper_preset() -> Self {
        Self {
            output_dir: default_output_dir(),
            emit_fields: false,
            emit_plots: false,
            resolution: None,
            device: default_paper_device(),
            solver: SolverSettings::default(),
            protocol: BiasProtocol::default(),
            sweep: Some(SweepConfig {
                axes: vec![SweepAxis {
                    param: ParamPath::GateWorkfunction,
                    values: paper_workfunctions(8),
                }],
                parallelism: 1,
            }),
        }
    }

    /// Parse TOML text; `path` is only used in error messages.
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            Error::Config {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.device.validate().map_err(Error::InvalidSpec)?;
        cfg.solver.check()?;
        cfg.protocol.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("serializing config: {e}")))
    }

    pub fn sweep_plan(&self, resolution: Resolution) -> Result<SweepPlan> {
        let sc = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("config has no [sweep] section".into()))?;
        Ok(SweepPlan {
            base_spec: self.device.clone(),
            axes: sc.axes.clone(),
            protocol: self.protocol,
            resolution,
            parallelism: sc.parallelism,
            settings: self.solver,
        })
    }
}

/// `count` evenly spaced metal workfunctions from tungsten to nickel.
pub fn paper_workfunctions(count: usize) -> Vec<f64> {
    let (a, b) = (4.63, 5.22);
    if count < 2 {
        return vec![a];
    }
    (0..count)
        .map(|k| {
            let v = a + (b - a) * k as f64 / (count - 1) as f64;
            (v * 1e6).round() / 1e6
        })
        .collect()
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn create(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `{:e}` prints the shortest representation that round-trips.
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_iv_csv(curve: &IvCurve, path: &Path) -> Result<()> {
    let mut s = String::from("sweep_V,I_d_A,converged\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", fmt(p.v), fmt(p.i_d), p.converged);
    }
    write_text(path, &s)
}

pub fn read_iv_csv(path: &Path) -> Result<Vec<IvPoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |n: usize| Error::InvalidInput(format!("{}: malformed line {n}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some("sweep_V,I_d_A,converged") {
        return Err(bad(1));
    }
    lines
        .enumerate()
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(bad(k + 2));
            }
            Ok(IvPoint {
                v: f[0].parse().map_err(|_| bad(k + 2))?,
                i_d: f[1].parse().map_err(|_| bad(k + 2))?,
                converged: f[2].parse().map_err(|_| bad(k + 2))?,
            })
        })
        .collect()
}

pub fn write_metrics_json(metrics: &DeviceMetrics, path: &Path) -> Result<()> {
    write_json(metrics, path)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serializing {}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

pub fn export_field_grid(
    solution: &FieldSolution,
    mesh: &StructuredMesh,
    path: &Path,
) -> Result<()> {
    if solution.psi.len() != mesh.node_count() {
        return Err(Error::InvalidInput(
            "solution does not belong to this mesh".into(),
        ));
    }
    let mut s = String::from("x_nm,y_nm,psi_V,n_cm3,region\n");
    for k in 0..mesh.node_count() {
        let (i, j) = mesh.node_ij(k);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt(mesh.x_nodes[i]),
            fmt(mesh.y_nodes[j]),
            fmt(solution.psi[k]),
            fmt(solution.n[k]),
            mesh.node_region(k).tag()
        );
    }
    write_text(path, &s)
}

pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    write_text(&dir.join("sweep.csv"), &result.to_csv())?;
    write_text(&dir.join("sweep.json"), &(result.to_json()? + "\n"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers only, no connecting line.
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub fit: Option<LinearFit>,
}

impl Plot {
    pub fn from_curve(curve: &IvCurve, log_y: bool) -> Self {
        let points = curve
            .points
            .iter()
            .filter(|p| p.converged && p.i_d.is_finite())
            .map(|p| (p.v, p.i_d))
            .collect();
        let (title, x_label, fixed) = match curve.kind {
            SweepKind::Transfer => (
                "Transfer",
                "V_g (V)",
                format!("V_d = {} V", curve.fixed_bias.v_d),
            ),
            SweepKind::Output => (
                "Output",
                "V_d (V)",
                format!("V_g = {} V", curve.fixed_bias.v_g),
            ),
        };
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: "I_d (A)".into(),
            log_y,
            series: vec![Series {
                label: fixed,
                points,
                markers: false,
            }],
            fit: None,
        }
    }

    /// Metric against a sweep axis, with the least-squares line.
    pub fn trend(result: &SweepResult, x: ParamPath, y: MetricField) -> Result<Self> {
        let fit = fit_linear_trend(result, x, y)?;
        let k = result
            .axes
            .iter()
            .position(|&a| a == x)
            .expect("fit checked the axis");
        let points = result
            .rows
            .iter()
            .map(|r| (r.params[k], y.of(&r.metrics)))
            .collect();
        Ok(Self {
            title: format!("{} vs {}", y.label(), x.column()),
            x_label: x.column().into(),
            y_label: y.label().into(),
            log_y: false,
            series: vec![Series {
                label: "simulated".into(),
                points,
                markers: true,
            }],
            fit: Some(fit),
        })
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Write a static SVG chart.
pub fn render_plot(plot: &Plot, path: &Path) -> Result<()> {
    let tr = |v: f64| if plot.log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!plot.log_y || y > 0.0))
        .collect();
    if pts.is_empty() {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (80.0, 20.0, 40.0, 50.0);
    let mut x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut y0 = pts.iter().map(|p| tr(p.1)).fold(f64::INFINITY, f64::min);
    let mut y1 = pts
        .iter()
        .map(|p| tr(p.1))
        .fold(f64::NEG_INFINITY, f64::max);
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        let pad = if y0 == 0.0 { 1.0 } else { 0.1 * y0.abs() };
        y0 -= pad;
        y1 += pad;
    }
    if plot.log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (tr(y) - y0) / (y1 - y0) * (h - mt - mb);
    let sy_raw = |t: f64| h - mb - (t - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            h - mb,
            h - mb + 5.0,
            h - mb + 18.0,
            format_tick(t)
        );
    }
    let yt: Vec<f64> = if plot.log_y {
        let (a, b) = (y0 as i64, y1 as i64);
        let stride = ((b - a) / 8).max(1);
        (a..=b).step_by(stride as usize).map(|d| d as f64).collect()
    } else {
        ticks(y0, y1)
    };
    for t in yt {
        let y = sy_raw(t);
        let label = if plot.log_y {
            format!("1e{}", t as i64)
        } else {
            format_tick(t)
        };
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            ml - 5.0,
            ml - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (ml + w - mr) / 2.0,
        h - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}{2}</text>"#,
        (mt + h - mb) / 2.0,
        escape(&plot.y_label),
        if plot.log_y { " [log]" } else { "" }
    );
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (k, series) in plot.series.iter().enumerate() {
        let c = colours[k % colours.len()];
        let visible: Vec<(f64, f64)> = series
            .points
            .iter()
            .copied()
            .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!plot.log_y || y > 0.0))
            .collect();
        if series.markers {
            for (x, y) in &visible {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                    sx(*x),
                    sy(*y)
                );
            }
        } else {
            let path: Vec<String> = visible
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
            ml + 10.0,
            mt + 16.0 + 14.0 * k as f64,
            escape(&series.label)
        );
    }
    if let Some(f) = plot.fit {
        if !plot.log_y {
            let (ya, yb) = (f.intercept + f.slope * x0, f.intercept + f.slope * x1);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
                sx(x0),
                sy(ya),
                sx(x1),
                sy(yb)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">fit: slope = {:.4e}, R² = {:.4}</text>"#,
            w - mr - 10.0,
            mt + 16.0,
            f.slope,
            f.r_squared
        );
    }
    s.push_str("</svg>\n");
    write_text(path, &s)
}

fn format_tick(t: f64) -> String {
    let a = t.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::BiasPoint;

    fn curve(n: usize) -> IvCurve {
        IvCurve {
            kind: SweepKind::Transfer,
            fixed_bias: BiasPoint::new(0.0, 0.05),
            points: (0..n)
                .map(|k| IvPoint {
                    v: -0.4 + 0.05 * k as f64,
                    i_d: 1e-12 * 10f64.powf(k as f64 / 3.0) / 7.0,
                    converged: k != 3,
                })
                .collect(),
            spec_fingerprint: "x".into(),
        }
    }

    #[test]
    fn iv_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/iv.csv");
        let c = curve(30);
        write_iv_csv(&c, &p).unwrap();
        let back = read_iv_csv(&p).unwrap();
        assert_eq!(back.len(), 30);
        for (a, b) in c.points.iter().zip(&back) {
            assert_eq!(a.converged, b.converged);
            assert!(((a.v - b.v) / a.v.abs().max(1e-300)).abs() < 1e-12 || a.v == b.v);
            assert!(((a.i_d - b.i_d) / a.i_d).abs() < 1e-12);
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig::paper_preset();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text, Path::new("p.toml")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn unknown_key_reports_location() {
        let mut text = RunConfig::paper_preset().to_toml().unwrap();
        text = text.replacen("[device]\n", "[device]\nbogus_key = 3\n", 1);
        let line = text
            .lines()
            .position(|l| l.starts_with("bogus_key"))
            .unwrap()
            + 1;
        match RunConfig::from_toml(&text, Path::new("c.toml")) {
            Err(Error::Config {
                line: l,
                column,
                message,
                ..
            }) => {
                assert_eq!(l, line);
                assert_eq!(column, 1);
                assert!(message.contains("bogus_key"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_device_in_config_rejected() {
        let text = RunConfig::paper_preset().to_toml().unwrap().replace(
            "sd_doping_cm3 = 20000000000000000000.0",
            "sd_doping_cm3 = -2e19",
        );
        assert!(matches!(
            RunConfig::from_toml(&text, Path::new("c.toml")),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn paper_grid() {
        let v = paper_workfunctions(8);
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], 4.63);
        assert_eq!(v[7], 5.22);
    }

    #[test]
    fn empty_plot_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let plot = Plot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: false,
            series: vec![],
            fit: None,
        };
        assert!(render_plot(&plot, &dir.path().join("a.svg")).is_err());
    }

    #[test]
    fn tick_labels() {
        assert_eq!(format_tick(0.5), "0.5");
        assert_eq!(format_tick(0.0), "0");
        assert_eq!(format_tick(2e-5), "2.0e-5");
        let t = ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    }
}
