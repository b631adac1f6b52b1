//! Tensor-product grid over the double-gate slice.
//!
//! x runs source to drain, y runs across the stack
//! `[poly] / oxide / silicon / oxide / [poly]`. Nodes are numbered `i * ny + j`.
//! Metal gates are not meshed; their outer oxide face carries the gate contact.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::materials::{GateMaterial, EPS0};

/// Thickness of a meshed polysilicon gate electrode (nm).
pub const POLY_GATE_THICKNESS_NM: f64 = 8.0;

const GRADING_RATE: f64 = 0.25;
const MIN_DIELECTRIC_CELLS: usize = 4;
const MIN_CHANNEL_CELLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    ChannelSemiconductor,
    SdSemiconductor,
    GateDielectric,
    GateElectrode,
}

impl Region {
    pub fn tag(self) -> &'static str {
        match self {
            Region::ChannelSemiconductor => "channel",
            Region::SdSemiconductor => "sd",
            Region::GateDielectric => "dielectric",
            Region::GateElectrode => "gate",
        }
    }

    /// Carries the electron continuity equation.
    pub fn is_transport(self) -> bool {
        matches!(self, Region::ChannelSemiconductor | Region::SdSemiconductor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "tier")]
pub enum Resolution {
    Coarse,
    #[default]
    Default,
    Fine,
    /// Maximum spacings (nm); cells are graded down to `interface_nm` at
    /// material interfaces.
    Explicit {
        dielectric_nm: f64,
        silicon_nm: f64,
        interface_nm: f64,
    },
}

impl Resolution {
    fn spacings(self) -> (f64, f64, f64) {
        match self {
            Resolution::Coarse => (1.0, 2.0, 0.2),
            Resolution::Default => (0.5, 1.0, 0.1),
            Resolution::Fine => (0.25, 0.5, 0.05),
            Resolution::Explicit {
                dielectric_nm,
                silicon_nm,
                interface_nm,
            } => (dielectric_nm, silicon_nm, interface_nm),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coarse" => Some(Resolution::Coarse),
            "default" => Some(Resolution::Default),
            "fine" => Some(Resolution::Fine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContactName {
    Source,
    Drain,
    GateTop,
    GateBottom,
}

impl ContactName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(ContactName::Source),
            "drain" => Ok(ContactName::Drain),
            "gate_top" => Ok(ContactName::GateTop),
            "gate_bottom" => Ok(ContactName::GateBottom),
            other => Err(Error::InvalidInput(format!("unknown contact '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Contacts {
    pub source: Vec<usize>,
    pub drain: Vec<usize>,
    pub gate_top: Vec<usize>,
    pub gate_bottom: Vec<usize>,
}

impl Contacts {
    pub fn get(&self, name: ContactName) -> &[usize] {
        match name {
            ContactName::Source => &self.source,
            ContactName::Drain => &self.drain,
            ContactName::GateTop => &self.gate_top,
            ContactName::GateBottom => &self.gate_bottom,
        }
    }
}

/// Region boundaries of the slice (nm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub gate_x: (f64, f64),
    pub silicon_y: (f64, f64),
    /// Extent of the poly electrode bands from each outer face, zero for metal.
    pub poly_thickness: f64,
    pub extent_x: f64,
    pub extent_y: f64,
}

impl Layout {
    pub fn of(spec: &DeviceSpec) -> Self {
        let poly = match spec.gate {
            GateMaterial::DopedPoly { .. } => POLY_GATE_THICKNESS_NM,
            GateMaterial::Metal { .. } => 0.0,
        };
        let tox = spec.dielectric_thickness_nm;
        let y0 = poly + tox;
        let y1 = y0 + spec.channel_height_nm;
        let x0 = spec.sd_extension_nm;
        Layout {
            gate_x: (x0, x0 + spec.channel_length_nm),
            silicon_y: (y0, y1),
            poly_thickness: poly,
            extent_x: spec.total_length_nm(),
            extent_y: y1 + tox + poly,
        }
    }

    /// Region at a point strictly inside a cell.
    pub fn region_at(&self, x: f64, y: f64) -> Region {
        let (ys0, ys1) = self.silicon_y;
        let (xg0, xg1) = self.gate_x;
        if y > ys0 && y < ys1 {
            if x > xg0 && x < xg1 {
                Region::ChannelSemiconductor
            } else {
                Region::SdSemiconductor
            }
        } else if (y < self.poly_thickness || y > self.extent_y - self.poly_thickness)
            && x > xg0
            && x < xg1
        {
            Region::GateElectrode
        } else {
            Region::GateDielectric
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuredMesh {
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    /// Indexed `ci * (ny - 1) + cj`.
    pub cell_region: Vec<Region>,
    /// F/cm.
    pub cell_permittivity: Vec<f64>,
    /// Signed net doping, cm^-3.
    pub cell_doping: Vec<f64>,
    /// Electron mobility (cm^2/Vs), zero outside the transport regions.
    pub cell_mobility: Vec<f64>,
    pub contacts: Contacts,
    pub layout: Layout,
}

impl StructuredMesh {
    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }

    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny(), k % self.ny())
    }

    pub fn cell(&self, ci: usize, cj: usize) -> usize {
        ci * (self.ny() - 1) + cj
    }

    /// Cells touching node (i, j).
    pub fn node_cells(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (nx, ny) = (self.nx(), self.ny());
        [(-1i64, -1i64), (0, -1), (-1, 0), (0, 0)]
            .into_iter()
            .filter_map(move |(di, dj)| {
                let ci = i as i64 + di;
                let cj = j as i64 + dj;
                (ci >= 0 && cj >= 0 && (ci as usize) < nx - 1 && (cj as usize) < ny - 1)
                    .then_some((ci as usize, cj as usize))
            })
    }

    /// Tag used in dumps: the "most active" region touching the node.
    pub fn node_region(&self, k: usize) -> Region {
        let (i, j) = self.node_ij(k);
        let rank = |r: Region| match r {
            Region::ChannelSemiconductor => 3,
            Region::SdSemiconductor => 2,
            Region::GateElectrode => 1,
            Region::GateDielectric => 0,
        };
        self.node_cells(i, j)
            .map(|(ci, cj)| self.cell_region[self.cell(ci, cj)])
            .max_by_key(|&r| rank(r))
            .unwrap_or(Region::GateDielectric)
    }

    /// Region of the cell containing (x, y), or `None` outside the slice.
    pub fn region_at(&self, x: f64, y: f64) -> Option<Region> {
        let locate = |nodes: &[f64], v: f64| -> Option<usize> {
            if v < nodes[0] || v > nodes[nodes.len() - 1] {
                return None;
            }
            let k = nodes.partition_point(|&p| p <= v);
            Some(k.clamp(1, nodes.len() - 1) - 1)
        };
        let ci = locate(&self.x_nodes, x)?;
        let cj = locate(&self.y_nodes, y)?;
        Some(self.cell_region[self.cell(ci, cj)])
    }

    /// Index of the x node nearest the middle of the gate.
    pub fn mid_channel_column(&self) -> usize {
        let xm = 0.5 * (self.layout.gate_x.0 + self.layout.gate_x.1);
        nearest(&self.x_nodes, xm)
    }

    /// Writes `x_nm,y_nm,region`, one row per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "x_nm,y_nm,region").unwrap();
        for k in 0..self.node_count() {
            let (i, j) = self.node_ij(k);
            writeln!(
                out,
                "{:.6},{:.6},{}",
                self.x_nodes[i],
                self.y_nodes[j],
                self.node_region(k).tag()
            )
            .unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn nearest(nodes: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (k, &p) in nodes.iter().enumerate() {
        if (p - v).abs() < (nodes[best] - v).abs() {
            best = k;
        }
    }
    best
}

/// Nodes on [a, b] with spacing growing geometrically away from the graded
/// ends, from `h_min` up to at most `h_max`. Endpoints are exact.
pub(crate) fn graded_segment(
    a: f64,
    b: f64,
    h_min: f64,
    h_max: f64,
    grade_start: bool,
    grade_end: bool,
) -> Vec<f64> {
    let len = b - a;
    let h_min = h_min.min(h_max);
    let spacing = |s: f64| {
        let mut d = f64::INFINITY;
        if grade_start {
            d = d.min(s - a);
        }
        if grade_end {
            d = d.min(b - s);
        }
        (h_min + GRADING_RATE * d).min(h_max)
    };
    const SAMPLES: usize = 4000;
    let ds = len / SAMPLES as f64;
    let mut cumulative = Vec::with_capacity(SAMPLES + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for k in 0..SAMPLES {
        let s0 = a + k as f64 * ds;
        acc += 0.5 * ds * (1.0 / spacing(s0) + 1.0 / spacing(s0 + ds));
        cumulative.push(acc);
    }
    let cells = (acc - 1e-9).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(cells + 1);
    nodes.push(a);
    let mut seg = 0;
    for k in 1..cells {
        let target = acc * k as f64 / cells as f64;
        while cumulative[seg + 1] < target {
            seg += 1;
        }
        let t = (target - cumulative[seg]) / (cumulative[seg + 1] - cumulative[seg]);
        nodes.push(a + (seg as f64 + t) * ds);
    }
    nodes.push(b);
    nodes
}

fn uniform_segment(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            if k == n {
                b
            } else {
                a + (b - a) * k as f64 / n as f64
            }
        })
        .collect()
}

fn append(axis: &mut Vec<f64>, seg: Vec<f64>) {
    if axis.is_empty() {
        axis.extend(seg);
    } else {
        axis.extend(seg.into_iter().skip(1));
    }
}

fn count_cells(nodes: &[f64], a: f64, b: f64) -> usize {
    nodes
        .windows(2)
        .filter(|w| w[0] >= a - 1e-12 && w[1] <= b + 1e-12)
        .count()
}

pub fn build_mesh(spec: &DeviceSpec, resolution: Resolution) -> Result<StructuredMesh> {
    spec.ensure_valid()?;
    let (mut h_ox, h_si, h_if) = resolution.spacings();
    if !(h_ox > 0.0 && h_si > 0.0 && h_if > 0.0) {
        return Err(Error::Mesh("mesh spacings must be positive".into()));
    }
    let layout = Layout::of(spec);
    let tox = spec.dielectric_thickness_nm;
    if !matches!(resolution, Resolution::Explicit { .. }) {
        h_ox = h_ox.min(tox / MIN_DIELECTRIC_CELLS as f64);
    }

    let (xg0, xg1) = layout.gate_x;
    let mut x = Vec::new();
    append(&mut x, graded_segment(0.0, xg0, h_if, h_si, false, true));
    append(&mut x, graded_segment(xg0, xg1, h_if, h_si, true, true));
    append(
        &mut x,
        graded_segment(xg1, layout.extent_x, h_if, h_si, true, false),
    );

    let (ys0, ys1) = layout.silicon_y;
    let poly = layout.poly_thickness;
    let mut y = Vec::new();
    if poly > 0.0 {
        append(&mut y, graded_segment(0.0, poly, h_if, h_si, false, true));
    }
    append(&mut y, uniform_segment(poly, ys0, h_ox));
    append(&mut y, graded_segment(ys0, ys1, h_if, h_si, true, true));
    append(&mut y, uniform_segment(ys1, ys1 + tox, h_ox));
    if poly > 0.0 {
        append(
            &mut y,
            graded_segment(ys1 + tox, layout.extent_y, h_if, h_si, true, false),
        );
    }

    let ox_cells = count_cells(&y, poly, ys0).min(count_cells(&y, ys1, ys1 + tox));
    if ox_cells < MIN_DIELECTRIC_CELLS {
        return Err(Error::Mesh(format!(
            "dielectric spanned by {ox_cells} cells, at least {MIN_DIELECTRIC_CELLS} required"
        )));
    }
    let ch_x = count_cells(&x, xg0, xg1);
    let ch_y = count_cells(&y, ys0, ys1);
    if ch_x < MIN_CHANNEL_CELLS || ch_y < MIN_CHANNEL_CELLS {
        return Err(Error::Mesh(format!(
            "channel spanned by {ch_x} x {ch_y} cells, at least {MIN_CHANNEL_CELLS} each required"
        )));
    }

    let (nx, ny) = (x.len(), y.len());
    let ncell = (nx - 1) * (ny - 1);
    let mut cell_region = Vec::with_capacity(ncell);
    let mut cell_permittivity = Vec::with_capacity(ncell);
    let mut cell_doping = Vec::with_capacity(ncell);
    let mut cell_mobility = Vec::with_capacity(ncell);
    let si = &spec.channel_material;
    for ci in 0..nx - 1 {
        for cj in 0..ny - 1 {
            let xc = 0.5 * (x[ci] + x[ci + 1]);
            let yc = 0.5 * (y[cj] + y[cj + 1]);
            let region = layout.region_at(xc, yc);
            let (eps_r, doping, mu) = match region {
                Region::ChannelSemiconductor => (
                    si.relative_permittivity,
                    spec.channel_doping_cm3,
                    si.mobility(spec.channel_doping_cm3),
                ),
                Region::SdSemiconductor => (
                    si.relative_permittivity,
                    spec.sd_doping_cm3,
                    si.mobility(spec.sd_doping_cm3),
                ),
                Region::GateDielectric => (spec.dielectric.relative_permittivity, 0.0, 0.0),
                Region::GateElectrode => {
                    let n = match spec.gate {
                        GateMaterial::DopedPoly { poly_doping_cm3 } => poly_doping_cm3,
                        GateMaterial::Metal { .. } => 0.0,
                    };
                    (si.relative_permittivity, n, 0.0)
                }
            };
            cell_region.push(region);
            cell_permittivity.push(eps_r * EPS0);
            cell_doping.push(doping);
            cell_mobility.push(mu);
        }
    }

    let on = |v: f64, a: f64, b: f64| v >= a - 1e-9 && v <= b + 1e-9;
    let mut contacts = Contacts::default();
    for (j, &yj) in y.iter().enumerate() {
        if on(yj, ys0, ys1) {
            contacts.source.push(j);
            contacts.drain.push((nx - 1) * ny + j);
        }
    }
    for (i, &xi) in x.iter().enumerate() {
        if on(xi, xg0, xg1) {
            contacts.gate_top.push(i * ny);
            contacts.gate_bottom.push(i * ny + ny - 1);
        }
    }

    Ok(StructuredMesh {
        x_nodes: x,
        y_nodes: y,
        cell_region,
        cell_permittivity,
        cell_doping,
        cell_mobility,
        contacts,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_paper_device;
    use rand::{Rng, SeedableRng};

    fn widths(nodes: &[f64]) -> Vec<f64> {
        nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    #[test]
    fn paper_device_extents() {
        let m = build_mesh(&default_paper_device(), Resolution::Default).unwrap();
        assert_eq!(m.x_nodes[0], 0.0);
        assert_eq!(*m.x_nodes.last().unwrap(), 42.0);
        assert_eq!(m.y_nodes[0], 0.0);
        assert_eq!(*m.y_nodes.last().unwrap(), 14.0);
        let sx: f64 = widths(&m.x_nodes).iter().sum();
        let sy: f64 = widths(&m.y_nodes).iter().sum();
        assert!((sx - 42.0).abs() / 42.0 < 1e-9);
        assert!((sy - 14.0).abs() / 14.0 < 1e-9);
    }

    #[test]
    fn default_spacing_limits_and_grading() {
        let spec = default_paper_device();
        let m = build_mesh(&spec, Resolution::Default).unwrap();
        for w in m.x_nodes.windows(2) {
            assert!(w[1] - w[0] <= 1.0 + 1e-9);
        }
        for (k, w) in m.y_nodes.windows(2).enumerate() {
            let r = m.cell_region[m.cell(0, k)];
            let limit = if r == Region::GateDielectric {
                0.5
            } else {
                1.0
            };
            assert!(w[1] - w[0] <= limit + 1e-9, "{r:?} {}", w[1] - w[0]);
        }
        // neighbour ratio inside each graded segment
        for seg in [
            graded_segment(0.0, 10.0, 0.1, 1.0, false, true),
            graded_segment(10.0, 32.0, 0.1, 1.0, true, true),
            graded_segment(2.0, 12.0, 0.1, 1.0, true, true),
        ] {
            let w = widths(&seg);
            for p in w.windows(2) {
                let r = (p[1] / p[0]).max(p[0] / p[1]);
                assert!(r <= 1.3, "ratio {r}");
            }
        }
    }

    #[test]
    fn fine_roughly_doubles_node_counts() {
        let spec = default_paper_device();
        let d = build_mesh(&spec, Resolution::Default).unwrap();
        let f = build_mesh(&spec, Resolution::Fine).unwrap();
        let rx = (f.nx() - 1) as f64 / (d.nx() - 1) as f64;
        let ry = (f.ny() - 1) as f64 / (d.ny() - 1) as f64;
        assert!((1.6..=2.4).contains(&rx), "{rx}");
        assert!((1.6..=2.4).contains(&ry), "{ry}");
    }

    #[test]
    fn coarse_dielectric_spacing_fails_cell_floor() {
        let spec = default_paper_device();
        let r = build_mesh(
            &spec,
            Resolution::Explicit {
                dielectric_nm: 5.0,
                silicon_nm: 1.0,
                interface_nm: 0.1,
            },
        );
        assert!(matches!(r, Err(Error::Mesh(_))));
        let r = build_mesh(
            &spec,
            Resolution::Explicit {
                dielectric_nm: 0.5,
                silicon_nm: 3.0,
                interface_nm: 3.0,
            },
        );
        assert!(matches!(r, Err(Error::Mesh(_))));
        assert!(build_mesh(&spec, Resolution::Coarse).is_ok());
    }

    #[test]
    fn contacts_are_disjoint_and_nonempty() {
        for spec in [default_paper_device(), {
            let mut s = default_paper_device();
            s.gate = GateMaterial::DopedPoly {
                poly_doping_cm3: -1e20,
            };
            s
        }] {
            let m = build_mesh(&spec, Resolution::Default).unwrap();
            let c = &m.contacts;
            let sets = [&c.source, &c.drain, &c.gate_top, &c.gate_bottom];
            for s in sets {
                assert!(!s.is_empty());
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    assert!(sets[a].iter().all(|k| !sets[b].contains(k)));
                }
            }
        }
    }

    #[test]
    fn region_tags_match_point_in_box_oracle() {
        let mut poly = default_paper_device();
        poly.gate = GateMaterial::DopedPoly {
            poly_doping_cm3: -1e20,
        };
        for spec in [default_paper_device(), poly] {
            let m = build_mesh(&spec, Resolution::Default).unwrap();
            // independent oracle built from the spec fields only
            let tp = if matches!(spec.gate, GateMaterial::DopedPoly { .. }) {
                POLY_GATE_THICKNESS_NM
            } else {
                0.0
            };
            let tox = spec.dielectric_thickness_nm;
            let h = spec.channel_height_nm;
            let ext = spec.sd_extension_nm;
            let l = spec.channel_length_nm;
            let oracle = |x: f64, y: f64| {
                let in_si = y > tp + tox && y < tp + tox + h;
                let under_gate = x > ext && x < ext + l;
                let in_poly = y < tp || y > tp + 2.0 * tox + h;
                match (in_si, under_gate, in_poly) {
                    (true, true, _) => Region::ChannelSemiconductor,
                    (true, false, _) => Region::SdSemiconductor,
                    (false, true, true) => Region::GateElectrode,
                    _ => Region::GateDielectric,
                }
            };
            let mut rng = rand::rngs::StdRng::seed_from_u64(7);
            let (lx, ly) = (m.layout.extent_x, m.layout.extent_y);
            for _ in 0..1000 {
                let x = rng.gen_range(0.0..lx);
                let y = rng.gen_range(0.0..ly);
                // skip points sitting on a node line
                if m.x_nodes.iter().any(|&p| (p - x).abs() < 1e-9)
                    || m.y_nodes.iter().any(|&p| (p - y).abs() < 1e-9)
                {
                    continue;
                }
                assert_eq!(m.region_at(x, y), Some(oracle(x, y)), "at ({x}, {y})");
            }
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_node() {
        let m = build_mesh(&default_paper_device(), Resolution::Coarse).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mesh.csv");
        m.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), m.node_count() + 1);
        assert!(text.starts_with("x_nm,y_nm,region\n"));
    }
}
