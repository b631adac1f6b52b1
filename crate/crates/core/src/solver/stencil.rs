//! Box-method coefficients precomputed from a mesh and a device.

use crate::device::DeviceSpec;
use crate::linalg::BandMatrix;
use crate::materials::EPS0;
use crate::mesh::{Region, StructuredMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Free,
    Gate,
    Source,
    Drain,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge {
    pub a: usize,
    pub b: usize,
    /// Sum over adjacent cells of eps_r * half-face / length.
    pub eps: f64,
    /// Sum over adjacent transport cells of mu * half-face / length.
    pub mob: f64,
}

pub(crate) struct Stencil {
    pub vt: f64,
    pub ni: f64,
    pub channel_doping: f64,
    pub sd_doping: f64,
    pub width_nm: f64,
    pub kind: Vec<NodeKind>,
    pub transport: Vec<bool>,
    /// Transport-silicon part of each control volume (nm^2).
    pub semi_area: Vec<f64>,
    /// Integral of the transport doping over the control volume (nm^2 cm^-3).
    pub doping_charge: Vec<f64>,
    pub poly_area: Vec<f64>,
    pub poly_charge: Vec<f64>,
    pub edges: Vec<Edge>,
    /// (neighbour, eps coefficient) per node.
    pub neighbours: Vec<Vec<(usize, f64)>>,
    /// (neighbour, edge index) over edges with a transport face.
    pub transport_neighbours: Vec<Vec<(usize, usize)>>,
}

impl Stencil {
    pub fn new(mesh: &StructuredMesh, spec: &DeviceSpec) -> Self {
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let nn = nx * ny;
        let x = &mesh.x_nodes;
        let y = &mesh.y_nodes;
        let hx = |ci: usize| x[ci + 1] - x[ci];
        let hy = |cj: usize| y[cj + 1] - y[cj];

        let mut kind = vec![NodeKind::Free; nn];
        for &k in mesh
            .contacts
            .gate_top
            .iter()
            .chain(&mesh.contacts.gate_bottom)
        {
            kind[k] = NodeKind::Gate;
        }
        for &k in &mesh.contacts.source {
            kind[k] = NodeKind::Source;
        }
        for &k in &mesh.contacts.drain {
            kind[k] = NodeKind::Drain;
        }

        let mut transport = vec![false; nn];
        let mut semi_area = vec![0.0; nn];
        let mut doping_charge = vec![0.0; nn];
        let mut poly_area = vec![0.0; nn];
        let mut poly_charge = vec![0.0; nn];
        for i in 0..nx {
            for j in 0..ny {
                let k = mesh.node(i, j);
                for (ci, cj) in mesh.node_cells(i, j) {
                    let c = mesh.cell(ci, cj);
                    let quarter = 0.25 * hx(ci) * hy(cj);
                    match mesh.cell_region[c] {
                        r if r.is_transport() => {
                            transport[k] = true;
                            semi_area[k] += quarter;
                            doping_charge[k] += quarter * mesh.cell_doping[c];
                        }
                        Region::GateElectrode => {
                            poly_area[k] += quarter;
                            poly_charge[k] += quarter * mesh.cell_doping[c];
                        }
                        _ => {}
                    }
                }
            }
        }

        let mut edges = Vec::with_capacity(2 * nn);
        let eps_r = |c: usize| mesh.cell_permittivity[c] / EPS0;
        for i in 0..nx {
            for j in 0..ny {
                if i + 1 < nx {
                    let (mut eps, mut mob) = (0.0, 0.0);
                    for cj in [j.wrapping_sub(1), j] {
                        if cj < ny - 1 {
                            let c = mesh.cell(i, cj);
                            let face = 0.5 * hy(cj) / hx(i);
                            eps += eps_r(c) * face;
                            mob += mesh.cell_mobility[c] * face;
                        }
                    }
                    edges.push(Edge {
                        a: mesh.node(i, j),
                        b: mesh.node(i + 1, j),
                        eps,
                        mob,
                    });
                }
                if j + 1 < ny {
                    let (mut eps, mut mob) = (0.0, 0.0);
                    for ci in [i.wrapping_sub(1), i] {
                        if ci < nx - 1 {
                            let c = mesh.cell(ci, j);
                            let face = 0.5 * hx(ci) / hy(j);
                            eps += eps_r(c) * face;
                            mob += mesh.cell_mobility[c] * face;
                        }
                    }
                    edges.push(Edge {
                        a: mesh.node(i, j),
                        b: mesh.node(i, j + 1),
                        eps,
                        mob,
                    });
                }
            }
        }

        let mut neighbours = vec![Vec::with_capacity(4); nn];
        let mut transport_neighbours = vec![Vec::new(); nn];
        for (idx, e) in edges.iter().enumerate() {
            neighbours[e.a].push((e.b, e.eps));
            neighbours[e.b].push((e.a, e.eps));
            if e.mob > 0.0 {
                transport_neighbours[e.a].push((e.b, idx));
                transport_neighbours[e.b].push((e.a, idx));
            }
        }

        Stencil {
            vt: spec.thermal_voltage(),
            ni: spec.intrinsic_density(),
            channel_doping: spec.channel_doping_cm3,
            sd_doping: spec.sd_doping_cm3,
            width_nm: spec.effective_width_nm(),
            kind,
            transport,
            semi_area,
            doping_charge,
            poly_area,
            poly_charge,
            edges,
            neighbours,
            transport_neighbours,
        }
    }

    /// Charge-neutral potential of n-type material with electrons only.
    pub fn neutral_psi(&self, doping: f64) -> f64 {
        self.vt * (doping / self.ni).ln()
    }

    pub fn local_doping(&self, k: usize) -> f64 {
        if self.semi_area[k] > 0.0 {
            self.doping_charge[k] / self.semi_area[k]
        } else {
            0.0
        }
    }

    pub fn poly_doping(&self, k: usize) -> f64 {
        if self.poly_area[k] > 0.0 {
            self.poly_charge[k] / self.poly_area[k]
        } else {
            0.0
        }
    }

    /// Negated discrete Laplacian with identity rows on Dirichlet nodes.
    pub fn laplacian(&self) -> BandMatrix {
        let nn = self.kind.len();
        let bw = self
            .edges
            .iter()
            .map(|e| e.b.abs_diff(e.a))
            .max()
            .unwrap_or(1);
        let mut a = BandMatrix::zeros(nn, bw);
        for e in &self.edges {
            if self.kind[e.a] == NodeKind::Free {
                a.add(e.a, e.a, e.eps);
                a.add(e.a, e.b, -e.eps);
            }
            if self.kind[e.b] == NodeKind::Free {
                a.add(e.b, e.b, e.eps);
                a.add(e.b, e.a, -e.eps);
            }
        }
        for k in 0..nn {
            if self.kind[k] != NodeKind::Free {
                a.set_identity_row(k);
            }
        }
        a
    }
}
