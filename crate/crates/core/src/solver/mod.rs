//! Nonlinear Poisson and electron drift-diffusion on the structured mesh.
//!
//! Potentials are referenced to the intrinsic level of the channel
//! semiconductor. The box method is used for both equations; electron fluxes
//! use the Scharfetter-Gummel form. Bias points are solved with a Gummel loop
//! alternating a damped-Newton Poisson solve (frozen quasi-Fermi level) and a
//! linear continuity solve for the electron density.

mod sg;
mod stencil;

use serde::{Deserialize, Serialize};

use crate::device::{BiasPoint, DeviceSpec};
use crate::error::{Error, Result};
use crate::extraction::{IvCurve, IvPoint, SweepKind};
use crate::linalg::BandMatrix;
use crate::materials::{GateMaterial, EPS0, Q};
use crate::mesh::{ContactName, Region, StructuredMesh};

pub use sg::{bernoulli, sg_edge_flux, EdgeGeometry};
use stencil::{NodeKind, Stencil};

/// q / eps0 with area in nm^2 and density in cm^-3, giving volts.
const POISSON_SCALE: f64 = Q / EPS0 * 1e-14;
const NEWTON_TOL: f64 = 1e-10;
/// Relative size of the contact-current round-off floor.
const CURRENT_NOISE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Gummel potential-update tolerance (V).
    pub tol_psi: f64,
    /// Relative terminal-current imbalance tolerance.
    pub tol_current: f64,
    pub max_gummel_iterations: usize,
    pub max_newton_iterations: usize,
    /// Newton potential-update clamp in units of kT/q.
    pub damping_vt: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_psi: 1e-6,
            tol_current: 1e-4,
            max_gummel_iterations: 200,
            max_newton_iterations: 50,
            damping_vt: 2.0,
        }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<()> {
        if self.tol_psi > 0.0
            && self.tol_current > 0.0
            && self.max_gummel_iterations > 0
            && self.max_newton_iterations > 0
            && self.damping_vt > 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "solver settings must all be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSolution {
    /// Electrostatic potential per node (V).
    pub psi: Vec<f64>,
    /// Electron density per node (cm^-3); zero in the dielectric.
    pub n: Vec<f64>,
    /// Electron quasi-Fermi potential per node (V).
    pub phi_n: Vec<f64>,
    pub converged: bool,
    /// Last Gummel potential update (V).
    pub poisson_residual: f64,
    /// |I_s + I_d| relative to the larger terminal current.
    pub continuity_residual: f64,
    pub iterations: usize,
    pub bias: BiasPoint,
    pub thermal_voltage: f64,
    pub effective_width_nm: f64,
}

struct Solver<'a> {
    mesh: &'a StructuredMesh,
    st: Stencil,
    settings: SolverSettings,
    bias: BiasPoint,
    /// Dirichlet potential of each contact/gate node, NaN for free nodes.
    fixed_psi: Vec<f64>,
    laplacian: BandMatrix,
}

impl<'a> Solver<'a> {
    fn new(
        mesh: &'a StructuredMesh,
        spec: &DeviceSpec,
        settings: SolverSettings,
        bias: BiasPoint,
    ) -> Result<Self> {
        spec.ensure_valid()?;
        settings.check()?;
        bias.check()?;
        if spec.channel_doping_cm3 <= 0.0 {
            return Err(Error::InvalidInput(
                "electron transport requires an n-type channel".into(),
            ));
        }
        let st = Stencil::new(mesh, spec);
        if st.kind.len() != mesh.node_count() {
            return Err(Error::InvalidInput("mesh does not match spec".into()));
        }
        let vt = st.vt;
        let gate_psi = match spec.gate {
            GateMaterial::Metal { workfunction_ev } => {
                let phi_ms = workfunction_ev - spec.channel_workfunction()?;
                bias.v_g - phi_ms + st.neutral_psi(spec.channel_doping_cm3)
            }
            GateMaterial::DopedPoly { poly_doping_cm3 } => {
                bias.v_g + vt * (poly_doping_cm3 / (2.0 * st.ni)).asinh()
            }
        };
        let sd_psi = st.neutral_psi(spec.sd_doping_cm3);
        let fixed_psi = st
            .kind
            .iter()
            .map(|k| match k {
                NodeKind::Free => f64::NAN,
                NodeKind::Gate => gate_psi,
                NodeKind::Source => sd_psi + bias.v_s,
                NodeKind::Drain => sd_psi + bias.v_d,
            })
            .collect();
        let laplacian = st.laplacian();
        Ok(Self {
            mesh,
            st,
            settings,
            bias,
            fixed_psi,
            laplacian,
        })
    }

    fn initial_guess(&self) -> (Vec<f64>, Vec<f64>) {
        let st = &self.st;
        let x_max = self.mesh.layout.extent_x;
        let mut psi = vec![0.0; st.kind.len()];
        let mut phi = vec![self.bias.v_s; st.kind.len()];
        let psi_channel = st.neutral_psi(st.channel_doping);
        for k in 0..psi.len() {
            let (i, _) = self.mesh.node_ij(k);
            let frac = self.mesh.x_nodes[i] / x_max;
            phi[k] = self.bias.v_s + frac * (self.bias.v_d - self.bias.v_s);
            psi[k] = if !self.fixed_psi[k].is_nan() {
                self.fixed_psi[k]
            } else if st.transport[k] {
                st.neutral_psi(st.local_doping(k)) + phi[k]
            } else if st.poly_area[k] > 0.0 {
                self.bias.v_g + st.vt * (st.poly_doping(k) / (2.0 * st.ni)).asinh()
            } else {
                psi_channel + phi[k]
            };
        }
        (psi, phi)
    }

    fn electron_density(&self, psi: f64, phi: f64) -> f64 {
        self.st.ni * ((psi - phi) / self.st.vt).min(300.0).exp()
    }

    /// Damped Newton on the Poisson equation with the quasi-Fermi level frozen.
    fn poisson(&self, psi: &mut [f64], phi: &[f64]) -> Result<usize> {
        let st = &self.st;
        let nn = psi.len();
        let clamp = self.settings.damping_vt * st.vt;
        let mut trace = Vec::new();
        for (k, p) in psi.iter_mut().enumerate() {
            if !self.fixed_psi[k].is_nan() {
                *p = self.fixed_psi[k];
            }
        }
        let mut rhs = vec![0.0; nn];
        for it in 1..=self.settings.max_newton_iterations {
            let mut jac = self.laplacian.clone();
            for k in 0..nn {
                if st.kind[k] != NodeKind::Free {
                    rhs[k] = 0.0;
                    continue;
                }
                // -(laplacian psi) + K * rho
                let mut r = 0.0;
                for &(nb, c) in &st.neighbours[k] {
                    r += c * (psi[nb] - psi[k]);
                }
                let mut rho = st.doping_charge[k];
                let mut drho = 0.0;
                if st.semi_area[k] > 0.0 {
                    let n = self.electron_density(psi[k], phi[k]);
                    rho -= st.semi_area[k] * n;
                    drho += st.semi_area[k] * n;
                }
                if st.poly_area[k] > 0.0 {
                    let vg = self.bias.v_g;
                    let n = self.electron_density(psi[k], vg);
                    let p = st.ni * ((vg - psi[k]) / st.vt).min(300.0).exp();
                    rho += st.poly_area[k] * (p - n) + st.poly_charge[k];
                    drho += st.poly_area[k] * (p + n);
                }
                r += POISSON_SCALE * rho;
                jac.add(k, k, POISSON_SCALE * drho / st.vt);
                rhs[k] = r;
            }
            if !jac.solve_in_place(&mut rhs) {
                return Err(Error::NonConvergence {
                    stage: "Poisson Newton (singular Jacobian)",
                    iterations: it,
                    residual: f64::NAN,
                    trace,
                });
            }
            let mut max_step = 0.0_f64;
            for k in 0..nn {
                let d = rhs[k];
                if !d.is_finite() {
                    return Err(Error::NonConvergence {
                        stage: "Poisson Newton (non-finite update)",
                        iterations: it,
                        residual: f64::NAN,
                        trace,
                    });
                }
                max_step = max_step.max(d.abs());
                psi[k] += d.clamp(-clamp, clamp);
            }
            trace.push(max_step);
            if max_step <= NEWTON_TOL {
                return Ok(it);
            }
        }
        Err(Error::NonConvergence {
            stage: "Poisson Newton",
            iterations: self.settings.max_newton_iterations,
            residual: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        })
    }

    /// Electron density from the linear continuity system at fixed potential.
    fn continuity(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let st = &self.st;
        let nn = psi.len();
        let mut a = BandMatrix::zeros(nn, self.mesh.ny());
        let mut rhs = vec![0.0; nn];
        for e in &st.edges {
            if e.mob == 0.0 {
                continue;
            }
            let t = (psi[e.b] - psi[e.a]) / st.vt;
            let (bp, bm) = (bernoulli(t), bernoulli(-t));
            // net current out of a: mob * (bm * n_a - bp * n_b)
            a.add(e.a, e.a, e.mob * bm);
            a.add(e.a, e.b, -e.mob * bp);
            a.add(e.b, e.b, e.mob * bp);
            a.add(e.b, e.a, -e.mob * bm);
        }
        for k in 0..nn {
            match st.kind[k] {
                NodeKind::Source | NodeKind::Drain => {
                    a.set_identity_row(k);
                    rhs[k] = st.sd_doping;
                }
                _ if !st.transport[k] => {
                    a.set_identity_row(k);
                    rhs[k] = 0.0;
                }
                _ => {}
            }
        }
        if !a.solve_in_place(&mut rhs) {
            return Err(Error::NonConvergence {
                stage: "electron continuity (singular matrix)",
                iterations: 1,
                residual: f64::NAN,
                trace: vec![],
            });
        }
        for k in 0..nn {
            if st.transport[k] {
                rhs[k] = rhs[k].max(f64::MIN_POSITIVE);
            }
        }
        Ok(rhs)
    }

    fn quasi_fermi(&self, psi: &[f64], n: &[f64], phi: &mut [f64]) {
        for k in 0..psi.len() {
            if self.st.transport[k] {
                phi[k] = psi[k] - self.st.vt * (n[k] / self.st.ni).ln();
            }
        }
    }

    fn finish(
        &self,
        psi: Vec<f64>,
        n: Vec<f64>,
        mut phi: Vec<f64>,
        poisson_residual: f64,
        iterations: usize,
    ) -> FieldSolution {
        let st = &self.st;
        let mut n = n;
        for k in 0..psi.len() {
            if st.poly_area[k] > 0.0 {
                n[k] = self.electron_density(psi[k], self.bias.v_g);
                phi[k] = self.bias.v_g;
            } else if !st.transport[k] {
                n[k] = 0.0;
                phi[k] = self.bias.v_s;
            }
        }
        let mut sol = FieldSolution {
            psi,
            n,
            phi_n: phi,
            converged: true,
            poisson_residual,
            continuity_residual: 0.0,
            iterations,
            bias: self.bias,
            thermal_voltage: st.vt,
            effective_width_nm: st.width_nm,
        };
        let (is, ss) = contact_current(&sol, self.mesh, &self.st, ContactName::Source);
        let (id, sd) = contact_current(&sol, self.mesh, &self.st, ContactName::Drain);
        let floor = CURRENT_NOISE * (ss + sd);
        sol.continuity_residual = (is + id).abs() / is.abs().max(id.abs()).max(floor);
        sol
    }

    fn run(&self, guess: Option<&FieldSolution>) -> Result<FieldSolution> {
        let (mut psi, mut phi) = match guess {
            Some(g) => (g.psi.clone(), g.phi_n.clone()),
            None => self.initial_guess(),
        };
        let st = &self.st;
        for (p, &f) in psi.iter_mut().zip(&self.fixed_psi) {
            if !f.is_nan() {
                *p = f;
            }
        }
        if self.bias.v_d == self.bias.v_s {
            phi.iter_mut().for_each(|p| *p = self.bias.v_s);
            let it = self.poisson(&mut psi, &phi)?;
            let n: Vec<f64> = (0..psi.len())
                .map(|k| {
                    if st.transport[k] {
                        self.electron_density(psi[k], phi[k])
                    } else {
                        0.0
                    }
                })
                .collect();
            return Ok(self.finish(psi, n, phi, 0.0, it));
        }
        if guess.is_some() {
            // re-anchor quasi-Fermi levels on the new contact voltages
            for k in 0..phi.len() {
                match st.kind[k] {
                    NodeKind::Source => phi[k] = self.bias.v_s,
                    NodeKind::Drain => phi[k] = self.bias.v_d,
                    _ => {}
                }
            }
        }
        let mut trace = Vec::new();
        for it in 1..=self.settings.max_gummel_iterations {
            let n = self.continuity(&psi)?;
            self.quasi_fermi(&psi, &n, &mut phi);
            let old = psi.clone();
            self.poisson(&mut psi, &phi)?;
            let dpsi = psi
                .iter()
                .zip(&old)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            trace.push(dpsi);
            if dpsi <= self.settings.tol_psi {
                let n = self.continuity(&psi)?;
                self.quasi_fermi(&psi, &n, &mut phi);
                let sol = self.finish(psi, n, phi, dpsi, it);
                if sol.continuity_residual <= self.settings.tol_current {
                    return Ok(sol);
                }
                return Err(Error::NonConvergence {
                    stage: "Gummel current balance",
                    iterations: it,
                    residual: sol.continuity_residual,
                    trace,
                });
            }
            if !dpsi.is_finite() {
                break;
            }
        }
        Err(Error::NonConvergence {
            stage: "Gummel",
            iterations: trace.len(),
            residual: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        })
    }
}

/// Zero-bias solution: V_g = V_d = V_s = 0.
pub fn solve_equilibrium(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    settings: &SolverSettings,
) -> Result<FieldSolution> {
    solve_bias(mesh, spec, BiasPoint::default(), settings, None)
}

pub fn solve_bias(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    bias: BiasPoint,
    settings: &SolverSettings,
    initial_guess: Option<&FieldSolution>,
) -> Result<FieldSolution> {
    if let Some(g) = initial_guess {
        if g.psi.len() != mesh.node_count() {
            return Err(Error::InvalidInput(
                "initial guess was computed on a different mesh".into(),
            ));
        }
    }
    Solver::new(mesh, spec, *settings, bias)?.run(initial_guess)
}

/// Current into the device through `contact` (A) and the sum of the
/// magnitudes of the flux terms that make it up.
fn contact_current(
    sol: &FieldSolution,
    mesh: &StructuredMesh,
    st: &Stencil,
    contact: ContactName,
) -> (f64, f64) {
    let nodes = mesh.contacts.get(contact);
    let kind = match contact {
        ContactName::Source => NodeKind::Source,
        ContactName::Drain => NodeKind::Drain,
        _ => return (0.0, 0.0),
    };
    let scale = Q * sol.thermal_voltage * sol.effective_width_nm * 1e-7;
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for &c in nodes {
        for &(k, e) in &st.transport_neighbours[c] {
            if st.kind[k] == kind {
                continue;
            }
            let edge = &st.edges[e];
            let t = (sol.psi[k] - sol.psi[c]) / sol.thermal_voltage;
            let into = edge.mob * bernoulli(t) * sol.n[k];
            let out = edge.mob * bernoulli(-t) * sol.n[c];
            total += into - out;
            magnitude += into.abs() + out.abs();
        }
    }
    (scale * total, scale * magnitude)
}

/// Conventional current flowing into the device through a contact (A).
/// Positive drain current corresponds to electrons moving source to drain.
pub fn terminal_current(
    solution: &FieldSolution,
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    contact: &str,
) -> Result<f64> {
    let name = ContactName::parse(contact)?;
    let st = Stencil::new(mesh, spec);
    Ok(contact_current(solution, mesh, &st, name).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullyDepleted,
    SubthresholdChannel,
    PartialAccumulation,
    FlatBandOrAccumulated,
}

/// min(n / N_d) over the silicon nodes of the mid-channel column.
pub fn mid_channel_min_ratio(solution: &FieldSolution, mesh: &StructuredMesh) -> f64 {
    let i = mesh.mid_channel_column();
    let (y0, y1) = mesh.layout.silicon_y;
    let mut r = f64::INFINITY;
    for (j, &y) in mesh.y_nodes.iter().enumerate() {
        if y < y0 - 1e-9 || y > y1 + 1e-9 {
            continue;
        }
        let k = mesh.node(i, j);
        let doping = node_transport_doping(mesh, k);
        if doping > 0.0 {
            r = r.min(solution.n[k] / doping);
        }
    }
    r
}

fn node_transport_doping(mesh: &StructuredMesh, k: usize) -> f64 {
    let (i, j) = mesh.node_ij(k);
    let mut area = 0.0;
    let mut charge = 0.0;
    for (ci, cj) in mesh.node_cells(i, j) {
        let c = mesh.cell(ci, cj);
        if mesh.cell_region[c].is_transport() {
            let a = (mesh.x_nodes[ci + 1] - mesh.x_nodes[ci])
                * (mesh.y_nodes[cj + 1] - mesh.y_nodes[cj]);
            area += a;
            charge += a * mesh.cell_doping[c];
        }
    }
    if area > 0.0 {
        charge / area
    } else {
        0.0
    }
}

pub fn classify_regime(solution: &FieldSolution, mesh: &StructuredMesh) -> Regime {
    let r = mid_channel_min_ratio(solution, mesh);
    if r < 1e-3 {
        Regime::FullyDepleted
    } else if r < 0.5 {
        Regime::SubthresholdChannel
    } else if r < 0.95 {
        Regime::PartialAccumulation
    } else {
        Regime::FlatBandOrAccumulated
    }
}

/// Node-index box `[i0, i1] x [j0, j1]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

/// Outward electric displacement flux through the boundary of the union of
/// the control volumes in `b`, and the net charge they enclose (both in C).
pub fn gauss_balance(
    solution: &FieldSolution,
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    b: NodeBox,
) -> (f64, f64) {
    let st = Stencil::new(mesh, spec);
    let inside = |k: usize| {
        let (i, j) = mesh.node_ij(k);
        (b.i0..=b.i1).contains(&i) && (b.j0..=b.j1).contains(&j)
    };
    let depth_cm = solution.effective_width_nm * 1e-7;
    let mut flux = 0.0;
    let mut charge = 0.0;
    let psi = &solution.psi;
    for k in 0..mesh.node_count() {
        if !inside(k) {
            continue;
        }
        for &(nb, c) in &st.neighbours[k] {
            if !inside(nb) {
                // eps0 * eps_r * (face/h) is dimensionless in nm; depth in cm
                flux -= EPS0 * c * (psi[nb] - psi[k]) * depth_cm;
            }
        }
        let mut rho = st.doping_charge[k] - st.semi_area[k] * solution.n[k];
        if st.poly_area[k] > 0.0 {
            let vg = solution.bias.v_g;
            let vt = solution.thermal_voltage;
            let n = st.ni * ((psi[k] - vg) / vt).exp();
            let p = st.ni * ((vg - psi[k]) / vt).exp();
            rho += st.poly_area[k] * (p - n) + st.poly_charge[k];
        }
        // nm^2 * cm^-3 -> cm^-1, times depth
        charge += Q * rho * 1e-14 * depth_cm;
    }
    (flux, charge)
}

/// Largest net SG current out of any free transport node, and the largest
/// single edge flux, both in A.
pub fn continuity_divergence(
    solution: &FieldSolution,
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
) -> (f64, f64) {
    let st = Stencil::new(mesh, spec);
    let mut div = vec![0.0; mesh.node_count()];
    let mut max_flux = 0.0_f64;
    let scale = Q * solution.thermal_voltage * solution.effective_width_nm * 1e-7;
    for e in &st.edges {
        if e.mob == 0.0 {
            continue;
        }
        let t = (solution.psi[e.b] - solution.psi[e.a]) / solution.thermal_voltage;
        let j = scale * e.mob * (bernoulli(t) * solution.n[e.b] - bernoulli(-t) * solution.n[e.a]);
        div[e.a] += j;
        div[e.b] -= j;
        max_flux = max_flux.max(j.abs());
    }
    let max_div = (0..mesh.node_count())
        .filter(|&k| st.transport[k] && st.kind[k] == NodeKind::Free)
        .map(|k| div[k].abs())
        .fold(0.0, f64::max);
    (max_div, max_flux)
}

/// Mobile electron charge q * integral(n) over the transport silicon (C).
pub(crate) fn electron_charge(
    solution: &FieldSolution,
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
) -> Vec<f64> {
    let st = Stencil::new(mesh, spec);
    let depth_cm = solution.effective_width_nm * 1e-7;
    (0..mesh.node_count())
        .map(|k| Q * st.semi_area[k] * solution.n[k] * 1e-14 * depth_cm)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Vg,
    Vd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweep {
    pub vary: SweepVar,
    pub fixed: BiasPoint,
    pub points: Vec<f64>,
}

impl BiasSweep {
    pub fn bias_at(&self, v: f64) -> BiasPoint {
        let mut b = self.fixed;
        match self.vary {
            SweepVar::Vg => b.v_g = v,
            SweepVar::Vd => b.v_d = v,
        }
        b
    }
}

const RAMP_STEP: f64 = 0.1;

/// Solve `target` starting from `anchor`, subdividing the step on failure.
fn continue_to(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    settings: &SolverSettings,
    anchor: &FieldSolution,
    target: BiasPoint,
) -> Result<FieldSolution> {
    let first = solve_bias(mesh, spec, target, settings, Some(anchor));
    if first.is_ok() {
        return first;
    }
    let mut last_err = first.unwrap_err();
    for pieces in [2usize, 4, 8] {
        let from = anchor.bias;
        let mut cur: Option<FieldSolution> = None;
        let mut ok = true;
        for s in 1..=pieces {
            let f = s as f64 / pieces as f64;
            let b = BiasPoint {
                v_g: from.v_g + f * (target.v_g - from.v_g),
                v_d: from.v_d + f * (target.v_d - from.v_d),
                v_s: from.v_s + f * (target.v_s - from.v_s),
            };
            match solve_bias(
                mesh,
                spec,
                b,
                settings,
                Some(cur.as_ref().unwrap_or(anchor)),
            ) {
                Ok(sol) => cur = Some(sol),
                Err(e) => {
                    last_err = e;
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(cur.expect("at least one piece"));
        }
    }
    Err(last_err)
}

/// Solve `target` from scratch: equilibrium-like start at the target gate
/// voltage, then ramp the drain in steps of at most 0.1 V.
pub fn solve_ramped(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    settings: &SolverSettings,
    target: BiasPoint,
) -> Result<FieldSolution> {
    let start = BiasPoint {
        v_g: target.v_g,
        v_d: target.v_s,
        v_s: target.v_s,
    };
    let mut sol = solve_bias(mesh, spec, start, settings, None)?;
    let span = target.v_d - target.v_s;
    let steps = (span.abs() / RAMP_STEP).ceil() as usize;
    for s in 1..=steps {
        let b = BiasPoint {
            v_d: target.v_s + span * s as f64 / steps as f64,
            ..target
        };
        sol = continue_to(mesh, spec, settings, &sol, b)?;
    }
    Ok(sol)
}

/// Solve each bias of `sweep` in order, continuing from the previous
/// converged point. Returns the curve and the last converged solution.
pub fn iv_sweep_with_solution(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    settings: &SolverSettings,
    sweep: &BiasSweep,
) -> Result<(IvCurve, FieldSolution)> {
    if sweep.points.is_empty() {
        return Err(Error::InvalidInput("empty bias sweep".into()));
    }
    let increasing = sweep.points.windows(2).all(|w| w[1] > w[0]);
    let decreasing = sweep.points.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidInput(
            "sweep points must be strictly monotone".into(),
        ));
    }
    let st = Stencil::new(mesh, spec);
    let mut anchor = solve_ramped(mesh, spec, settings, sweep.bias_at(sweep.points[0]))?;
    let mut points = Vec::with_capacity(sweep.points.len());
    points.push(IvPoint {
        v: sweep.points[0],
        i_d: contact_current(&anchor, mesh, &st, ContactName::Drain).0,
        converged: true,
    });
    for &v in &sweep.points[1..] {
        match continue_to(mesh, spec, settings, &anchor, sweep.bias_at(v)) {
            Ok(sol) => {
                points.push(IvPoint {
                    v,
                    i_d: contact_current(&sol, mesh, &st, ContactName::Drain).0,
                    converged: true,
                });
                anchor = sol;
            }
            Err(_) => points.push(IvPoint {
                v,
                i_d: f64::NAN,
                converged: false,
            }),
        }
    }
    let curve = IvCurve {
        kind: match sweep.vary {
            SweepVar::Vg => SweepKind::Transfer,
            SweepVar::Vd => SweepKind::Output,
        },
        fixed_bias: sweep.fixed,
        points,
        spec_fingerprint: spec.fingerprint(),
    };
    Ok((curve, anchor))
}

pub fn iv_sweep(
    mesh: &StructuredMesh,
    spec: &DeviceSpec,
    settings: &SolverSettings,
    sweep: &BiasSweep,
) -> Result<IvCurve> {
    iv_sweep_with_solution(mesh, spec, settings, sweep).map(|(c, _)| c)
}

/// Region tag of each node, for field exports.
pub fn node_regions(mesh: &StructuredMesh) -> Vec<Region> {
    (0..mesh.node_count())
        .map(|k| mesh.node_region(k))
        .collect()
}
