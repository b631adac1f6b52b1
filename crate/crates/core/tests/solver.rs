use jlfet::compact::{drain_current_compact, flat_band_voltage};
use jlfet::extraction::gate_capacitance;
use jlfet::materials::{EPS0, Q};
use jlfet::solver::*;
use jlfet::{build_mesh, default_paper_device, BiasPoint, DeviceSpec, Resolution, StructuredMesh};

fn paper() -> (DeviceSpec, StructuredMesh) {
    let spec = default_paper_device();
    let mesh = build_mesh(&spec, Resolution::Default).unwrap();
    (spec, mesh)
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn normally_off_at_zero_gate_bias() {
    let (spec, mesh) = paper();
    for phi in [4.8, 5.0, 5.22] {
        let d = spec.with_workfunction(phi);
        let sol = solve_equilibrium(&mesh, &d, &settings()).unwrap();
        let r = mid_channel_min_ratio(&sol, &mesh);
        assert!(r < 1e-3, "phi {phi}: {r}");
        assert_eq!(classify_regime(&sol, &mesh), Regime::FullyDepleted);
    }
}

#[test]
fn flat_gate_gives_neutral_channel() {
    let (spec, mesh) = paper();
    let vfb = flat_band_voltage(&spec).unwrap();
    let sol = solve_bias(&mesh, &spec, BiasPoint::new(vfb, 0.0), &settings(), None).unwrap();
    let mut worst = 0.0_f64;
    for k in 0..mesh.node_count() {
        if mesh.node_region(k).is_transport() {
            worst = worst.max((sol.n[k] / spec.channel_doping_cm3 - 1.0).abs());
        }
    }
    assert!(worst < 0.02, "{worst}");
    assert_eq!(classify_regime(&sol, &mesh), Regime::FlatBandOrAccumulated);
}

#[test]
fn regimes_follow_gate_bias() {
    let (spec, mesh) = paper();
    let order = [-0.5, 0.3, 0.5, 1.0].map(|vg| {
        let sol = solve_bias(&mesh, &spec, BiasPoint::new(vg, 0.0), &settings(), None).unwrap();
        mid_channel_min_ratio(&sol, &mesh)
    });
    assert!(order.windows(2).all(|w| w[1] > w[0]), "{order:?}");
}

#[test]
fn equilibrium_carries_no_current() {
    let (spec, mesh) = paper();
    for vg in [0.0, 0.6, 1.2] {
        let sol = solve_bias(&mesh, &spec, BiasPoint::new(vg, 0.0), &settings(), None).unwrap();
        let id = terminal_current(&sol, &mesh, &spec, "drain").unwrap();
        // round-off of the cancelling contact flux terms only
        assert!(id.abs() < 1e-15, "{id}");
    }
}

#[test]
fn flat_band_slab_conductance() {
    let (spec, mesh) = paper();
    let vfb = flat_band_voltage(&spec).unwrap();
    let vd = 0.01;
    let sol = solve_ramped(&mesh, &spec, &settings(), BiasPoint::new(vfb, vd)).unwrap();
    let id = terminal_current(&sol, &mesh, &spec, "drain").unwrap();
    let mu = spec.channel_material.mobility(spec.channel_doping_cm3);
    let area = spec.channel_height_nm * 1e-7 * spec.effective_width_nm() * 1e-7;
    // the whole contact-to-contact bar is neutral at flat band
    let g = Q * mu * spec.channel_doping_cm3 * area / (spec.total_length_nm() * 1e-7);
    assert!((id / (g * vd) - 1.0).abs() < 0.05, "{id} vs {}", g * vd);
}

#[test]
fn terminal_currents_balance() {
    let (spec, mesh) = paper();
    let sweep = BiasSweep {
        vary: SweepVar::Vd,
        fixed: BiasPoint::new(1.0, 0.0),
        points: vec![0.0, 0.25, 0.5, 0.75, 1.0],
    };
    let mut anchor = solve_equilibrium(&mesh, &spec, &settings()).unwrap();
    for &vd in &sweep.points[1..] {
        anchor = solve_bias(&mesh, &spec, sweep.bias_at(vd), &settings(), Some(&anchor)).unwrap();
        let id = terminal_current(&anchor, &mesh, &spec, "drain").unwrap();
        let is = terminal_current(&anchor, &mesh, &spec, "source").unwrap();
        assert!(id > 0.0);
        assert!((id + is).abs() / id.abs() < 1e-4, "{id} {is}");
        assert!(anchor.continuity_residual < 1e-4);
        let (div, flux) = continuity_divergence(&anchor, &mesh, &spec);
        assert!(div <= 1e-9 * flux, "{div} {flux}");
    }
}

#[test]
fn gauss_law_on_interior_boxes() {
    let (spec, mesh) = paper();
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mid = mesh.mid_channel_column();
    for bias in [
        BiasPoint::new(0.0, 0.0),
        BiasPoint::new(1.0, 0.0),
        BiasPoint::new(0.5, 0.5),
    ] {
        let sol = solve_ramped(&mesh, &spec, &settings(), bias).unwrap();
        let boxes = [
            NodeBox {
                i0: mid - 3,
                i1: mid + 3,
                j0: 2,
                j1: ny - 3,
            },
            NodeBox {
                i0: 1,
                i1: nx - 2,
                j0: 1,
                j1: ny / 2,
            },
            NodeBox {
                i0: mid,
                i1: nx - 2,
                j0: ny / 3,
                j1: 2 * ny / 3,
            },
        ];
        for b in boxes {
            let (flux, charge) = gauss_balance(&sol, &mesh, &spec, b);
            let scale = flux.abs().max(charge.abs());
            assert!(
                (flux - charge).abs() <= 0.01 * scale,
                "{bias:?} {b:?}: {flux} {charge}"
            );
        }
    }
}

#[test]
fn depletion_width_matches_abrupt_approximation() {
    let mut d = default_paper_device();
    let n = 1e18;
    d.channel_doping_cm3 = n;
    d.sd_doping_cm3 = n;
    d.channel_height_nm = 100.0;
    d.channel_length_nm = 120.0;
    d.effective_width_factor = 1.0;
    let phi_s = d.channel_workfunction().unwrap();
    let d = d.with_workfunction(phi_s + 0.6);
    let mesh = build_mesh(&d, Resolution::Default).unwrap();
    let sol = solve_equilibrium(&mesh, &d, &settings()).unwrap();
    let i = mesh.mid_channel_column();
    let (y0, y1) = mesh.layout.silicon_y;
    let js = mesh
        .y_nodes
        .iter()
        .position(|&y| (y - y0).abs() < 1e-9)
        .unwrap();
    let jc = mesh
        .y_nodes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - 0.5 * (y0 + y1))
                .abs()
                .total_cmp(&(b.1 - 0.5 * (y0 + y1)).abs())
        })
        .unwrap()
        .0;
    let psi_bulk = sol.psi[mesh.node(i, jc)];
    let psi_surf = sol.psi[mesh.node(i, js)];
    // the core must still be neutral for the one-sided estimate to apply
    assert!((sol.n[mesh.node(i, jc)] / n - 1.0).abs() < 0.01);
    let mut edge = f64::NAN;
    for j in js..jc {
        let (a, b) = (sol.n[mesh.node(i, j)], sol.n[mesh.node(i, j + 1)]);
        if a < 0.5 * n && b >= 0.5 * n {
            let t = (0.5 * n - a) / (b - a);
            edge = mesh.y_nodes[j] + t * (mesh.y_nodes[j + 1] - mesh.y_nodes[j]) - y0;
            break;
        }
    }
    let eps = d.channel_material.relative_permittivity * EPS0;
    let analytic = (2.0 * eps * (psi_bulk - psi_surf) / (Q * n)).sqrt() * 1e7;
    assert!((edge / analytic - 1.0).abs() < 0.10, "{edge} vs {analytic}");
}

#[test]
fn accumulation_capacitance_is_oxide_limited() {
    let (spec, mesh) = paper();
    let c = gate_capacitance(&spec, &mesh, &settings(), 2.0, 0.01).unwrap();
    let area = 2.0 * spec.channel_length_nm * 1e-7 * spec.effective_width_nm() * 1e-7;
    let c_ox =
        spec.dielectric.relative_permittivity * EPS0 / (spec.dielectric_thickness_nm * 1e-7) * area;
    assert!((c / c_ox - 1.0).abs() < 0.15, "{c} vs {c_ox}");
}

#[test]
fn source_drain_mirror_symmetry() {
    let (spec, mesh) = paper();
    let v = 0.2;
    let a = solve_ramped(
        &mesh,
        &spec,
        &settings(),
        BiasPoint {
            v_g: 0.6,
            v_d: -v,
            v_s: 0.0,
        },
    )
    .unwrap();
    let b = solve_ramped(
        &mesh,
        &spec,
        &settings(),
        BiasPoint {
            v_g: 0.6 + v,
            v_d: v,
            v_s: 0.0,
        },
    )
    .unwrap();
    let ia = terminal_current(&a, &mesh, &spec, "drain").unwrap();
    let ib = terminal_current(&b, &mesh, &spec, "drain").unwrap();
    assert!(ia < 0.0);
    assert!((ia + ib).abs() / ib < 1e-3, "{ia} {ib}");
}

#[test]
fn transfer_and_output_shapes() {
    let (spec, mesh) = paper();
    let t = iv_sweep(
        &mesh,
        &spec,
        &settings(),
        &BiasSweep {
            vary: SweepVar::Vg,
            fixed: BiasPoint::new(0.0, 0.05),
            points: (0..13).map(|k| -0.4 + 0.1 * k as f64).collect(),
        },
    )
    .unwrap();
    assert!(t.points.iter().all(|p| p.converged));
    assert!(t.points.windows(2).all(|w| w[1].i_d > w[0].i_d));
    let o = iv_sweep(
        &mesh,
        &spec,
        &settings(),
        &BiasSweep {
            vary: SweepVar::Vd,
            fixed: BiasPoint::new(1.0, 0.0),
            points: (0..11).map(|k| 0.1 * k as f64).collect(),
        },
    )
    .unwrap();
    let i: Vec<f64> = o.points.iter().map(|p| p.i_d).collect();
    assert!(i.windows(2).all(|w| w[1] > w[0]));
    // conductance falls monotonically with drain bias
    let g: Vec<f64> = i.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
}

#[test]
fn numerical_on_current_close_to_compact_estimate() {
    let (spec, mesh) = paper();
    let sol = solve_ramped(&mesh, &spec, &settings(), BiasPoint::new(1.0, 1.0)).unwrap();
    let num = terminal_current(&sol, &mesh, &spec, "drain").unwrap();
    let est = drain_current_compact(&spec, 1.0, 1.0).unwrap();
    assert!((num / est).ln().abs() < 2f64.ln(), "{num} vs {est}");
}

#[test]
fn mismatched_guess_rejected() {
    let (spec, mesh) = paper();
    let coarse = build_mesh(&spec, Resolution::Coarse).unwrap();
    let g = solve_equilibrium(&coarse, &spec, &settings()).unwrap();
    assert!(solve_bias(
        &mesh,
        &spec,
        BiasPoint::new(0.1, 0.0),
        &settings(),
        Some(&g)
    )
    .is_err());
    assert!(terminal_current(&g, &coarse, &spec, "substrate").is_err());
}

#[test]
fn iteration_cap_reports_nonconvergence() {
    let (spec, mesh) = paper();
    let s = SolverSettings {
        max_gummel_iterations: 1,
        ..settings()
    };
    match solve_ramped(&mesh, &spec, &s, BiasPoint::new(1.0, 1.0)) {
        Err(jlfet::Error::NonConvergence { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!(
            "expected non-convergence, got {:?}",
            other.map(|s| s.iterations)
        ),
    }
}

#[test]
fn sd_extension_effect_tracks_series_resistance() {
    // the ungated extensions are resistive, so I_on moves with their length;
    // the sentinel checks that the move matches the compact series-resistance estimate
    let base = default_paper_device();
    let on = |ext: f64| {
        let mut d = base.clone();
        d.sd_extension_nm = ext;
        let mesh = build_mesh(&d, Resolution::Default).unwrap();
        let sol = solve_ramped(&mesh, &d, &settings(), BiasPoint::new(1.0, 1.0)).unwrap();
        (
            terminal_current(&sol, &mesh, &d, "drain").unwrap(),
            drain_current_compact(&d, 1.0, 1.0).unwrap(),
        )
    };
    let (n0, c0) = on(10.0);
    for ext in [9.0, 11.0] {
        let (n, c) = on(ext);
        let dn = n / n0 - 1.0;
        let dc = c / c0 - 1.0;
        assert!(
            (dn - dc).abs() < 0.03,
            "ext {ext}: numerical {dn}, compact {dc}"
        );
    }
}
