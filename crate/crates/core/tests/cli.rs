use std::path::Path;
use std::process::Command;

fn jlfet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_jlfet"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn preset_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = jlfet(&["preset-paper", "--out", s(out)]);
    assert!(o.status.success(), "{o:?}");
    let cfg = out.join("paper.toml");
    let o = jlfet(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(out),
        "--resolution",
        "coarse",
        "--emit-plots",
        "--emit-fields",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    for key in ["V_th", "SS", "I_on", "I_off"] {
        assert!(m[key].as_f64().unwrap().is_finite(), "{key}");
    }
    for svg in ["transfer_linear.svg", "transfer_vdd.svg", "output.svg"] {
        let text = std::fs::read_to_string(out.join(svg)).unwrap();
        roxmltree::Document::parse(&text).unwrap();
    }
    let grid = std::fs::read_to_string(out.join("fields_equilibrium.csv")).unwrap();
    let mesh = std::fs::read_to_string(out.join("mesh.csv")).unwrap();
    assert_eq!(grid.lines().count(), mesh.lines().count());
    assert!(grid.starts_with("x_nm,y_nm,psi_V,n_cm3,region\n"));
    let iv = std::fs::read_to_string(out.join("output.csv")).unwrap();
    assert!(iv.starts_with("sweep_V,I_d_A,converged\n"));
}

#[test]
fn bad_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "output_dir = \"x\"\n\n[device]\nchannel_lenght_nm = 3\n",
    )
    .unwrap();
    let o = jlfet(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:4:1"), "{err}");
}

#[test]
fn solver_failure_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = jlfet::cli_io::RunConfig::paper_preset();
    cfg.solver.max_gummel_iterations = 1;
    let path = dir.path().join("c.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let o = jlfet(&[
        "fields",
        "--vg",
        "1.0",
        "--vd",
        "1.0",
        "--config",
        s(&path),
        "--out",
        s(dir.path()),
        "--resolution",
        "coarse",
    ]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    let d: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert!(d["stage"].is_string());
}

fn min_max_ratio(path: &Path) -> (f64, f64) {
    let text = std::fs::read_to_string(path).unwrap();
    let x: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[4] == "channel").then(|| (f[0].parse().unwrap(), f[3].parse::<f64>().unwrap()))
        })
        .collect();
    let mid = 21.0;
    let col: Vec<f64> = x
        .iter()
        .filter(|p| (p.0 - mid).abs() < 0.6)
        .map(|p| p.1 / 2e19)
        .collect();
    (
        col.iter().copied().fold(f64::INFINITY, f64::min),
        col.iter().copied().fold(0.0, f64::max),
    )
}

#[test]
fn fields_contrast_depletion_and_flat_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = jlfet(&["fields", "--vg", "0,fb", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (off_min, _) = min_max_ratio(&dir.path().join("fields_vg_0_vd_0.csv"));
    let (fb_min, _) = min_max_ratio(&dir.path().join("fields_vg_fb_vd_0.csv"));
    assert!(off_min < 1e-3, "{off_min}");
    assert!(fb_min >= 0.95, "{fb_min}");
}

#[test]
fn classify_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = jlfet(&["classify", "--out", s(dir.path())]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("classification.json")).unwrap(),
    )
    .unwrap();
    let w = rows
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["metal"] == "Tungsten")
        .unwrap();
    assert_eq!(w["depletes_channel"], true);
}

#[test]
fn sweep_writes_csv_and_trend_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = jlfet::cli_io::RunConfig::paper_preset();
    cfg.sweep.as_mut().unwrap().axes[0].values = vec![4.63, 4.9, 5.22];
    let path = dir.path().join("c.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let o = jlfet(&[
        "sweep",
        "--config",
        s(&path),
        "--out",
        s(dir.path()),
        "--resolution",
        "coarse",
        "--emit-plots",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let svg = std::fs::read_to_string(dir.path().join("trend_v_th.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc
        .descendants()
        .any(|n| n.text().is_some_and(|t| t.contains("slope"))));
}
