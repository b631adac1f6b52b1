use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use jlfet::cli_io::{self, Plot, RunConfig};
use jlfet::compact::flat_band_voltage;
use jlfet::extraction::{characterize, compare_gate_stacks};
use jlfet::materials::{builtin_metal_table, classify_gate, ChannelType, GateMaterial};
use jlfet::mesh::{build_mesh, Resolution};
use jlfet::solver::{
    classify_regime, iv_sweep, mid_channel_min_ratio, solve_equilibrium, solve_ramped,
};
use jlfet::sweep::{fit_linear_trend, run_sweep, MetricField};
use jlfet::{BiasPoint, Error, Result};

#[derive(Parser)]
#[command(
    name = "jlfet",
    version,
    about = "Junctionless double-gate FET simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; the paper preset is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// coarse, default or fine.
    #[arg(long, global = true)]
    resolution: Option<String>,
    #[arg(long, global = true)]
    emit_fields: bool,
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Concurrent device solves in `sweep`.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium, transfer and output curves plus metrics for one device.
    Simulate,
    /// Run the configured parameter sweep.
    Sweep,
    /// Classify the built-in gate metals against the channel.
    Classify,
    /// Export potential and electron density grids.
    Fields {
        /// Gate voltages; `fb` stands for the flat-band voltage.
        #[arg(long, value_delimiter = ',', default_value = "0,fb")]
        vg: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        vd: f64,
    },
    /// Compare the metal gate with a doped-poly gate at matched threshold.
    ComparePoly {
        /// Signed poly doping (negative = p-type).
        #[arg(long, default_value_t = -1e20, allow_hyphen_values = true)]
        poly_doping: f64,
    },
    /// Write the paper device configuration.
    PresetPaper,
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    resolution: Resolution,
}

fn context(common: &Common) -> Result<Context> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::paper_preset(),
    };
    if common.emit_fields {
        config.emit_fields = true;
    }
    if common.emit_plots {
        config.emit_plots = true;
    }
    if let (Some(n), Some(s)) = (common.parallelism, config.sweep.as_mut()) {
        s.parallelism = n;
    }
    let resolution = match &common.resolution {
        Some(r) => Resolution::parse(r)
            .ok_or_else(|| Error::InvalidInput(format!("unknown resolution '{r}'")))?,
        None => config.resolution.unwrap_or_default(),
    };
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    Ok(Context {
        config,
        out,
        resolution,
    })
}

fn simulate(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let spec = &cfg.device;
    let mesh = build_mesh(spec, ctx.resolution)?;
    let eq = solve_equilibrium(&mesh, spec, &cfg.solver)?;
    let ch = characterize(spec, &mesh, &cfg.solver, &cfg.protocol)?;
    let output = iv_sweep(&mesh, spec, &cfg.solver, &cfg.protocol.output())?;
    let out = &ctx.out;
    cli_io::write_iv_csv(&ch.linear, &out.join("transfer_linear.csv"))?;
    cli_io::write_iv_csv(&ch.supply, &out.join("transfer_vdd.csv"))?;
    cli_io::write_iv_csv(&output, &out.join("output.csv"))?;
    cli_io::write_metrics_json(&ch.metrics, &out.join("metrics.json"))?;
    if cfg.emit_fields {
        cli_io::export_field_grid(&eq, &mesh, &out.join("fields_equilibrium.csv"))?;
        mesh.write_csv(&out.join("mesh.csv"))?;
    }
    if cfg.emit_plots {
        cli_io::render_plot(
            &Plot::from_curve(&ch.linear, true),
            &out.join("transfer_linear.svg"),
        )?;
        cli_io::render_plot(
            &Plot::from_curve(&ch.supply, true),
            &out.join("transfer_vdd.svg"),
        )?;
        cli_io::render_plot(&Plot::from_curve(&output, false), &out.join("output.svg"))?;
    }
    let m = &ch.metrics;
    println!(
        "V_th = {:.4} V  SS = {:.1} mV/dec  I_on = {:.4e} A  I_off = {:.4e} A  equilibrium: {:?}",
        m.v_th,
        m.ss,
        m.i_on,
        m.i_off,
        classify_regime(&eq, &mesh)
    );
    Ok(())
}

#[derive(Serialize)]
struct Trend {
    metric: MetricField,
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn sweep(ctx: &Context) -> Result<()> {
    let plan = ctx.config.sweep_plan(ctx.resolution)?;
    let result = run_sweep(&plan)?;
    cli_io::write_sweep(&result, &ctx.out)?;
    let mut trends = Vec::new();
    if let [x] = result.axes[..] {
        for y in [MetricField::VTh, MetricField::IOn, MetricField::Ss] {
            if let Ok(f) = fit_linear_trend(&result, x, y) {
                println!(
                    "{:?} vs {}: slope {:.4e}, R^2 {:.4}",
                    y,
                    x.column(),
                    f.slope,
                    f.r_squared
                );
                trends.push(Trend {
                    metric: y,
                    slope: f.slope,
                    intercept: f.intercept,
                    r_squared: f.r_squared,
                });
                if ctx.config.emit_plots && y != MetricField::Ss {
                    let name = format!(
                        "trend_{}.svg",
                        serde_json::to_value(y)
                            .unwrap()
                            .as_str()
                            .unwrap_or("metric")
                    );
                    cli_io::render_plot(&Plot::trend(&result, x, y)?, &ctx.out.join(name))?;
                }
            }
        }
    }
    cli_io::write_json(&trends, &ctx.out.join("trends.json"))?;
    println!(
        "{} rows, {} failures written to {}",
        result.rows.len(),
        result.failures.len(),
        ctx.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClassifyRow {
    metal: &'static str,
    workfunction_ev: f64,
    class: String,
    depletes_channel: bool,
}

fn classify(ctx: &Context) -> Result<()> {
    let spec = &ctx.config.device;
    let phi_s = spec.channel_workfunction()?;
    let ct = if spec.channel_doping_cm3 > 0.0 {
        ChannelType::N
    } else {
        ChannelType::P
    };
    let rows = builtin_metal_table()
        .iter()
        .map(|&(metal, phi)| {
            let c = classify_gate(phi, phi_s, ct)?;
            Ok(ClassifyRow {
                metal,
                workfunction_ev: phi,
                class: format!("{:?}", c.class),
                depletes_channel: !c.warning,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    println!("channel workfunction {phi_s:.4} eV ({ct:?}-type)");
    for r in &rows {
        println!(
            "{:<10} {:.2} eV  {:<11} depletes: {}",
            r.metal, r.workfunction_ev, r.class, r.depletes_channel
        );
    }
    cli_io::write_json(&rows, &ctx.out.join("classification.json"))
}

fn fields(ctx: &Context, vgs: &[String], vd: f64) -> Result<()> {
    let spec = &ctx.config.device;
    let mesh = build_mesh(spec, ctx.resolution)?;
    for tag in vgs {
        let vg = if tag == "fb" {
            flat_band_voltage(spec)?
        } else {
            tag.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad gate voltage '{tag}'")))?
        };
        let sol = solve_ramped(&mesh, spec, &ctx.config.solver, BiasPoint::new(vg, vd))?;
        let name = format!("fields_vg_{tag}_vd_{vd}.csv");
        cli_io::export_field_grid(&sol, &mesh, &ctx.out.join(&name))?;
        println!(
            "V_g = {vg:.4} V: mid-channel min n/N_d = {:.3e} ({:?}) -> {name}",
            mid_channel_min_ratio(&sol, &mesh),
            classify_regime(&sol, &mesh)
        );
    }
    Ok(())
}

fn compare_poly(ctx: &Context, poly_doping: f64) -> Result<()> {
    let cfg = &ctx.config;
    let mut poly = cfg.device.clone();
    poly.gate = GateMaterial::DopedPoly {
        poly_doping_cm3: poly_doping,
    };
    let cmp = compare_gate_stacks(
        &cfg.device,
        &poly,
        ctx.resolution,
        &cfg.solver,
        &cfg.protocol,
    )?;
    println!(
        "matched workfunction {:.4} eV: V_th metal {:.4} / poly {:.4} V, SS {:.1} / {:.1} mV/dec, on/off quotient {:.3}",
        cmp.matched_workfunction,
        cmp.metal.v_th,
        cmp.other.v_th,
        cmp.metal.ss_mv_per_dec,
        cmp.other.ss_mv_per_dec,
        cmp.ratio_quotient
    );
    cli_io::write_json(&cmp, &ctx.out.join("compare_poly.json"))
}

fn preset(ctx: &Context) -> Result<()> {
    let mut cfg = RunConfig::paper_preset();
    cfg.output_dir = ctx.out.clone();
    let path = ctx.out.join("paper.toml");
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    std::fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    error: String,
    stage: Option<&'a str>,
    iterations: Option<usize>,
    residual: Option<f64>,
    trace: &'a [f64],
}

fn report(err: &Error, out: &Path) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Config { .. } | Error::InvalidSpec(_) | Error::InvalidInput(_) | Error::Mesh(_) => {
            ExitCode::from(2)
        }
        Error::NonConvergence { .. } | Error::Extraction(_) => {
            let d = match err {
                Error::NonConvergence {
                    stage,
                    iterations,
                    residual,
                    trace,
                } => Diagnostics {
                    error: err.to_string(),
                    stage: Some(stage),
                    iterations: Some(*iterations),
                    residual: Some(*residual),
                    trace,
                },
                _ => Diagnostics {
                    error: err.to_string(),
                    stage: None,
                    iterations: None,
                    residual: None,
                    trace: &[],
                },
            };
            let path = out.join("diagnostics.json");
            if let Err(e) = cli_io::write_json(&d, &path) {
                eprintln!("error: {e}");
            } else {
                eprintln!("diagnostics written to {}", path.display());
            }
            ExitCode::from(3)
        }
        Error::Io { .. } => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match context(&cli.common) {
        Ok(c) => c,
        Err(e) => return report(&e, cli.common.out.as_deref().unwrap_or(Path::new("out"))),
    };
    let res = match &cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Classify => classify(&ctx),
        Command::Fields { vg, vd } => fields(&ctx, vg, *vd),
        Command::ComparePoly { poly_doping } => compare_poly(&ctx, *poly_doping),
        Command::PresetPaper => preset(&ctx),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, &ctx.out),
    }
}
