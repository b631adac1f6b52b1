use jlfet::extraction::{characterize, BiasProtocol};
use jlfet::sweep::*;
use jlfet::{build_mesh, default_paper_device, Resolution, SolverSettings};

fn plan(values: Vec<f64>, parallelism: usize) -> SweepPlan {
    SweepPlan {
        resolution: Resolution::Coarse,
        parallelism,
        ..SweepPlan::new(
            default_paper_device(),
            vec![SweepAxis {
                param: ParamPath::GateWorkfunction,
                values,
            }],
        )
    }
}

#[test]
fn single_point_sweep_equals_direct_run() {
    let r = run_sweep(&plan(vec![4.8], 1)).unwrap();
    assert_eq!(r.rows.len(), 1);
    let spec = default_paper_device().with_workfunction(4.8);
    let mesh = build_mesh(&spec, Resolution::Coarse).unwrap();
    let direct = characterize(
        &spec,
        &mesh,
        &SolverSettings::default(),
        &BiasProtocol::default(),
    )
    .unwrap();
    assert_eq!(r.rows[0].metrics, direct.metrics);
    assert_eq!(
        r.rows[0].metrics.v_th.to_bits(),
        direct.metrics.v_th.to_bits()
    );
}

#[test]
fn rows_keep_axis_order_and_parallelism_is_invisible() {
    let values = vec![5.22, 4.63, 5.0, 4.8];
    let seq = run_sweep(&plan(values.clone(), 1)).unwrap();
    let par = run_sweep(&plan(values.clone(), 4)).unwrap();
    assert_eq!(seq.rows.len(), 4);
    let got: Vec<f64> = seq.rows.iter().map(|r| r.params[0]).collect();
    assert_eq!(got, values);
    assert_eq!(seq, par);
    assert_eq!(seq.to_csv(), par.to_csv());
    assert_eq!(seq.to_json().unwrap(), par.to_json().unwrap());
    // higher workfunction, higher threshold
    let mut rows = seq.rows.clone();
    rows.sort_by(|a, b| a.params[0].total_cmp(&b.params[0]));
    assert!(rows
        .windows(2)
        .all(|w| w[1].metrics.v_th > w[0].metrics.v_th));
    let fit = fit_linear_trend(&seq, ParamPath::GateWorkfunction, MetricField::VTh).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.15, "{fit:?}");
}

#[test]
fn failures_do_not_abort_and_keep_order() {
    let p = SweepPlan {
        resolution: Resolution::Coarse,
        ..SweepPlan::new(
            default_paper_device(),
            vec![SweepAxis {
                param: ParamPath::Tox,
                values: vec![2.0, 0.2, 3.0],
            }],
        )
    };
    let r = run_sweep_sequential(&p).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].index, 1);
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[2].contains("failed"));
    assert!(lines[3].ends_with("ok,"));
}
