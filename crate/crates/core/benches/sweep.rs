use criterion::{criterion_group, criterion_main, Criterion};

use jlfet::default_paper_device;
use jlfet::mesh::Resolution;
use jlfet::sweep::{run_sweep, run_sweep_sequential, ParamPath, SweepAxis, SweepPlan};

fn plan(parallelism: usize) -> SweepPlan {
    SweepPlan {
        resolution: Resolution::Coarse,
        parallelism,
        ..SweepPlan::new(
            default_paper_device(),
            vec![SweepAxis {
                param: ParamPath::GateWorkfunction,
                values: vec![4.63, 4.8, 5.0, 5.22],
            }],
        )
    }
}

fn bench(c: &mut Criterion) {
    let threads = std::thread::available_parallelism()
        .map_or(2, |n| n.get())
        .max(2);
    let mut g = c.benchmark_group("workfunction_sweep");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| run_sweep_sequential(&plan(1)).unwrap())
    });
    g.bench_function(format!("pool_{threads}"), |b| {
        b.iter(|| run_sweep(&plan(threads)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
