use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use turnpike::arcs::{self, ArcOptions};
use turnpike::phase::{build_field, find_equilibria, trace_curve, ContourGrid, CurveSet};
use turnpike::shooting::{shoot_sweep, ShootOptions};
use turnpike::{catalog, Exec, PhaseState};

const STRATEGIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn kernels(c: &mut Criterion) {
    let p = catalog::shallow_lakes(catalog::fixed_start(0.5, 63.0));
    let f = build_field(&p).unwrap();
    let eq = find_equilibria(&f, p.window.x, 400, Exec::default());
    let saddle = eq[2].clone();

    let mut g = c.benchmark_group("contour");
    for (name, exec) in STRATEGIES {
        let grid = ContourGrid { nx: 400, ny: 400 };
        g.bench_function(BenchmarkId::new("level_set", name), |b| {
            b.iter(|| trace_curve(&f, CurveSet::LevelSet(saddle.c_value), p.window, grid, black_box(exec)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("equilibria");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::new("scan_20000", name), |b| {
            b.iter(|| find_equilibria(&f, p.window.x, 20_000, black_box(exec)))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("arcs");
    g.sample_size(20);
    for (name, exec) in STRATEGIES {
        let opts = ArcOptions { exec, ..ArcOptions::from_problem(&p) };
        g.bench_function(BenchmarkId::new("leaving_candidates", name), |b| {
            b.iter(|| arcs::leaving_candidates(&f, &saddle, black_box(&opts)))
        });
        g.bench_function(BenchmarkId::new("separatrices", name), |b| {
            b.iter(|| arcs::separatrices(&f, &saddle, 1e-6, black_box(&opts)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("shooting");
    g.sample_size(10);
    let bcs: Vec<_> = (0..8).map(|k| catalog::fixed_start(0.5, 15.0 + 2.5 * k as f64)).collect();
    for (name, exec) in STRATEGIES {
        let opts = ShootOptions { exec, ..ShootOptions::for_saddle(&saddle) };
        g.bench_function(BenchmarkId::new("sweep_8", name), |b| {
            b.iter(|| shoot_sweep(&f, &bcs, PhaseState::new(0.5, 0.3075), black_box(&opts)))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
