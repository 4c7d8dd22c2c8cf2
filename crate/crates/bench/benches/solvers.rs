use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hhmo::degenerate::DegenerateConstruction;
use hhmo::kernel::{build_kernel_table, SyntheticKernel};
use hhmo::pde::{PdeConfig, PdeModel, PdeSolver};
use hhmo::profile::solve_kappa;
use hhmo::rings::{solve_pattern, RingLimits, RingTols};
use hhmo::specfun::{erfc, kummer_m, SeriesAccuracy};
use hhmo::ModelParams;

fn special_functions(c: &mut Criterion) {
    let acc = SeriesAccuracy::default();
    c.bench_function("kummer_m", |b| b.iter(|| kummer_m(black_box(0.88), 2.27, black_box(-0.25), acc).unwrap()));
    c.bench_function("erfc", |b| b.iter(|| erfc(black_box(0.731))));
}

fn kernels(c: &mut Criterion) {
    let prof = solve_kappa(&ModelParams::default(), 1e-12).unwrap();
    let mut g = c.benchmark_group("kernel");
    g.sample_size(10);
    g.bench_function("table_256", |b| b.iter(|| build_kernel_table(&prof, 256, 1e-10).unwrap()));
    g.finish();
}

fn rings(c: &mut Criterion) {
    let k = SyntheticKernel::new(0.5, 1.0).unwrap();
    c.bench_function("solve_pattern_synthetic", |b| {
        b.iter(|| solve_pattern(&k, &RingLimits::default(), &RingTols::default()).unwrap())
    });
    c.bench_function("degenerate_build", |b| {
        b.iter(|| DegenerateConstruction::build(SyntheticKernel::new(0.5, 1.0).unwrap()).unwrap())
    });
}

fn pde(c: &mut Criterion) {
    let cfg = PdeConfig::new(ModelParams::default(), 200, 1e-2, 40.0, PdeModel::Full).unwrap();
    let base = PdeSolver::new(cfg).unwrap();
    c.bench_function("pde_100_steps_n200", |b| {
        b.iter(|| {
            let mut s = base.clone();
            for _ in 0..100 {
                s.step();
            }
            s
        })
    });
}

criterion_group!(benches, special_functions, kernels, rings, pde);
criterion_main!(benches);
