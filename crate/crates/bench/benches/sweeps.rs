use criterion::{criterion_group, criterion_main, Criterion};
use lapcert::experiments::{run_sweep, Grid};
use lapcert::{Experiment, SweepConfig};

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);

    let mut sbm = SweepConfig::new(Experiment::Sbm, Grid::single(200.0), 20, 42);
    sbm.alpha = Some("4,10".parse().unwrap());
    sbm.beta = Some(Grid::single(1.0));
    group.bench_function("sbm_n200", |b| b.iter(|| run_sweep(&sbm).unwrap()));

    let mut er = SweepConfig::new(Experiment::Er, Grid::single(500.0), 20, 42);
    er.rho = Some("0.5,1.5".parse().unwrap());
    group.bench_function("er_n500_spectral", |b| b.iter(|| run_sweep(&er).unwrap()));
    er.spectral = false;
    group.bench_function("er_n500_unionfind", |b| b.iter(|| run_sweep(&er).unwrap()));

    let mut z2 = SweepConfig::new(Experiment::Z2gauss, Grid::single(200.0), 20, 42);
    z2.sigma_scale = Some("0.5,2".parse().unwrap());
    group.bench_function("z2gauss_n200", |b| b.iter(|| run_sweep(&z2).unwrap()));
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
