use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heatsource_core::assimilation::{run_replicates, run_replicates_sequential, WindowForward};
use heatsource_core::bayes::{ForwardMap, PriorSpec};
use heatsource_core::config::preset;
use heatsource_core::geometry::SourceKind;
use heatsource_core::heat::{HeatSolver, HeatState, PolarGrid, SolverConfig};
use heatsource_core::par;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn replicates(c: &mut Criterion) {
    let mut cfg = preset("circle-desk").unwrap();
    cfg.sampler.n_total = 300;
    cfg.sampler.k0 = 100;
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for n in [2, 4] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| run_replicates(&cfg, n))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| run_replicates_sequential(&cfg, n))
        });
    }
    group.finish();
}

fn forward_batch(c: &mut Criterion) {
    let grid = PolarGrid::new(33, 36).unwrap();
    let solver = HeatSolver::new(grid);
    let restart = HeatState::zeros(grid);
    let fwd = WindowForward {
        solver: &solver,
        kind: SourceKind::Star { harmonics: 2 },
        restart: &restart,
        cfg: SolverConfig { dt: 0.01, b: 10.0 },
        t_end: 0.5,
        sensors: vec![11, 5],
    };
    let prior = PriorSpec::star(2);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut batch: Vec<Vec<f64>> = (0..64).map(|_| prior.sample(&mut rng)).collect();
    for xi in &mut batch {
        xi[0] = 1.0;
        for v in &mut xi[1..] {
            *v *= 0.2;
        }
    }
    let mut group = c.benchmark_group("forward_batch_64");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| par::map_slice(&batch, |xi| fwd.evaluate(xi)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_slice_sequential(&batch, |xi| fwd.evaluate(xi)))
    });
    group.finish();
}

criterion_group!(benches, replicates, forward_batch);
criterion_main!(benches);
