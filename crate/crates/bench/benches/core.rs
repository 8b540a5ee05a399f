use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddpgp_bench::{study1_sampler, study3_fit};
use ddpgp_core::kernel::{chol_spd, covariance_matrix};
use ddpgp_core::regime::{g_mean_survival, GcompOptions};
use ddpgp_core::rng::stream;
use ddpgp_core::KernelConfig;

fn covariance(c: &mut Criterion) {
    let mut group = c.benchmark_group("covariance");
    for n in [100, 200, 400] {
        let x = study1_sampler(n, 1).context().expect("records").x.clone();
        group.bench_with_input(BenchmarkId::new("build_and_factor", n), &x, |b, x| {
            b.iter(|| chol_spd(&covariance_matrix(x, &KernelConfig::default()).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn gibbs_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_sweep");
    for n in [100, 200] {
        let sampler = study1_sampler(n, 2);
        let mut rng = stream(3, &[]);
        let mut state = sampler.init_state(&mut rng).unwrap();
        for it in 1..=50 {
            sampler.sweep(&mut state, it, &mut rng).unwrap();
        }
        let mut it = 50;
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                it += 1;
                sampler.sweep(&mut state, it, &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

fn g_computation(c: &mut Criterion) {
    let (g, models, base) = study3_fit(200, 4);
    let regime = g.regime_menu()[0].clone();
    let opts = GcompOptions {
        n_paths: 1,
        max_draws: Some(10),
        seed: 5,
    };
    c.bench_function("g_mean_survival/200x10", |b| {
        b.iter(|| g_mean_survival(&g, &models, &regime, &base, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = covariance, gibbs_sweep, g_computation
}
criterion_main!(benches);
