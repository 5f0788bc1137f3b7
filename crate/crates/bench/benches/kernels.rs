//! Timings for the kernels that dominate a pipeline run.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dei_core::econometrics::garch::{fit_model, simulate_returns, FitOptions, InnovationKind, MeanForm};
use dei_core::econometrics::{fit_nig, sample_nig};
use dei_core::factor::{ml_factor_fit, FactorOptions};
use dei_core::options::{price_options, simulate_risk_neutral};
use dei_core::portfolio::{mean_cvar_point, mean_variance_frontier};
use dei_core::simulate::sample_innovations;
use dei_core::{Innovation, MeanSpec, MvNigSpec, NigParams, PricingJob, PricingModel, VolFamily, VolSpec};
use nalgebra::DMatrix;

fn garch_series(n: usize) -> Vec<f64> {
    let mean = MeanSpec { form: MeanForm::Ma1, phi0: 0.0, theta1: 0.1 };
    let vol = VolSpec::Garch11 { alpha0: 0.1, alpha1: 0.1, beta1: 0.8 };
    simulate_returns(&mean, &vol, &Innovation::Normal, n, 500, 1)
}

/// `s × l` scenarios from a correlated NIG law.
fn scenarios(s: usize, l: usize) -> DMatrix<f64> {
    let m = NigParams::standardized(1.5, -0.3).unwrap();
    let corr = DMatrix::from_fn(l, l, |i, j| if i == j { 1.0 } else { 0.3 });
    let names = (0..l).map(|i| format!("A{i}")).collect();
    let spec = MvNigSpec::new(names, vec![m; l], corr).unwrap();
    let eps = sample_innovations(&spec, s, 3);
    DMatrix::from_fn(s, l, |i, j| 0.01 * (j + 1) as f64 + 0.05 * (1.0 + j as f64 / l as f64) * eps[(i, j)])
}

fn econometrics(c: &mut Criterion) {
    let xs = garch_series(1_000);
    let mut g = c.benchmark_group("econometrics");
    g.sample_size(10);
    g.bench_function("garch11 normal n=1000", |b| {
        b.iter(|| fit_model(&xs, VolFamily::Garch11, &FitOptions::default()).unwrap())
    });
    let nig = FitOptions { innovation: InnovationKind::Nig, ..Default::default() };
    g.bench_function("garch11 nig n=1000", |b| b.iter(|| fit_model(&xs, VolFamily::Garch11, &nig).unwrap()));
    let p = NigParams::new(2.0, 0.5, 1.0, 1.0).unwrap();
    let sample = sample_nig(&p, 10_000, 2);
    g.bench_function("fit_nig n=1e4", |b| b.iter(|| fit_nig(&sample).unwrap()));
    g.finish();
}

fn frontiers(c: &mut Criterion) {
    let sc = scenarios(10_000, 10);
    let mut g = c.benchmark_group("portfolio");
    g.sample_size(10);
    g.bench_function("mean-cvar point S=1e4 L=10", |b| b.iter(|| mean_cvar_point(&sc, 0.05, 0.5, true).unwrap()));
    let gammas: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    g.bench_function("mean-variance frontier 100 points", |b| {
        b.iter(|| mean_variance_frontier(&sc, &gammas, true).unwrap())
    });
    g.finish();
}

fn pricing(c: &mut Criterion) {
    let nig = NigParams::standardized(1.8, -0.3).unwrap();
    let model = PricingModel { alpha0: 0.002, alpha1: 0.1, beta1: 0.85, nig, lambda0: 0.05, a1: 0.03 };
    let job = PricingJob {
        model,
        s0: 100.0,
        rf: vec![0.02],
        maturities: vec![1, 2, 5],
        strikes: (0..21).map(|i| 60.0 + 4.0 * i as f64).collect(),
        n_paths: 10_000,
        seed: 1,
        antithetic: false,
    };
    let mut g = c.benchmark_group("options");
    g.sample_size(20);
    g.bench_function("risk-neutral paths N=1e4 T=5", |b| b.iter(|| simulate_risk_neutral(&job).unwrap()));
    let levels = simulate_risk_neutral(&job).unwrap();
    g.bench_function("surface 3x21 cells", |b| b.iter(|| price_options(&levels, &job).unwrap()));
    g.finish();
}

fn factors(c: &mut Criterion) {
    let x = scenarios(500, 10);
    let names: Vec<String> = (0..10).map(|i| format!("A{i}")).collect();
    let mut g = c.benchmark_group("factor");
    g.sample_size(10);
    g.bench_function("ml fit m=2 L=10", |b| {
        b.iter_batched(
            || names.clone(),
            |n| ml_factor_fit(&x, n, 2, &FactorOptions::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, econometrics, frontiers, pricing, factors);
criterion_main!(benches);
