use std::hint::black_box;

use calvalid::gof::{dap_test, ks_test, sw_test};
use calvalid::sim::standard_normal_samples;
use calvalid::{fit_model, fit_noise, residuals, validate_set, FitConfig, IrlsConfig, ValidateConfig};
use calvalid_bench::{near_set, records};
use criterion::{criterion_group, criterion_main, Criterion};

fn geometry(c: &mut Criterion) {
    let set = near_set();
    c.bench_function("residuals_225", |b| {
        b.iter(|| residuals(black_box(&set.truth), black_box(&set.corrs)).unwrap())
    });
}

fn noise(c: &mut Criterion) {
    let set = near_set();
    let eps = residuals(&set.truth, &set.corrs).unwrap();
    let cfg = IrlsConfig::default();
    c.bench_function("fit_noise_irls", |b| {
        b.iter(|| fit_noise(black_box(&eps), black_box(&set.scales), &cfg).unwrap())
    });
}

fn gof(c: &mut Criterion) {
    let z = standard_normal_samples(1000, 1);
    let mut g = c.benchmark_group("gof_n1000");
    g.bench_function("ks", |b| b.iter(|| ks_test(black_box(&z), 0.05).unwrap()));
    g.bench_function("dap", |b| b.iter(|| dap_test(black_box(&z), 0.05).unwrap()));
    g.bench_function("sw", |b| b.iter(|| sw_test(black_box(&z), 0.05).unwrap()));
    g.finish();
}

fn fit(c: &mut Criterion) {
    let set = near_set();
    let recs = records(&set);
    let cfg = FitConfig::default();
    let mut g = c.benchmark_group("fit");
    g.sample_size(20);
    g.bench_function("fit_model_d3", |b| {
        b.iter(|| fit_model(black_box(&set.corrs), &cfg, None).unwrap())
    });
    g.bench_function("fit_model_d3_from_truth", |b| {
        b.iter(|| fit_model(black_box(&set.corrs), &cfg, Some(&set.truth)).unwrap())
    });
    let vcfg = ValidateConfig::default();
    g.bench_function("validate_set", |b| {
        b.iter(|| validate_set("near", &set.truth, black_box(&recs), &vcfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, geometry, noise, gof, fit);
criterion_main!(benches);
