use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mlsort::ams::{ams_sort, AmsParams};
use mlsort::experiment::{generate_input, Algorithm, ExperimentConfig};
use mlsort::fastsort::fast_rank_sort;
use mlsort::multiselect::multiselect_many;
use mlsort::rlm::{rlm_sort, LevelPlan};
use mlsort::{CostParams, DeliveryScheme, Element, Network, PeGroup, PseudorandomPermutation, SeedSpec};

fn input(p: usize, n_per_pe: usize) -> Vec<Vec<Element>> {
    let config = ExperimentConfig {
        algorithm: Algorithm::Ams,
        p,
        n_per_pe,
        ..ExperimentConfig::default()
    };
    generate_input(&config, 0).expect("valid config")
}

fn cost() -> CostParams {
    CostParams::new(100.0, 1.0)
}

fn feistel(c: &mut Criterion) {
    let mut g = c.benchmark_group("feistel_images");
    for n in [1_000u64, 100_000] {
        let perm = PseudorandomPermutation::new(n, &SeedSpec::new(1, "bench")).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &perm, |b, perm| {
            b.iter(|| black_box(perm.images()))
        });
    }
    g.finish();
}

fn selection(c: &mut Criterion) {
    let p = 64;
    let mut data = input(p, 1000);
    for v in &mut data {
        v.sort_unstable();
    }
    let n = (p * 1000) as u64;
    let ranks: Vec<u64> = (1..8).map(|i| i * n / 8).collect();
    let group = PeGroup::all(p);
    c.bench_function("multiselect_many/p64", |b| {
        b.iter(|| {
            let mut net = Network::new(p, cost());
            black_box(multiselect_many(&mut net, &group, &data, &ranks, &SeedSpec::new(1, "sel")).unwrap())
        })
    });
}

fn fast_rank(c: &mut Criterion) {
    let p = 256;
    let data = input(p, 4);
    let group = PeGroup::all(p);
    c.bench_function("fast_rank_sort/p256", |b| {
        b.iter(|| {
            let mut net = Network::new(p, cost());
            black_box(fast_rank_sort(&mut net, &group, &data, 4).unwrap())
        })
    });
}

fn sorts(c: &mut Criterion) {
    let mut g = c.benchmark_group("sort");
    g.sample_size(20);
    let p = 64;
    let data = input(p, 2000);
    let seed = SeedSpec::new(1, "algo");
    for scheme in [DeliveryScheme::Deterministic, DeliveryScheme::Randomized] {
        let plan = LevelPlan::new(vec![8, 8], p).unwrap();
        g.bench_with_input(BenchmarkId::new("rlm", scheme), &scheme, |b, &scheme| {
            b.iter(|| black_box(rlm_sort(data.clone(), &plan, scheme, &seed, cost()).unwrap()))
        });
        let params = AmsParams::new(vec![8, 8], 3.0, 16, 0.1).unwrap();
        g.bench_with_input(BenchmarkId::new("ams", scheme), &scheme, |b, &scheme| {
            b.iter(|| black_box(ams_sort(data.clone(), &params, scheme, &seed, cost()).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, feistel, selection, fast_rank, sorts);
criterion_main!(benches);
