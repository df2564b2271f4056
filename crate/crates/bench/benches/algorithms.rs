use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sfuda_bench::shifted_pair;
use sfuda_core::align::{initial_prototypes, spherical_kmeans, Initialization, KMeansConfig};
use sfuda_core::io::sfdk::{decode, encode};
use sfuda_core::probing::{fit_multinomial, FitConfig};
use sfuda_core::shot_lite::{shot_lite_fit, ShotConfig};

fn probing(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_multinomial");
    group.sample_size(10);
    for dim in [16, 64] {
        let (source, _) = shifted_pair(10, dim, 50);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &source, |b, s| {
            b.iter(|| fit_multinomial(black_box(s), &FitConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn kmeans(c: &mut Criterion) {
    let (source, target) = shifted_pair(10, 64, 100);
    let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
    let init =
        initial_prototypes(Initialization::MrWeights, &source, Some(&clf), target.features()).unwrap();
    c.bench_function("spherical_kmeans/1000x64", |b| {
        b.iter(|| spherical_kmeans(black_box(&init), target.features(), &KMeansConfig::default()).unwrap())
    });
}

fn shot(c: &mut Criterion) {
    let (source, target) = shifted_pair(5, 16, 40);
    let clf = fit_multinomial(&source, &FitConfig::default()).unwrap();
    let mut group = c.benchmark_group("shot_lite_fit");
    group.sample_size(10);
    group.bench_function("200x16", |b| {
        b.iter(|| shot_lite_fit(&clf, black_box(target.features()), &ShotConfig::default()).unwrap())
    });
    group.finish();
}

fn sfdk(c: &mut Criterion) {
    let (source, _) = shifted_pair(10, 256, 100);
    let bytes = encode(&source).unwrap();
    c.bench_function("sfdk/encode/1000x256", |b| b.iter(|| encode(black_box(&source)).unwrap()));
    c.bench_function("sfdk/decode/1000x256", |b| b.iter(|| decode(black_box(&bytes)).unwrap()));
}

criterion_group!(benches, probing, kmeans, shot, sfdk);
criterion_main!(benches);
