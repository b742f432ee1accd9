use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sgv_bench::{frame, weight};
use sgv_core::classifier::{classifier_forward, loss_and_gradient, PixelClassifier, TrainFrame};
use sgv_core::mask::{gaussian_blur, squared_distance_transform};
use sgv_core::postprocess::{bilateral_filter, BilateralConfig};
use sgv_core::ProbMap;

const SIZES: [usize; 2] = [64, 128];

fn masks(c: &mut Criterion) {
    let mut g = c.benchmark_group("mask");
    for n in SIZES {
        let f = frame(n);
        let as_real = f.gt.to_real();
        g.bench_with_input(BenchmarkId::new("edt", n), &f.gt, |b, m| b.iter(|| squared_distance_transform(black_box(m))));
        g.bench_with_input(BenchmarkId::new("blur_sigma5", n), &as_real, |b, r| {
            b.iter(|| gaussian_blur(black_box(r), 5.0).unwrap())
        });
    }
    g.finish();
}

fn postprocess(c: &mut Criterion) {
    let mut g = c.benchmark_group("bilateral");
    for n in SIZES {
        let f = frame(n);
        let w = weight(&f.features);
        let p = ProbMap::new(w.width(), w.height(), w.values().to_vec()).unwrap();
        let guide = f.features.luminance();
        for (name, cfg) in [
            ("default", BilateralConfig::default()),
            ("desk", BilateralConfig { sigma_spatial: 2.0, sigma_range: 0.1, window_radius: 6 }),
        ] {
            g.bench_function(BenchmarkId::new(name, n), |b| {
                b.iter(|| bilateral_filter(black_box(&p), &guide, &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn classifier(c: &mut Criterion) {
    let mut g = c.benchmark_group("classifier");
    for n in SIZES {
        let f = frame(n);
        let params = PixelClassifier::init(f.features.dim(), 16, 0);
        let w = weight(&f.features);
        g.bench_function(BenchmarkId::new("forward", n), |b| {
            b.iter(|| classifier_forward(black_box(&f.features), &params).unwrap())
        });
        let tf = [TrainFrame { features: &f.features, gt: &f.gt, weight: &w }];
        g.bench_function(BenchmarkId::new("loss_and_gradient", n), |b| {
            b.iter(|| loss_and_gradient(black_box(&params), &tf, 1.0).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, masks, postprocess, classifier);
criterion_main!(benches);
