use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pssr_core::degradation::{build_catalog, distorted_version, CatalogConfig};
use pssr_core::quality::{block_match_disparity, ssim, Polarity};
use pssr_core::rankmos::{merge, NormScope, VoteTable};
use pssr_core::rng::SplitMix64;
use pssr_core::srqa_net::{qa_forward, QAConfig, QAModel};
use pssr_core::stereo_image::gen_scene;
use pssr_core::{Graph, Tensor};

fn conv2d(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d");
    let mut rng = SplitMix64::new(1);
    for &(cin, cout, side) in &[(3usize, 16usize, 120usize), (16, 32, 60), (32, 64, 30)] {
        let x = Tensor::randn(&[4, cin, side, side], 1.0, &mut rng);
        let w = Tensor::randn(&[cout, cin, 3, 3], 0.1, &mut rng);
        let b = Tensor::zeros(&[cout]);
        let id = format!("{cin}->{cout}@{side}");
        group.bench_function(BenchmarkId::new("forward", &id), |bch| {
            bch.iter(|| {
                let mut g = Graph::new();
                let (xv, wv, bv) = (g.constant(x.clone()), g.param(w.clone()), g.param(b.clone()));
                black_box(g.conv2d(xv, wv, bv, 2, 1).unwrap())
            })
        });
        group.bench_function(BenchmarkId::new("forward_backward", &id), |bch| {
            bch.iter(|| {
                let mut g = Graph::new();
                let (xv, wv, bv) = (g.param(x.clone()), g.param(w.clone()), g.param(b.clone()));
                let y = g.conv2d(xv, wv, bv, 2, 1).unwrap();
                let t = g.constant(Tensor::zeros(g.shape(y)));
                let l = g.mse(y, t).unwrap();
                g.backward(l).unwrap();
                black_box(l)
            })
        });
    }
    group.finish();
}

fn qa(c: &mut Criterion) {
    let model = QAModel::new(QAConfig::default(), 3).unwrap();
    let pair = gen_scene(5, 120, 120, 6, 8).unwrap();
    c.bench_function("qa_forward/120", |b| b.iter(|| black_box(qa_forward(&model, &pair).unwrap().y)));
}

fn quality(c: &mut Criterion) {
    let pair = gen_scene(9, 120, 120, 6, 8).unwrap();
    let cat = build_catalog(&CatalogConfig::default()).unwrap();
    let v = distorted_version(&pair, &cat.spec_for(0, 13)).unwrap();
    c.bench_function("ssim/120", |b| b.iter(|| black_box(ssim(&pair.left, &v.left).unwrap())));
    c.bench_function("block_match/120", |b| {
        b.iter(|| black_box(block_match_disparity(&v, 7, 16).unwrap()))
    });
}

fn rankmos(c: &mut Criterion) {
    let mut group = c.benchmark_group("rankmos_merge");
    for &(n_refs, n_versions) in &[(8usize, 27usize), (64, 51)] {
        let mut rng = SplitMix64::new(11);
        let raw: Vec<f64> = (0..n_refs * n_versions * 3).map(|_| rng.next_f64()).collect();
        let voters = vec![
            ("a".to_string(), Polarity::HigherBetter),
            ("b".to_string(), Polarity::HigherBetter),
            ("c".to_string(), Polarity::LowerBetter),
        ];
        let table = VoteTable::from_raw(n_refs, n_versions, voters, raw).unwrap();
        group.bench_function(BenchmarkId::from_parameter(format!("{n_refs}x{n_versions}")), |b| {
            b.iter(|| black_box(merge(&table, NormScope::PerReference).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, conv2d, qa, quality, rankmos);
criterion_main!(benches);
