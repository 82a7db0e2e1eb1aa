use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maqp_bench::{input, net, patches, placement, scene};
use maqp_core::glmbs::{adapt, insert_patch_in_hand, GlmbsConfig};
use maqp_core::hdpos::{composite, FrameAqpLoss};
use maqp_core::net::{backward_to_input, backward_to_params};

fn forward_composite(c: &mut Criterion) {
    let net = net();
    let mut group = c.benchmark_group("composite_forward");
    for side in [64, 224] {
        let s = scene(side);
        let x = input(&s);
        let p = patches(224);
        let pl = placement(side, 224);
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| net.forward(&composite(&x, &p, &pl.mask).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let net = net();
    let s = scene(64);
    let x = input(&s);
    let pl = placement(64, 224);
    let loss = FrameAqpLoss {
        mask: &pl.mask,
        alpha: 0.1,
        gamma: 0.5,
    };
    c.bench_function("input_gradient_64", |b| {
        b.iter(|| backward_to_input(&net, &x, &loss).unwrap())
    });
    c.bench_function("param_gradient_64", |b| {
        b.iter(|| backward_to_params(&net, &x, &s.gt.quality).unwrap())
    });
}

fn adaptation(c: &mut Criterion) {
    let net = net();
    let s = scene(64);
    let hand = s.hand_mask.clone().expect("synthetic scenes carry a hand");
    let base = insert_patch_in_hand(&s.frame, &patches(224), &hand).unwrap();
    let cfg = GlmbsConfig::default();
    c.bench_function("adapt_one_iteration_64", |b| {
        b.iter(|| adapt(&net, &base, &cfg).unwrap())
    });
}

criterion_group!(benches, forward_composite, backward, adaptation);
criterion_main!(benches);
