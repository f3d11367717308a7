use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use spnet_core::data::{synth_fingerprint, Point, SyntheticParams};
use spnet_core::ops::{conv2d, conv2d_backward, maxpool2d};
use spnet_core::poincare::{detect_singularities, BaselineParams};
use spnet_core::Tensor;

fn ramp(shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|i| ((i * 7919) % 1000) as f32 / 1000.0 - 0.5).collect()).unwrap()
}

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv2d_3x3");
    for (ch, h, w) in [(16, 64, 80), (32, 32, 40), (64, 16, 20)] {
        let x = ramp(&[1, ch, h, w]);
        let wt = ramp(&[ch, ch, 3, 3]);
        let b = Tensor::zeros(&[ch]);
        let id = format!("{ch}x{h}x{w}");
        group.bench_with_input(BenchmarkId::new("forward", &id), &(), |bench, _| {
            bench.iter(|| conv2d(black_box(&x), &wt, &b).unwrap())
        });
        let dy = ramp(&[1, ch, h, w]);
        group.bench_with_input(BenchmarkId::new("backward", &id), &(), |bench, _| {
            bench.iter(|| conv2d_backward(black_box(&x), &wt, &dy).unwrap())
        });
    }
    group.finish();
}

fn pooling(c: &mut Criterion) {
    let x = ramp(&[1, 32, 64, 80]);
    c.bench_function("maxpool2d 32x64x80", |b| b.iter(|| maxpool2d(black_box(&x)).unwrap()));
}

fn baseline(c: &mut Criterion) {
    let image = synth_fingerprint(&SyntheticParams::whorl(Point::new(64.0, 60.0), 0.05, 3), 128, 128)
        .unwrap()
        .image;
    let params = BaselineParams::default();
    c.bench_function("poincare baseline 128x128", |b| {
        b.iter(|| detect_singularities(black_box(&image), &params).unwrap())
    });
}

criterion_group!(benches, convolution, pooling, baseline);
criterion_main!(benches);
