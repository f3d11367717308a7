use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spnet_core::data::{synth_fingerprint, Point, SyntheticParams};
use spnet_core::loss::bce_loss;
use spnet_core::nn::{Mln, Mrn, NetworkSpec, SpNet};
use spnet_core::train::make_gt_mask;
use spnet_core::Tensor;

fn batch(n: usize, h: usize, w: usize) -> Tensor {
    let images: Vec<Tensor> = (0..n)
        .map(|i| {
            let centre = Point::new(w as f64 / 2.0 + i as f64, h as f64 / 2.0);
            synth_fingerprint(&SyntheticParams::whorl(centre, 0.05, i as u64), h, w).unwrap().image
        })
        .collect();
    Tensor::stack(&images.iter().collect::<Vec<_>>()).unwrap()
}

fn desk_scale(c: &mut Criterion) {
    let spec = NetworkSpec::for_input(64, 80);
    let (mln, p1) = Mln::build(&spec, 0).unwrap();
    let (mrn, p2) = Mrn::build(&spec, 1).unwrap();
    let images = batch(4, 64, 80);
    let one = make_gt_mask(Point::new(40.0, 32.0), 64, 80, 5).unwrap();
    let masks = Tensor::stack(&[&one, &one, &one, &one]).unwrap();

    c.bench_function("mln forward 4x64x80", |b| b.iter(|| mln.forward(&p1, black_box(&images)).unwrap()));
    c.bench_function("mln forward+backward 4x64x80", |b| {
        b.iter(|| {
            let cache = mln.forward_train(&p1, black_box(&images)).unwrap();
            let loss = bce_loss(cache.mask(), &masks).unwrap();
            let mut grads = p1.zero_grads();
            mln.backward(&p1, &cache, &loss.grad, &mut grads).unwrap();
            grads
        })
    });
    let net = SpNet::stack(mln, p1, mrn, p2).unwrap();
    c.bench_function("stacked inference 4x64x80", |b| b.iter(|| net.forward(black_box(&images)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = desk_scale
}
criterion_main!(benches);
