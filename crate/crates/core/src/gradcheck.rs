//! Finite-difference verification of the kernel adjoints.
//!
//! The scalar objective is `L = Σ f(inputs) ⊙ R` for a seeded random
//! projection `R`, accumulated in `f64`. Every partial derivative produced
//! by the adjoint (fed `R` as the upstream gradient) is compared against a
//! central difference of `L`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::loss::{bce_loss, mse_loss};
use crate::ops;
use crate::tensor::{Scalar, Tensor};

/// Arithmetic used while checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Production arithmetic; finite-difference step `1e-3`.
    F32,
    /// Verification arithmetic; finite-difference step `1e-6`.
    F64,
}

impl Precision {
    pub fn step(self) -> f64 {
        match self {
            Precision::F32 => 1e-3,
            Precision::F64 => 1e-6,
        }
    }

    /// Acceptance bound on the maximum relative error.
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::F32 => 1e-2,
            Precision::F64 => 1e-5,
        }
    }
}

/// Gradient magnitudes below this are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1.0;

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// The differentiable kernels covered by [`grad_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckedOp {
    Conv2d,
    TransposedConv2d,
    MaxPool2d,
    Relu,
    Sigmoid,
    Dense,
    ConcatChannels,
    UpsampleNearest2x,
    Add,
    BceLoss,
    MseLoss,
}

impl CheckedOp {
    pub const ALL: [CheckedOp; 11] = [
        CheckedOp::Conv2d,
        CheckedOp::TransposedConv2d,
        CheckedOp::MaxPool2d,
        CheckedOp::Relu,
        CheckedOp::Sigmoid,
        CheckedOp::Dense,
        CheckedOp::ConcatChannels,
        CheckedOp::UpsampleNearest2x,
        CheckedOp::Add,
        CheckedOp::BceLoss,
        CheckedOp::MseLoss,
    ];
}

type Forward<T> = Box<dyn Fn(&[Tensor<T>]) -> Tensor<T>>;
type Backward<T> = Box<dyn Fn(&[Tensor<T>], &Tensor<T>) -> Vec<Tensor<T>>>;

/// Compares adjoint gradients of `forward` against central differences.
///
/// `backward` returns gradients for a prefix of `inputs`; inputs beyond it
/// (e.g. loss targets) are treated as constants. Returns the maximum
/// [`relative_error`] over all checked elements.
pub fn check_gradients<T: Scalar>(
    inputs: &[Tensor<T>],
    forward: impl Fn(&[Tensor<T>]) -> Tensor<T>,
    backward: impl Fn(&[Tensor<T>], &Tensor<T>) -> Vec<Tensor<T>>,
    seed: u64,
    step: f64,
) -> f64 {
    let out = forward(inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_9ad);
    let projection: Vec<f64> = (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upstream = Tensor::from_vec(
        out.shape(),
        projection.iter().map(|&r| T::from_f64(r)).collect(),
    )
    .expect("projection matches output shape");
    // Use the rounded projection in the objective so both sides see the same R.
    let r: Vec<f64> = upstream.data().iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
    let objective = |xs: &[Tensor<T>]| -> f64 {
        forward(xs)
            .data()
            .iter()
            .zip(&r)
            .map(|(y, r)| y.to_f64().unwrap_or(f64::NAN) * r)
            .sum()
    };

    let analytic = backward(inputs, &upstream);
    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (slot, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.shape(), inputs[slot].shape(), "adjoint shape for input {slot}");
        for i in 0..inputs[slot].len() {
            let x = inputs[slot].data()[i];
            let x_hi = x + T::from_f64(step);
            let x_lo = x - T::from_f64(step);
            probe[slot].data_mut()[i] = x_hi;
            let f_hi = objective(&probe);
            probe[slot].data_mut()[i] = x_lo;
            let f_lo = objective(&probe);
            probe[slot].data_mut()[i] = x;
            // Divide by the perturbation actually representable in T.
            let h = (x_hi - x_lo).to_f64().unwrap_or(2.0 * step);
            let numeric = (f_hi - f_lo) / h;
            let a = grad.data()[i].to_f64().unwrap_or(f64::NAN);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    worst
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Uniform values kept at least `gap` away from zero (ReLU's kink).
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Distinct, well-separated values in random order so no pooling window has a near-tie.
fn shuffled_levels(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut levels: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    for i in (1..n).rev() {
        levels.swap(i, rng.gen_range(0..=i));
    }
    Tensor::from_vec(shape, levels).unwrap()
}

fn case<T: Scalar>(op: CheckedOp, seed: u64) -> (Vec<Tensor<T>>, Forward<T>, Backward<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let (inputs, fwd, bwd): (Vec<Tensor<f64>>, Forward<T>, Backward<T>) = match op {
        CheckedOp::Conv2d => (
            vec![
                uniform(rng, &[1, 2, 6, 6], -1.0, 1.0),
                uniform(rng, &[3, 2, 3, 3], -1.0, 1.0),
                uniform(rng, &[3], -1.0, 1.0),
            ],
            Box::new(|x| ops::conv2d(&x[0], &x[1], &x[2]).unwrap()),
            Box::new(|x, g| {
                let gr = ops::conv2d_backward(&x[0], &x[1], g).unwrap();
                vec![gr.input, gr.weight, gr.bias]
            }),
        ),
        CheckedOp::TransposedConv2d => (
            vec![
                uniform(rng, &[1, 2, 3, 3], -1.0, 1.0),
                uniform(rng, &[2, 2, 3, 3], -1.0, 1.0),
                uniform(rng, &[2], -1.0, 1.0),
            ],
            Box::new(|x| ops::transposed_conv2d(&x[0], &x[1], &x[2]).unwrap()),
            Box::new(|x, g| {
                let gr = ops::transposed_conv2d_backward(&x[0], &x[1], g).unwrap();
                vec![gr.input, gr.weight, gr.bias]
            }),
        ),
        CheckedOp::MaxPool2d => (
            vec![shuffled_levels(rng, &[1, 2, 4, 4])],
            Box::new(|x| ops::maxpool2d(&x[0]).unwrap().0),
            Box::new(|x, g| {
                let (_, idx) = ops::maxpool2d(&x[0]).unwrap();
                vec![ops::maxpool2d_backward(&idx, g).unwrap()]
            }),
        ),
        CheckedOp::Relu => (
            vec![away_from_zero(rng, &[1, 2, 3, 3], 0.05)],
            Box::new(|x| ops::relu(&x[0])),
            Box::new(|x, g| vec![ops::relu_backward(&ops::relu(&x[0]), g).unwrap()]),
        ),
        CheckedOp::Sigmoid => (
            vec![uniform(rng, &[2, 3, 2, 2], -3.0, 3.0)],
            Box::new(|x| ops::sigmoid(&x[0])),
            Box::new(|x, g| vec![ops::sigmoid_backward(&ops::sigmoid(&x[0]), g).unwrap()]),
        ),
        CheckedOp::Dense => (
            vec![
                uniform(rng, &[3, 5], -1.0, 1.0),
                uniform(rng, &[5, 4], -1.0, 1.0),
                uniform(rng, &[4], -1.0, 1.0),
            ],
            Box::new(|x| ops::dense(&x[0], &x[1], &x[2]).unwrap()),
            Box::new(|x, g| {
                let gr = ops::dense_backward(&x[0], &x[1], g).unwrap();
                vec![gr.input, gr.weight, gr.bias]
            }),
        ),
        CheckedOp::ConcatChannels => (
            vec![
                uniform(rng, &[1, 2, 3, 3], -1.0, 1.0),
                uniform(rng, &[1, 1, 3, 3], -1.0, 1.0),
            ],
            Box::new(|x| ops::concat_channels(&x[0], &x[1]).unwrap()),
            Box::new(|x, g| {
                let (a, b) = ops::split_channels(g, x[0].shape()[1]).unwrap();
                vec![a, b]
            }),
        ),
        CheckedOp::UpsampleNearest2x => (
            vec![uniform(rng, &[1, 2, 2, 3], -1.0, 1.0)],
            Box::new(|x| ops::upsample_nearest2x(&x[0]).unwrap()),
            Box::new(|_, g| vec![ops::upsample_nearest2x_backward(g).unwrap()]),
        ),
        CheckedOp::Add => (
            vec![
                uniform(rng, &[2, 3, 4], -1.0, 1.0),
                uniform(rng, &[2, 3, 4], -1.0, 1.0),
            ],
            Box::new(|x| ops::add(&x[0], &x[1]).unwrap()),
            Box::new(|_, g| vec![g.clone(), g.clone()]),
        ),
        CheckedOp::BceLoss => {
            let pred = uniform(rng, &[2, 2], 0.1, 0.9);
            let gt = uniform(rng, &[2, 2], 0.0, 1.0).map(|v| if v < 0.5 { 0.0 } else { 1.0 });
            (
                vec![pred, gt],
                Box::new(|x| Tensor::scalar(bce_loss(&x[0], &x[1]).unwrap().value)),
                Box::new(|x, g| {
                    let l = bce_loss(&x[0], &x[1]).unwrap();
                    vec![l.grad.map(|v| v * g.data()[0])]
                }),
            )
        }
        CheckedOp::MseLoss => (
            vec![
                uniform(rng, &[3, 2], -1.0, 1.0),
                uniform(rng, &[3, 2], -1.0, 1.0),
            ],
            Box::new(|x| Tensor::scalar(mse_loss(&x[0], &x[1]).unwrap().value)),
            Box::new(|x, g| {
                let l = mse_loss(&x[0], &x[1]).unwrap();
                vec![l.grad.map(|v| v * g.data()[0])]
            }),
        ),
    };
    (inputs.iter().map(Tensor::cast).collect(), fwd, bwd)
}

/// Maximum relative error between the adjoint of `op` and finite differences
/// on seeded random inputs of a small fixed shape.
pub fn grad_check(op: CheckedOp, seed: u64, precision: Precision) -> f64 {
    match precision {
        Precision::F32 => {
            let (inputs, f, b) = case::<f32>(op, seed);
            check_gradients(&inputs, f, b, seed, precision.step())
        }
        Precision::F64 => {
            let (inputs, f, b) = case::<f64>(op, seed);
            check_gradients(&inputs, f, b, seed, precision.step())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_op_is_exact() {
        assert!(grad_check(CheckedOp::Add, 0, Precision::F64) < 1e-9);
    }

    #[test]
    fn sigmoid_at_zero() {
        let x = Tensor::scalar(0.0f64);
        let h = 1e-6;
        let numeric: f64 = (ops::sigmoid(&Tensor::scalar(h)).data()[0]
            - ops::sigmoid(&Tensor::scalar(-h)).data()[0])
            / (2.0 * h);
        let analytic = ops::sigmoid_backward(&ops::sigmoid(&x), &Tensor::scalar(1.0)).unwrap();
        assert_eq!(analytic.data()[0], 0.25);
        assert!((numeric - 0.25).abs() < 1e-9);
    }

    #[test]
    fn conv_in_f32() {
        assert!(grad_check(CheckedOp::Conv2d, 1, Precision::F32) < 1e-2);
    }

    #[test]
    fn detects_a_wrong_adjoint() {
        let x = vec![Tensor::from_vec(&[3], vec![0.3f64, -0.2, 0.9]).unwrap()];
        let err = check_gradients(
            &x,
            |x| x[0].map(|v| v * v),
            |x, g| vec![Tensor::from_vec(&[3], x[0].data().iter().zip(g.data()).map(|(v, g)| 3.0 * v * g).collect()).unwrap()],
            0,
            1e-6,
        );
        assert!(err > 1e-2);
    }
}
