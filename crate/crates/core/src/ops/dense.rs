use crate::tensor::{shape_err, Result, Scalar, Tensor};

/// Affine map `input · weight + bias` with `input: [N, F]`, `weight: [F, G]`.
pub fn dense<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, f] = input.dims2()?;
    let [wf, g] = weight.dims2()?;
    if wf != f || bias.shape() != [g] {
        return shape_err(format!(
            "dense: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        ));
    }
    let mut out = Vec::with_capacity(n * g);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    T::gemm(n, f, g, input.data(), false, weight.data(), false, T::one(), &mut out);
    Tensor::from_vec(&[n, g], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T: Scalar = f32> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let [n, f] = input.dims2()?;
    let [wf, g] = weight.dims2()?;
    if wf != f || grad_out.shape() != [n, g] {
        return shape_err(format!(
            "dense_backward: input {:?}, weight {:?}, grad {:?}",
            input.shape(),
            weight.shape(),
            grad_out.shape()
        ));
    }
    let mut gx = Tensor::zeros(&[n, f]);
    T::gemm(n, g, f, grad_out.data(), false, weight.data(), true, T::zero(), gx.data_mut());
    let mut gw = Tensor::zeros(&[f, g]);
    T::gemm(f, n, g, input.data(), true, grad_out.data(), false, T::zero(), gw.data_mut());
    let mut gb = Tensor::zeros(&[g]);
    for row in grad_out.data().chunks(g) {
        for (acc, &v) in gb.data_mut().iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
    Ok(DenseGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 4] = 1.0;
        }
        assert_eq!(dense(&x, &eye, &Tensor::zeros(&[3])).unwrap(), x);
    }

    #[test]
    fn hand_arithmetic() {
        let x = Tensor::from_vec(&[1, 2], vec![1.0f32, 1.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(dense(&x, &w, &Tensor::zeros(&[2])).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, f, g) = (3, 7, 5);
        let mut rand_t = |shape: &[usize]| {
            let len = shape.iter().product();
            Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()).unwrap()
        };
        let (x, w, b) = (rand_t(&[n, f]), rand_t(&[f, g]), rand_t(&[g]));
        let y = dense(&x, &w, &b).unwrap();
        for i in 0..n {
            for j in 0..g {
                let mut acc = b.data()[j];
                for k in 0..f {
                    acc += x.data()[i * f + k] * w.data()[k * g + j];
                }
                assert!((y.data()[i * g + j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_rank_and_width_mismatch() {
        let x = Tensor::<f32>::zeros(&[1, 3]);
        assert!(dense(&x, &Tensor::zeros(&[2, 2]), &Tensor::zeros(&[2])).is_err());
        assert!(dense(&Tensor::<f32>::zeros(&[1, 1, 3]), &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[2])).is_err());
    }
}
