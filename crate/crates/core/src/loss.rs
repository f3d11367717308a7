//! Training objectives: pixel-wise binary cross-entropy for masks and
//! mean squared coordinate distance for regression.

use crate::tensor::{shape_err, Result, Scalar, Tensor};

/// Probabilities are clamped into `[BCE_EPSILON, 1 − BCE_EPSILON]` before taking logs.
pub const BCE_EPSILON: f64 = 1e-7;

/// A scalar loss and its gradient w.r.t. the prediction.
#[derive(Debug, Clone)]
pub struct LossValue<T: Scalar = f32> {
    pub value: T,
    pub grad: Tensor<T>,
}

/// Mean binary cross-entropy over every element of `pred` against a binary `gt`.
///
/// For an `h×w` mask this is `−1/(h·w) · Σ [gt·ln p + (1−gt)·ln(1−p)]`; for a
/// batch the mean runs over all pixels of all images, which equals the mean
/// of the per-image losses.
pub fn bce_loss<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<LossValue<T>> {
    if pred.shape() != gt.shape() {
        return shape_err(format!("bce_loss: pred {:?} vs gt {:?}", pred.shape(), gt.shape()));
    }
    let n = pred.len() as f64;
    let eps = T::from_f64(BCE_EPSILON);
    let hi = T::one() - eps;
    let scale = T::from_f64(1.0 / n);
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let p = p.max(eps).min(hi);
        let (pf, gf) = (p.to_f64().unwrap_or(0.5), g.to_f64().unwrap_or(0.0));
        total -= gf * pf.ln() + (1.0 - gf) * (1.0 - pf).ln();
        grad.push((p - g) / (p * (T::one() - p)) * scale);
    }
    Ok(LossValue {
        value: T::from_f64((total / n).max(0.0)),
        grad: Tensor::from_vec(pred.shape(), grad)?,
    })
}

/// Mean over samples of the squared Euclidean distance between rows of
/// `pred` and `gt` (both `[n, d]`).
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<LossValue<T>> {
    let [n, _] = pred.dims2()?;
    if pred.shape() != gt.shape() {
        return shape_err(format!("mse_loss: pred {:?} vs gt {:?}", pred.shape(), gt.shape()));
    }
    let mut total = 0.0f64;
    let two_over_n = T::from_f64(2.0 / n as f64);
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let d = p - g;
        let df = d.to_f64().unwrap_or(f64::NAN);
        total += df * df;
        grad.push(d * two_over_n);
    }
    Ok(LossValue {
        value: T::from_f64(total / n as f64),
        grad: Tensor::from_vec(pred.shape(), grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_uniform_uncertainty_is_ln2() {
        let pred = Tensor::full(&[4, 5], 0.5f32);
        for bits in [0.0f32, 1.0] {
            let gt = Tensor::full(&[4, 5], bits);
            let l = bce_loss(&pred, &gt).unwrap();
            assert!((l.value as f64 - std::f64::consts::LN_2).abs() < 1e-6);
        }
    }

    #[test]
    fn bce_perfect_prediction_is_near_zero() {
        let gt = Tensor::from_vec(&[2, 2], vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        let l = bce_loss(&gt, &gt).unwrap();
        assert!(l.value <= -(1.0 - BCE_EPSILON).ln() + 1e-12);
    }

    #[test]
    fn bce_worked_example() {
        let gt = Tensor::from_vec(&[2, 2], vec![1.0f32, 0.0, 0.0, 1.0]).unwrap();
        let pred = Tensor::from_vec(&[2, 2], vec![0.9f32, 0.1, 0.2, 0.8]).unwrap();
        let l = bce_loss(&pred, &gt).unwrap();
        let expected = -0.5 * (0.9f64.ln() + 0.8f64.ln());
        assert!((l.value as f64 - expected).abs() < 1e-6);
        assert!((expected - 0.16425).abs() < 1e-5);
    }

    #[test]
    fn bce_rejects_mismatch() {
        assert!(bce_loss(&Tensor::<f32>::zeros(&[2, 2]), &Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn mse_cases() {
        let z = Tensor::from_vec(&[1, 2], vec![0.0f32, 0.0]).unwrap();
        let p = Tensor::from_vec(&[1, 2], vec![3.0f32, 4.0]).unwrap();
        assert_eq!(mse_loss(&p, &z).unwrap().value, 25.0);
        assert_eq!(mse_loss(&p, &p).unwrap().value, 0.0);
        let p = Tensor::from_vec(&[2, 2], vec![3.0f32, 4.0, 6.0, 8.0]).unwrap();
        let z = Tensor::zeros(&[2, 2]);
        assert_eq!(mse_loss(&p, &z).unwrap().value, 62.5);
        assert!(mse_loss(&p, &Tensor::zeros(&[1, 2])).is_err());
    }
}
