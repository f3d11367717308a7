use crate::tensor::{shape_err, Result, Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.max(T::zero()))
}

/// Adjoint of [`relu`], gated on the forward output (`output > 0`).
pub fn relu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same(output, grad_out, "relu_backward", |y, g| {
        if y > T::zero() {
            g
        } else {
            T::zero()
        }
    })
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Adjoint of [`sigmoid`] expressed through its output `y`: `g · y · (1 − y)`.
pub fn sigmoid_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same(output, grad_out, "sigmoid_backward", |y, g| g * y * (T::one() - y))
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_same(a, b, "add", |x, y| x + y)
}

fn zip_same<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    op: &str,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return shape_err(format!("{op}: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Tensor::from_vec(
        a.shape(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

/// Nearest-neighbour 2× upsampling: every pixel becomes a 2×2 block.
pub fn upsample_nearest2x<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims4()?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in input.data().chunks(h * w) {
        for row in plane.chunks(w) {
            for _ in 0..2 {
                for &v in row {
                    out.push(v);
                    out.push(v);
                }
            }
        }
    }
    Tensor::from_vec(&[n, c, oh, ow], out)
}

/// Adjoint of [`upsample_nearest2x`]: sums each 2×2 block.
pub fn upsample_nearest2x_backward<T: Scalar>(grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, oh, ow] = grad_out.dims4()?;
    if oh % 2 != 0 || ow % 2 != 0 {
        return shape_err(format!("upsample adjoint needs even dims, got {oh}×{ow}"));
    }
    let (h, w) = (oh / 2, ow / 2);
    let mut out = Tensor::zeros(&[n, c, h, w]);
    let g = grad_out.data();
    for (p, plane) in out.data_mut().chunks_mut(h * w).enumerate() {
        let base = p * oh * ow;
        for y in 0..h {
            for x in 0..w {
                let tl = base + 2 * y * ow + 2 * x;
                plane[y * w + x] = g[tl] + g[tl + 1] + g[tl + ow] + g[tl + ow + 1];
            }
        }
    }
    Ok(out)
}

/// Concatenates along the channel axis, `a`'s channels first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, ca, h, w] = a.dims4()?;
    let [nb, cb, hb, wb] = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return shape_err(format!(
            "concat_channels: {:?} vs {:?}",
            a.shape(),
            b.shape()
        ));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    for s in 0..n {
        out.extend_from_slice(a.sample(s));
        out.extend_from_slice(b.sample(s));
    }
    Tensor::from_vec(&[n, ca + cb, h, w], out)
}

/// Adjoint of [`concat_channels`]: splits a gradient after the first `ca` channels.
pub fn split_channels<T: Scalar>(grad: &Tensor<T>, ca: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = grad.dims4()?;
    if ca == 0 || ca >= c {
        return shape_err(format!("split_channels: cannot split {c} channels at {ca}"));
    }
    let cut = ca * h * w;
    let mut a = Vec::with_capacity(n * cut);
    let mut b = Vec::with_capacity(grad.len() - n * cut);
    for s in 0..n {
        let (x, y) = grad.sample(s).split_at(cut);
        a.extend_from_slice(x);
        b.extend_from_slice(y);
    }
    Ok((
        Tensor::from_vec(&[n, ca, h, w], a)?,
        Tensor::from_vec(&[n, c - ca, h, w], b)?,
    ))
}
