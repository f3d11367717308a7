use crate::tensor::{shape_err, Result, Scalar, Tensor};

/// Winning input offset of every 2×2 window, recorded for the adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    /// Flat index into the input for each output element.
    argmax: Vec<u32>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// 2×2 max-pooling with stride 2.
///
/// Ties resolve to the first element in row-major scan order of the window.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let [n, c, h, w] = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return shape_err(format!("maxpool2d needs even spatial dims, got {h}×{w}"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let x = input.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let mut best = top;
                for cand in [top + 1, top + w, top + w + 1] {
                    if x[cand] > x[best] {
                        best = cand;
                    }
                }
                out.push(x[best]);
                argmax.push(best as u32);
            }
        }
    }
    Ok((
        Tensor::from_vec(&[n, c, oh, ow], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each output gradient to the input position that won its window.
pub fn maxpool2d_backward<T: Scalar>(indices: &PoolIndices, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != indices.argmax.len() {
        return shape_err(format!(
            "maxpool2d_backward: {} gradients for {} windows",
            grad_out.len(),
            indices.argmax.len()
        ));
    }
    let mut gx = Tensor::zeros(&indices.input_shape);
    let g = gx.data_mut();
    for (&i, &v) in indices.argmax.iter().zip(grad_out.data()) {
        g[i as usize] = g[i as usize] + v;
    }
    Ok(gx)
}
