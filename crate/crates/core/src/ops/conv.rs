//! Same-padded convolution and stride-2 transposed convolution.
//!
//! Both are lowered to GEMM through an im2col buffer. The batch loop is
//! sequential and every parameter gradient is accumulated sample by sample
//! in batch order, so results are bit-reproducible.

use crate::tensor::{shape_err, Result, Scalar, Tensor};

/// Geometry of one sliding-window pass over a single `C×H×W` image.
#[derive(Debug, Clone, Copy)]
struct Window {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Window {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Input index touched by output position `o` at kernel tap `k`, if in bounds.
    #[inline]
    fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let i = (o * stride + k) as isize - pad as isize;
        (i >= 0 && (i as usize) < extent).then_some(i as usize)
    }

    /// Range of output positions whose tap `k` stays inside `[0, extent)`.
    #[inline]
    fn valid_outputs(&self, k: usize, extent: usize, out: usize) -> (usize, usize) {
        let lo = (self.pad.saturating_sub(k) + self.stride - 1) / self.stride;
        let hi = ((extent + self.pad).saturating_sub(k) + self.stride - 1) / self.stride;
        (lo.min(out), hi.min(out))
    }

    fn im2col<T: Scalar>(&self, input: &[T], cols: &mut [T]) {
        let k = self.kernel;
        let ncols = self.cols();
        cols.fill(T::zero());
        for c in 0..self.channels {
            let plane = &input[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * ncols..(row + 1) * ncols];
                    let (x0, x1) = self.valid_outputs(kx, self.width, self.out_w);
                    for oy in 0..self.out_h {
                        let Some(iy) = Self::source(oy, ky, self.stride, self.pad, self.height)
                        else {
                            continue;
                        };
                        let src_row = &plane[iy * self.width..(iy + 1) * self.width];
                        let dst_row = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if x1 <= x0 {
                            continue;
                        }
                        if self.stride == 1 {
                            let ix0 = x0 + kx - self.pad;
                            dst_row[x0..x1].copy_from_slice(&src_row[ix0..ix0 + (x1 - x0)]);
                        } else {
                            for ox in x0..x1 {
                                dst_row[ox] = src_row[ox * self.stride + kx - self.pad];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Window::im2col`]: scatter-adds columns back into `out`.
    fn col2im<T: Scalar>(&self, cols: &[T], out: &mut [T]) {
        let k = self.kernel;
        let ncols = self.cols();
        for c in 0..self.channels {
            let plane =
                &mut out[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * ncols..(row + 1) * ncols];
                    let (x0, x1) = self.valid_outputs(kx, self.width, self.out_w);
                    for oy in 0..self.out_h {
                        let Some(iy) = Self::source(oy, ky, self.stride, self.pad, self.height)
                        else {
                            continue;
                        };
                        let dst_row = &mut plane[iy * self.width..(iy + 1) * self.width];
                        let src_row = &src[oy * self.out_w..(oy + 1) * self.out_w];
                        for ox in x0..x1 {
                            let ix = ox * self.stride + kx - self.pad;
                            dst_row[ix] = dst_row[ix] + src_row[ox];
                        }
                    }
                }
            }
        }
    }
}

fn conv_kernel(weight: &Tensor<impl Scalar>) -> Result<[usize; 3]> {
    let [co, ci, kh, kw] = weight.dims4()?;
    if kh != kw || kh % 2 == 0 {
        return shape_err(format!("conv kernel must be odd and square, got {kh}×{kw}"));
    }
    Ok([co, ci, kh])
}

fn check_bias<T: Scalar>(bias: &Tensor<T>, channels: usize) -> Result<()> {
    if bias.shape() != [channels] {
        return shape_err(format!(
            "bias shape {:?} does not match {channels} output channels",
            bias.shape()
        ));
    }
    Ok(())
}

fn add_channel_bias<T: Scalar>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_mut(plane).zip(bias) {
        for v in chunk {
            *v = *v + b;
        }
    }
}

fn accumulate_channel_sums<T: Scalar>(grad: &[T], into: &mut [T], plane: usize) {
    for (chunk, acc) in grad.chunks(plane).zip(into.iter_mut()) {
        *acc = *acc + chunk.iter().copied().sum::<T>();
    }
}

/// Gradients returned by the convolution adjoints.
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar = f32> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

fn same_window(c: usize, h: usize, w: usize, k: usize) -> Window {
    Window {
        channels: c,
        height: h,
        width: w,
        kernel: k,
        stride: 1,
        pad: k / 2,
        out_h: h,
        out_w: w,
    }
}

/// Stride-1 convolution with zero "same" padding.
///
/// `weight` is `[Co, Ci, k, k]` with odd `k`; the output keeps the input's
/// spatial size.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, ci, h, w] = input.dims4()?;
    let [co, wci, k] = conv_kernel(weight)?;
    if wci != ci {
        return shape_err(format!("conv2d: input has {ci} channels, weights expect {wci}"));
    }
    check_bias(bias, co)?;
    let win = same_window(ci, h, w, k);
    let mut out = Tensor::zeros(&[n, co, h, w]);
    let mut cols = vec![T::zero(); win.rows() * win.cols()];
    for s in 0..n {
        let x = input.sample(s);
        let y = out.sample_mut(s);
        if k == 1 {
            T::gemm(co, ci, h * w, weight.data(), false, x, false, T::zero(), y);
        } else {
            win.im2col(x, &mut cols);
            T::gemm(co, win.rows(), h * w, weight.data(), false, &cols, false, T::zero(), y);
        }
        add_channel_bias(y, bias.data(), h * w);
    }
    Ok(out)
}

/// Adjoint of [`conv2d`] given the upstream gradient `grad_out`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let [n, ci, h, w] = input.dims4()?;
    let [co, wci, k] = conv_kernel(weight)?;
    if wci != ci || grad_out.shape() != [n, co, h, w] {
        return shape_err(format!(
            "conv2d_backward: input {:?}, weight {:?}, grad {:?}",
            input.shape(),
            weight.shape(),
            grad_out.shape()
        ));
    }
    let win = same_window(ci, h, w, k);
    let rows = win.rows();
    let mut gx = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[co]);
    let mut cols = vec![T::zero(); rows * win.cols()];
    let mut dcols = vec![T::zero(); rows * win.cols()];
    for s in 0..n {
        let x = input.sample(s);
        let gy = grad_out.sample(s);
        accumulate_channel_sums(gy, gb.data_mut(), h * w);
        if k == 1 {
            T::gemm(co, h * w, ci, gy, false, x, true, T::one(), gw.data_mut());
            T::gemm(ci, co, h * w, weight.data(), true, gy, false, T::zero(), gx.sample_mut(s));
        } else {
            win.im2col(x, &mut cols);
            T::gemm(co, h * w, rows, gy, false, &cols, true, T::one(), gw.data_mut());
            T::gemm(rows, co, h * w, weight.data(), true, gy, false, T::zero(), &mut dcols);
            win.col2im(&dcols, gx.sample_mut(s));
        }
    }
    Ok(ConvGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

fn tconv_dims<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<([usize; 4], usize)> {
    let [n, ci, h, w] = input.dims4()?;
    let [wci, co, kh, kw] = weight.dims4()?;
    if (kh, kw) != (3, 3) {
        return shape_err(format!("transposed conv kernel must be 3×3, got {kh}×{kw}"));
    }
    if wci != ci {
        return shape_err(format!(
            "transposed_conv2d: input has {ci} channels, weights expect {wci}"
        ));
    }
    Ok(([n, ci, h, w], co))
}

/// The stride-2 convolution whose adjoint is the transposed convolution:
/// it maps a `Co×2H×2W` map to `H×W` columns.
fn tconv_window(co: usize, h: usize, w: usize) -> Window {
    Window {
        channels: co,
        height: 2 * h,
        width: 2 * w,
        kernel: 3,
        stride: 2,
        pad: 1,
        out_h: h,
        out_w: w,
    }
}

/// 3×3 transposed convolution, stride 2, padding 1, output padding 1.
///
/// `weight` is `[Ci, Co, 3, 3]`; the output is exactly `2H×2W`.
pub fn transposed_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let ([n, ci, h, w], co) = tconv_dims(input, weight)?;
    check_bias(bias, co)?;
    let win = tconv_window(co, h, w);
    let mut out = Tensor::zeros(&[n, co, 2 * h, 2 * w]);
    let mut cols = vec![T::zero(); win.rows() * win.cols()];
    for s in 0..n {
        // cols[Co·9, H·W] = Wᵀ · x
        T::gemm(win.rows(), ci, h * w, weight.data(), true, input.sample(s), false, T::zero(), &mut cols);
        let y = out.sample_mut(s);
        win.col2im(&cols, y);
        add_channel_bias(y, bias.data(), 4 * h * w);
    }
    Ok(out)
}

/// Adjoint of [`transposed_conv2d`].
pub fn transposed_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let ([n, ci, h, w], co) = tconv_dims(input, weight)?;
    if grad_out.shape() != [n, co, 2 * h, 2 * w] {
        return shape_err(format!(
            "transposed_conv2d_backward: grad {:?} for input {:?}",
            grad_out.shape(),
            input.shape()
        ));
    }
    let win = tconv_window(co, h, w);
    let rows = win.rows();
    let mut gx = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[co]);
    let mut cols = vec![T::zero(); rows * win.cols()];
    for s in 0..n {
        let gy = grad_out.sample(s);
        accumulate_channel_sums(gy, gb.data_mut(), 4 * h * w);
        win.im2col(gy, &mut cols);
        // gx[Ci, H·W] = W[Ci, Co·9] · cols
        T::gemm(ci, rows, h * w, weight.data(), false, &cols, false, T::zero(), gx.sample_mut(s));
        // gw[Ci, Co·9] += x[Ci, H·W] · colsᵀ
        T::gemm(ci, h * w, rows, input.sample(s), false, &cols, true, T::one(), gw.data_mut());
    }
    Ok(ConvGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}
