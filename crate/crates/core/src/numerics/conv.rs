//! Stride-1 2-D convolution through im2col and GEMM.
//!
//! Kernels are laid out `[size, size, in_channels, out_channels]`, so a
//! kernel is the `(size*size*in) x out` matrix whose rows match the columns
//! of the patch matrix.

use std::borrow::Cow;

use super::optim::Parameter;
use super::tensor::{Shape, Tensor};
use crate::error::{bail, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelShape {
    pub size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl KernelShape {
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        match *dims {
            [h, w, q, k] if h == w && h > 0 && q > 0 && k > 0 => {
                Ok(KernelShape { size: h, in_channels: q, out_channels: k })
            }
            _ => bail!(ShapeMismatch, "kernel dims {dims:?} are not [c, c, q, k]"),
        }
    }

    pub fn patch_len(&self) -> usize {
        self.size * self.size * self.in_channels
    }

    pub fn len(&self) -> usize {
        self.patch_len() * self.out_channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output extent of a windowed operator along one axis.
pub fn output_extent(input: usize, padding: usize, window: usize, stride: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (window > 0 && stride > 0 && window <= padded).then(|| (padded - window) / stride + 1)
}

pub fn conv2d_output_shape(input: Shape, kernel: KernelShape, padding: usize) -> Result<Shape> {
    if kernel.in_channels != input.channels {
        bail!(
            ShapeMismatch,
            "kernel depth {} does not match input channels {}",
            kernel.in_channels,
            input.channels
        );
    }
    match (
        output_extent(input.height, padding, kernel.size, 1),
        output_extent(input.width, padding, kernel.size, 1),
    ) {
        (Some(h), Some(w)) => Ok(Shape::new(h, w, kernel.out_channels)),
        _ => bail!(
            ShapeMismatch,
            "{0}x{0} kernel exceeds {input} input padded by {padding}",
            kernel.size
        ),
    }
}

/// Patch matrix with one row per output pixel.
fn im2col<T: Scalar>(input: &Tensor<T>, size: usize, padding: usize, out: Shape) -> Cow<'_, [T]> {
    if size == 1 && padding == 0 {
        return Cow::Borrowed(input.data());
    }
    let q = input.channels();
    let run = size * q;
    let patch = size * run;
    let mut cols = vec![T::zero(); out.height * out.width * patch];
    let (ih, iw) = (input.height() as isize, input.width() as isize);
    let pad = padding as isize;
    let data = input.data();
    for oy in 0..out.height {
        for ox in 0..out.width {
            let row = &mut cols[(oy * out.width + ox) * patch..][..patch];
            let x0 = ox as isize - pad;
            for dy in 0..size {
                let y = oy as isize + dy as isize - pad;
                if y < 0 || y >= ih {
                    continue;
                }
                let dst = &mut row[dy * run..][..run];
                if x0 >= 0 && x0 + size as isize <= iw {
                    let start = (y as usize * iw as usize + x0 as usize) * q;
                    dst.copy_from_slice(&data[start..start + run]);
                } else {
                    for dx in 0..size {
                        let x = x0 + dx as isize;
                        if x >= 0 && x < iw {
                            let start = (y as usize * iw as usize + x as usize) * q;
                            dst[dx * q..][..q].copy_from_slice(&data[start..start + q]);
                        }
                    }
                }
            }
        }
    }
    Cow::Owned(cols)
}

/// Scatter-adds a patch-matrix gradient back onto the input grid.
fn col2im<T: Scalar>(cols: &[T], input: Shape, size: usize, padding: usize, out: Shape) -> Tensor<T> {
    let q = input.channels;
    let run = size * q;
    let patch = size * run;
    let mut grad = vec![T::zero(); input.len()];
    let (ih, iw) = (input.height as isize, input.width as isize);
    let pad = padding as isize;
    for oy in 0..out.height {
        for ox in 0..out.width {
            let row = &cols[(oy * out.width + ox) * patch..][..patch];
            for dy in 0..size {
                let y = oy as isize + dy as isize - pad;
                if y < 0 || y >= ih {
                    continue;
                }
                for dx in 0..size {
                    let x = ox as isize + dx as isize - pad;
                    if x < 0 || x >= iw {
                        continue;
                    }
                    let start = (y as usize * iw as usize + x as usize) * q;
                    for (g, &v) in grad[start..start + q].iter_mut().zip(&row[dy * run + dx * q..][..q]) {
                        *g += v;
                    }
                }
            }
        }
    }
    Tensor::from_raw(input, grad)
}

/// `out[s] = sum_i W[i, s] * x[i] + b[s]` with zero padding, stride 1.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weights: &Parameter<T>,
    bias: &Parameter<T>,
    padding: usize,
) -> Result<Tensor<T>> {
    let kernel = KernelShape::from_dims(weights.dims())?;
    conv2d_raw(input, &weights.value, kernel, &bias.value, padding)
}

pub fn conv2d_raw<T: Scalar>(
    input: &Tensor<T>,
    weights: &[T],
    kernel: KernelShape,
    bias: &[T],
    padding: usize,
) -> Result<Tensor<T>> {
    let out = conv2d_output_shape(input.shape(), kernel, padding)?;
    if weights.len() != kernel.len() || bias.len() != kernel.out_channels {
        bail!(ShapeMismatch, "kernel/bias buffers do not match {kernel:?}");
    }
    let pixels = out.height * out.width;
    let k = kernel.out_channels;
    let mut data = Vec::with_capacity(pixels * k);
    for _ in 0..pixels {
        data.extend_from_slice(bias);
    }
    let cols = im2col(input, kernel.size, padding, out);
    let p = kernel.patch_len();
    T::gemm(pixels, p, k, T::one(), &cols, (p, 1), weights, (k, 1), T::one(), &mut data, (k, 1));
    Ok(Tensor::from_raw(out, data))
}

/// Adjoint of [`conv2d_raw`].
///
/// Adds the kernel and bias gradients into `weight_grad` / `bias_grad` and
/// returns the input gradient when `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &[T],
    kernel: KernelShape,
    padding: usize,
    grad_out: &Tensor<T>,
    weight_grad: &mut [T],
    bias_grad: &mut [T],
    want_input: bool,
) -> Result<Option<Tensor<T>>> {
    let out = conv2d_output_shape(input.shape(), kernel, padding)?;
    if grad_out.shape() != out {
        bail!(ShapeMismatch, "output gradient {} does not match {out}", grad_out.shape());
    }
    if weight_grad.len() != kernel.len() || bias_grad.len() != kernel.out_channels {
        bail!(ShapeMismatch, "gradient buffers do not match {kernel:?}");
    }
    let pixels = out.height * out.width;
    let k = kernel.out_channels;
    let p = kernel.patch_len();
    let g = grad_out.data();

    for px in g.chunks_exact(k) {
        for (b, &v) in bias_grad.iter_mut().zip(px) {
            *b += v;
        }
    }

    let cols = im2col(input, kernel.size, padding, out);
    // dW += cols^T . dOut
    T::gemm(p, pixels, k, T::one(), &cols, (1, p), g, (k, 1), T::one(), weight_grad, (k, 1));
    drop(cols);

    if !want_input {
        return Ok(None);
    }
    // dCols = dOut . W^T
    let mut dcols = vec![T::zero(); pixels * p];
    T::gemm(pixels, k, p, T::one(), g, (k, 1), weights, (1, k), T::zero(), &mut dcols, (p, 1));
    if kernel.size == 1 && padding == 0 {
        return Ok(Some(Tensor::from_raw(input.shape(), dcols)));
    }
    Ok(Some(col2im(&dcols, input.shape(), kernel.size, padding, out)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::optim::ParamRole;

    /// Direct nested-loop convolution.
    fn direct(input: &Tensor<f64>, w: &[f64], k: KernelShape, b: &[f64], pad: usize) -> Tensor<f64> {
        let out = conv2d_output_shape(input.shape(), k, pad).unwrap();
        Tensor::from_fn(out, |oy, ox, s| {
            let mut acc = b[s];
            for dy in 0..k.size {
                for dx in 0..k.size {
                    let y = oy as isize + dy as isize - pad as isize;
                    let x = ox as isize + dx as isize - pad as isize;
                    if y < 0 || x < 0 || y >= input.height() as isize || x >= input.width() as isize {
                        continue;
                    }
                    for i in 0..k.in_channels {
                        let wi = ((dy * k.size + dx) * k.in_channels + i) * k.out_channels + s;
                        acc += w[wi] * input.get(y as usize, x as usize, i);
                    }
                }
            }
            acc
        })
    }

    fn ramp(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * scale).collect()
    }

    #[test]
    fn matches_direct_summation() {
        for (size, pad) in [(1, 0), (3, 0), (3, 1), (5, 2), (2, 0)] {
            let input = Tensor::from_vec(7, 6, 3, ramp(7 * 6 * 3, 1.0)).unwrap();
            let k = KernelShape { size, in_channels: 3, out_channels: 4 };
            let w = ramp(k.len(), 0.3);
            let b = vec![0.1, -0.2, 0.3, 0.0];
            let fast = conv2d_raw(&input, &w, k, &b, pad).unwrap();
            let slow = direct(&input, &w, k, &b, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() < 1e-12, "size {size} pad {pad}");
            }
        }
    }

    #[test]
    fn identity_kernel() {
        let input = Tensor::from_vec(4, 4, 1, (0..16).map(f64::from).collect()).unwrap();
        let w = Parameter::new("w", ParamRole::Weight, vec![1, 1, 1, 1], vec![1.0]);
        let b = Parameter::zeros("b", ParamRole::Bias, vec![1]);
        assert_eq!(conv2d(&input, &w, &b, 0).unwrap(), input);
    }

    #[test]
    fn all_ones_sums_to_nine() {
        let input = Tensor::filled(3, 3, 1, 1.0);
        let w = Parameter::new("w", ParamRole::Weight, vec![3, 3, 1, 1], vec![1.0; 9]);
        let b = Parameter::zeros("b", ParamRole::Bias, vec![1]);
        let out = conv2d(&input, &w, &b, 0).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 1));
        assert_eq!(out.data(), &[9.0]);
    }

    #[test]
    fn stage_one_output_shape() {
        let k = KernelShape { size: 5, in_channels: 3, out_channels: 96 };
        let s = conv2d_output_shape(Shape::new(200, 200, 3), k, 0).unwrap();
        assert_eq!(s, Shape::new(196, 196, 96));
    }

    #[test]
    fn rejects_depth_mismatch_and_oversized_kernel() {
        let input = Tensor::<f64>::zeros(4, 4, 2);
        let k = KernelShape { size: 3, in_channels: 3, out_channels: 1 };
        assert!(conv2d_raw(&input, &vec![0.0; k.len()], k, &[0.0], 0).is_err());
        let k = KernelShape { size: 5, in_channels: 2, out_channels: 1 };
        assert!(conv2d_raw(&input, &vec![0.0; k.len()], k, &[0.0], 0).is_err());
        // padding makes it fit
        assert!(conv2d_raw(&input, &vec![0.0; k.len()], k, &[0.0], 1).is_ok());
    }

    #[test]
    fn backward_matches_direct_adjoint() {
        // <conv(x), g> is bilinear, so its derivatives have closed forms.
        let input = Tensor::from_vec(5, 4, 2, ramp(40, 1.0)).unwrap();
        let k = KernelShape { size: 3, in_channels: 2, out_channels: 3 };
        let w = ramp(k.len(), 0.5);
        let b = vec![0.0; 3];
        let out = conv2d_raw(&input, &w, k, &b, 1).unwrap();
        let g = Tensor::from_vec(out.height(), out.width(), 3, ramp(out.shape().len(), 2.0)).unwrap();
        let mut wg = vec![0.0; k.len()];
        let mut bg = vec![0.0; 3];
        let dx = conv2d_backward(&input, &w, k, 1, &g, &mut wg, &mut bg, true).unwrap().unwrap();
        // d/dx_j <conv(x), g> = <conv(e_j), g> with bias zero
        for j in 0..input.data().len() {
            let mut e = Tensor::zeros(5, 4, 2);
            e.data_mut()[j] = 1.0;
            let v = direct(&e, &w, k, &b, 1).dot(&g);
            assert!((dx.data()[j] - v).abs() < 1e-12);
        }
        for j in 0..k.len() {
            let mut e = vec![0.0; k.len()];
            e[j] = 1.0;
            let v = direct(&input, &e, k, &b, 1).dot(&g);
            assert!((wg[j] - v).abs() < 1e-12);
        }
        for s in 0..3 {
            let sum: f64 = g.data().iter().skip(s).step_by(3).sum();
            assert!((bg[s] - sum).abs() < 1e-12);
        }
    }
}
