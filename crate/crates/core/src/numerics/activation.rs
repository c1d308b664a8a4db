use super::tensor::{Shape, Tensor};
use crate::error::{bail, Result};
use crate::scalar::Scalar;

/// Floor applied to probabilities before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes gradient where the forward input (or output) was strictly positive.
pub fn relu_backward<T: Scalar>(forward: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = forward
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_raw(forward.shape(), data)
}

/// In-place ReLU adjoint: zeroes `grad` wherever `forward` is not positive.
pub fn relu_backward_in_place<T: Scalar>(forward: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &x) in grad.data_mut().iter_mut().zip(forward.data()) {
        if x <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Stacks feature maps along the channel axis, in argument order.
pub fn concat_channels<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = inputs.first() else {
        bail!(InvalidArgument, "nothing to concatenate");
    };
    let (h, w) = (first.height(), first.width());
    if let Some(t) = inputs.iter().find(|t| t.height() != h || t.width() != w) {
        bail!(ShapeMismatch, "cannot concatenate {} with {}", first.shape(), t.shape());
    }
    let channels: usize = inputs.iter().map(|t| t.channels()).sum();
    let mut data = Vec::with_capacity(h * w * channels);
    for y in 0..h {
        for x in 0..w {
            for t in inputs {
                data.extend_from_slice(t.pixel(y, x));
            }
        }
    }
    Ok(Tensor::from_raw(Shape::new(h, w, channels), data))
}

/// Adjoint of [`concat_channels`]: slices the gradient back per input.
pub fn split_channels<T: Scalar>(grad: &Tensor<T>, widths: &[usize]) -> Result<Vec<Tensor<T>>> {
    if widths.iter().sum::<usize>() != grad.channels() {
        bail!(ShapeMismatch, "channel split {widths:?} does not match {}", grad.shape());
    }
    let (h, w) = (grad.height(), grad.width());
    let mut parts: Vec<Vec<T>> = widths.iter().map(|&c| Vec::with_capacity(h * w * c)).collect();
    for y in 0..h {
        for x in 0..w {
            let mut px = grad.pixel(y, x);
            for (part, &c) in parts.iter_mut().zip(widths) {
                part.extend_from_slice(&px[..c]);
                px = &px[c..];
            }
        }
    }
    Ok(parts
        .into_iter()
        .zip(widths)
        .map(|(d, &c)| Tensor::from_raw(Shape::new(h, w, c), d))
        .collect())
}

/// Softmax over channels at every spatial position, with max subtraction.
pub fn softmax_channels<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let c = input.channels();
    let mut data = input.data().to_vec();
    for px in data.chunks_exact_mut(c) {
        let max = px.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in px.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::from_raw(input.shape(), data)
}

/// Vector-Jacobian product of softmax: `y * (g - <y, g>)` per position.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let c = probs.channels();
    let mut data = Vec::with_capacity(probs.data().len());
    for (y, g) in probs.data().chunks_exact(c).zip(grad_out.data().chunks_exact(c)) {
        let inner = y.iter().zip(g).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        data.extend(y.iter().zip(g).map(|(&a, &b)| a * (b - inner)));
    }
    Tensor::from_raw(probs.shape(), data)
}

fn check_single(probs: &Tensor<impl Scalar>, target: usize) -> Result<()> {
    if probs.height() != 1 || probs.width() != 1 {
        bail!(ShapeMismatch, "cross-entropy expects a 1x1xK distribution, got {}", probs.shape());
    }
    if target >= probs.channels() {
        bail!(InvalidArgument, "target class {target} out of range for {} classes", probs.channels());
    }
    Ok(())
}

/// `-log(p[target])` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<T> {
    check_single(probs, target)?;
    Ok(-probs.data()[target].max(T::of(PROB_FLOOR)).ln())
}

/// Gradient of [`cross_entropy`] with respect to the pre-softmax logits.
pub fn cross_entropy_logit_grad<T: Scalar>(probs: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    check_single(probs, target)?;
    let mut g = probs.clone();
    g.data_mut()[target] -= T::one();
    Ok(g)
}
