//! Finite-difference verification of the hand-written adjoints.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{
    concat_channels, cross_entropy, cross_entropy_logit_grad, relu, relu_backward, softmax_channels, split_channels,
};
use super::conv::{conv2d_backward, conv2d_raw, KernelShape};
use super::pool::{avgpool2d, avgpool2d_backward, maxpool2d, maxpool2d_backward};
use super::tensor::{Shape, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// `|a - f| / max(1e-8, |a| + |f|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Largest relative error between `analytic` and central differences of `f`
/// taken coordinate by coordinate around `x`.
pub fn grad_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], epsilon: f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + epsilon;
        let up = f(&probe);
        probe[i] = x[i] - epsilon;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * epsilon)));
    }
    worst
}

/// Operators covered by [`check_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckedOp {
    Conv2dValid,
    Conv2dPadded,
    MaxPool,
    AvgPool,
    Relu,
    Concat,
    SoftmaxCrossEntropy,
}

impl CheckedOp {
    pub const ALL: [CheckedOp; 7] = [
        CheckedOp::Conv2dValid,
        CheckedOp::Conv2dPadded,
        CheckedOp::MaxPool,
        CheckedOp::AvgPool,
        CheckedOp::Relu,
        CheckedOp::Concat,
        CheckedOp::SoftmaxCrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckedOp::Conv2dValid => "conv2d(pad=0)",
            CheckedOp::Conv2dPadded => "conv2d(pad=1)",
            CheckedOp::MaxPool => "maxpool2d",
            CheckedOp::AvgPool => "avgpool2d",
            CheckedOp::Relu => "relu",
            CheckedOp::Concat => "concat_channels",
            CheckedOp::SoftmaxCrossEntropy => "softmax+cross_entropy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_error < threshold
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<28} {:.3e}", self.name, self.max_rel_error)
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn tensor(shape: Shape, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape.height, shape.width, shape.channels, data.to_vec()).expect("shape")
}

/// Runs the check for one operator on seeded random inputs. Differentiable
/// operators are reduced to a scalar through a fixed random projection.
pub fn check_op(op: CheckedOp, seed: u64, epsilon: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (op as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let err = match op {
        CheckedOp::Conv2dValid | CheckedOp::Conv2dPadded => {
            let pad = usize::from(op == CheckedOp::Conv2dPadded);
            let in_shape = Shape::new(8, 8, 2);
            let kernel = KernelShape { size: 3, in_channels: 2, out_channels: 4 };
            let x = uniform(&mut rng, in_shape.len(), -1.0, 1.0);
            let w = uniform(&mut rng, kernel.len(), -0.5, 0.5);
            let b = uniform(&mut rng, 4, -0.1, 0.1);
            let n_out = {
                let o = conv2d_raw(&tensor(in_shape, &x), &w, kernel, &b, pad).expect("conv");
                o.data().len()
            };
            let r = uniform(&mut rng, n_out, -1.0, 1.0);
            let (nx, nw) = (x.len(), w.len());
            let flat: Vec<f64> = x.iter().chain(&w).chain(&b).copied().collect();
            let loss = |v: &[f64]| {
                let out = conv2d_raw(&tensor(in_shape, &v[..nx]), &v[nx..nx + nw], kernel, &v[nx + nw..], pad)
                    .expect("conv");
                out.data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            };
            let out = conv2d_raw(&tensor(in_shape, &x), &w, kernel, &b, pad).expect("conv");
            let g = Tensor::from_vec(out.height(), out.width(), out.channels(), r.clone()).expect("shape");
            let mut wg = vec![0.0; nw];
            let mut bg = vec![0.0; 4];
            let dx = conv2d_backward(&tensor(in_shape, &x), &w, kernel, pad, &g, &mut wg, &mut bg, true)
                .expect("conv backward")
                .expect("input grad");
            let analytic: Vec<f64> = dx.data().iter().chain(&wg).chain(&bg).copied().collect();
            grad_check(loss, &flat, &analytic, epsilon)
        }
        CheckedOp::MaxPool => {
            // distinct values spaced far wider than epsilon, so no window has a near-tie
            let shape = Shape::new(9, 9, 2);
            let mut x: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.01 - 0.8).collect();
            x.shuffle(&mut rng);
            let (out, idx) = maxpool2d(&tensor(shape, &x), 3, 2).expect("pool");
            let r = uniform(&mut rng, out.data().len(), -1.0, 1.0);
            let g = Tensor::from_vec(out.height(), out.width(), out.channels(), r.clone()).expect("shape");
            let analytic = maxpool2d_backward(&g, &idx).expect("pool backward").into_vec();
            let loss = |v: &[f64]| {
                let (o, _) = maxpool2d(&tensor(shape, v), 3, 2).expect("pool");
                o.data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            };
            grad_check(loss, &x, &analytic, epsilon)
        }
        CheckedOp::AvgPool => {
            let shape = Shape::new(8, 8, 3);
            let x = uniform(&mut rng, shape.len(), -1.0, 1.0);
            let out = avgpool2d(&tensor(shape, &x), 3, 2).expect("pool");
            let r = uniform(&mut rng, out.data().len(), -1.0, 1.0);
            let g = Tensor::from_vec(out.height(), out.width(), out.channels(), r.clone()).expect("shape");
            let analytic = avgpool2d_backward(&g, shape, 3, 2).expect("pool backward").into_vec();
            let loss = |v: &[f64]| {
                let o = avgpool2d(&tensor(shape, v), 3, 2).expect("pool");
                o.data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            };
            grad_check(loss, &x, &analytic, epsilon)
        }
        CheckedOp::Relu => {
            let shape = Shape::new(6, 6, 2);
            let margin = 10.0 * epsilon;
            let x: Vec<f64> = (0..shape.len())
                .map(|_| {
                    let m = rng.random_range(margin..1.0);
                    if rng.random_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            let r = uniform(&mut rng, x.len(), -1.0, 1.0);
            let t = tensor(shape, &x);
            let analytic = relu_backward(&t, &tensor(shape, &r)).into_vec();
            let loss = |v: &[f64]| relu(&tensor(shape, v)).data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
            grad_check(loss, &x, &analytic, epsilon)
        }
        CheckedOp::Concat => {
            let (sa, sb) = (Shape::new(4, 4, 2), Shape::new(4, 4, 3));
            let x = uniform(&mut rng, sa.len() + sb.len(), -1.0, 1.0);
            let r = uniform(&mut rng, x.len(), -1.0, 1.0);
            let g = tensor(Shape::new(4, 4, 5), &r);
            let parts = split_channels(&g, &[2, 3]).expect("split");
            let analytic: Vec<f64> = parts[0].data().iter().chain(parts[1].data()).copied().collect();
            let loss = |v: &[f64]| {
                let c = concat_channels(&[&tensor(sa, &v[..sa.len()]), &tensor(sb, &v[sa.len()..])]).expect("concat");
                c.data().iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            };
            grad_check(loss, &x, &analytic, epsilon)
        }
        CheckedOp::SoftmaxCrossEntropy => {
            let k = 13;
            let x = uniform(&mut rng, k, -3.0, 3.0);
            let target = rng.random_range(0..k);
            let shape = Shape::new(1, 1, k);
            let probs = softmax_channels(&tensor(shape, &x));
            let analytic = cross_entropy_logit_grad(&probs, target).expect("ce").into_vec();
            let loss = |v: &[f64]| cross_entropy(&softmax_channels(&tensor(shape, v)), target).expect("ce");
            grad_check(loss, &x, &analytic, epsilon)
        }
    };
    GradCheckReport { name: op.name().to_string(), max_rel_error: err }
}

pub fn op_suite(seed: u64, epsilon: f64) -> Vec<GradCheckReport> {
    CheckedOp::ALL.iter().map(|&op| check_op(op, seed, epsilon)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_is_nearly_exact() {
        for seed in 0..5 {
            assert!(check_op(CheckedOp::Relu, seed, DEFAULT_EPSILON).max_rel_error < 1e-7);
        }
    }

    #[test]
    fn every_op_passes() {
        for seed in [1, 7, 42] {
            for r in op_suite(seed, DEFAULT_EPSILON) {
                assert!(r.passes(1e-4), "{r}");
            }
        }
    }

    #[test]
    fn harness_detects_a_wrong_gradient() {
        let f = |v: &[f64]| v[0] * v[0];
        assert!(grad_check(f, &[1.5], &[3.0], 1e-5) < 1e-9);
        assert!(grad_check(f, &[1.5], &[2.0], 1e-5) > 0.1);
    }
}
