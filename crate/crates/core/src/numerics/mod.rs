//! Tensor kernels with paired adjoints and the momentum SGD optimizer.

mod activation;
mod conv;
pub mod gradcheck;
mod optim;
mod pool;
mod tensor;

pub use activation::{
    concat_channels, cross_entropy, cross_entropy_logit_grad, relu, relu_backward, relu_backward_in_place,
    softmax_backward, softmax_channels, split_channels, PROB_FLOOR,
};
pub use conv::{conv2d, conv2d_backward, conv2d_output_shape, conv2d_raw, output_extent, KernelShape};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{sgd_step, OptimizerConfig, ParamRole, Parameter};
pub use pool::{avgpool2d, avgpool2d_backward, maxpool2d, maxpool2d_backward, PoolIndex};
pub use tensor::{Shape, Tensor};
