use crate::scalar::Scalar;

/// Whether weight decay applies to a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    /// Convolution kernel, stored `[size, size, in_channels, out_channels]`.
    Weight,
    /// One bias per output channel.
    Bias,
}

/// A trainable tensor together with its gradient and momentum buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub role: ParamRole,
    dims: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub velocity: Vec<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, role: ParamRole, dims: Vec<usize>, value: Vec<T>) -> Self {
        let len: usize = dims.iter().product();
        assert_eq!(len, value.len(), "parameter values do not match dims {dims:?}");
        Parameter {
            name: name.into(),
            role,
            dims,
            value,
            grad: vec![T::zero(); len],
            velocity: vec![T::zero(); len],
        }
    }

    pub fn zeros(name: impl Into<String>, role: ParamRole, dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self::new(name, role, dims, vec![T::zero(); len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn reset_velocity(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = T::zero());
    }

    /// One momentum step followed by clearing the gradient.
    ///
    /// `v <- momentum * v - lr * (grad + wd * value)`, `value <- value + v`,
    /// with the decay term only for [`ParamRole::Weight`].
    pub fn sgd_update(&mut self, config: &OptimizerConfig) {
        let lr = T::of(config.learning_rate);
        let mu = T::of(config.momentum);
        let wd = match self.role {
            ParamRole::Weight => T::of(config.weight_decay),
            ParamRole::Bias => T::zero(),
        };
        for ((w, g), v) in self.value.iter_mut().zip(&mut self.grad).zip(&mut self.velocity) {
            *v = mu * *v - lr * (*g + wd * *w);
            *w += *v;
            *g = T::zero();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { learning_rate: 0.01, momentum: 0.9, weight_decay: 0.0005 }
    }
}

/// Applies [`Parameter::sgd_update`] to every parameter.
pub fn sgd_step<'a, T: Scalar>(
    params: impl IntoIterator<Item = &'a mut Parameter<T>>,
    config: &OptimizerConfig,
) {
    for p in params {
        p.sgd_update(config);
    }
}
