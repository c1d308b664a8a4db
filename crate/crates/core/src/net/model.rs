use std::hash::{DefaultHasher, Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ConvSpec, NetworkConfig};
use crate::error::{bail, Result};
use crate::numerics::{
    avgpool2d, avgpool2d_backward, concat_channels, conv2d_backward, conv2d_raw, maxpool2d, maxpool2d_backward,
    relu_backward_in_place, softmax_backward, softmax_channels, split_channels, KernelShape, ParamRole, Parameter,
    PoolIndex, Shape, Tensor,
};
use crate::scalar::Scalar;
use crate::task::Task;

/// Weighted layers in forward order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layer {
    Stage1,
    Stage2,
    Stage3Pointwise,
    Stage3Spatial,
    Stage4Pointwise,
    Stage4Spatial,
    LandHead,
    BdHead,
    FarHead,
    PopHead,
}

impl Layer {
    pub const ALL: [Layer; 10] = [
        Layer::Stage1,
        Layer::Stage2,
        Layer::Stage3Pointwise,
        Layer::Stage3Spatial,
        Layer::Stage4Pointwise,
        Layer::Stage4Spatial,
        Layer::LandHead,
        Layer::BdHead,
        Layer::FarHead,
        Layer::PopHead,
    ];

    /// Layers of the four feature-extraction stages.
    pub const TRUNK: [Layer; 6] = [
        Layer::Stage1,
        Layer::Stage2,
        Layer::Stage3Pointwise,
        Layer::Stage3Spatial,
        Layer::Stage4Pointwise,
        Layer::Stage4Spatial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Stage1 => "stage1",
            Layer::Stage2 => "stage2",
            Layer::Stage3Pointwise => "stage3.pointwise",
            Layer::Stage3Spatial => "stage3.spatial",
            Layer::Stage4Pointwise => "stage4.pointwise",
            Layer::Stage4Spatial => "stage4.spatial",
            Layer::LandHead => "head.land",
            Layer::BdHead => "head.bd",
            Layer::FarHead => "head.far",
            Layer::PopHead => "head.pop",
        }
    }

    pub fn head(task: Task) -> Layer {
        match task {
            Task::Land => Layer::LandHead,
            Task::Bd => Layer::BdHead,
            Task::Far => Layer::FarHead,
            Task::Pop => Layer::PopHead,
        }
    }

    /// True for the population head, the only layer of the second task layer.
    pub fn is_second_task_layer(self) -> bool {
        self == Layer::PopHead
    }
}

/// A convolution's kernel and bias parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub kernel: KernelShape,
    pub padding: usize,
}

impl<T: Scalar> ConvLayer<T> {
    fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_raw(input, &self.weight.value, self.kernel, &self.bias.value, self.padding)
    }

    fn backward(&mut self, input: &Tensor<T>, grad_out: &Tensor<T>, want_input: bool) -> Result<Option<Tensor<T>>> {
        let ConvLayer { weight, bias, kernel, padding } = self;
        conv2d_backward(input, &weight.value, *kernel, *padding, grad_out, &mut weight.grad, &mut bias.grad, want_input)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Per-channel input standardization, estimated on the training tiles.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Normalization<T> {
    /// Mean and standard deviation per channel over all pixels of `tiles`.
    pub fn estimate<'a>(tiles: impl IntoIterator<Item = &'a Tensor<T>>) -> Option<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for t in tiles {
            let c = t.channels();
            if sum.is_empty() {
                sum = vec![0.0; c];
                sq = vec![0.0; c];
            }
            if c != sum.len() {
                return None;
            }
            for px in t.data().chunks_exact(c) {
                for (i, v) in px.iter().enumerate() {
                    let v = v.to_f64().unwrap_or(0.0);
                    sum[i] += v;
                    sq[i] += v * v;
                }
            }
            count += t.height() * t.width();
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect::<Vec<_>>();
        Some(Normalization { mean: mean.into_iter().map(T::of).collect(), std: std.into_iter().map(T::of).collect() })
    }

    pub fn apply(&self, tile: &Tensor<T>) -> Result<Tensor<T>> {
        let c = tile.channels();
        if c != self.mean.len() {
            bail!(ShapeMismatch, "normalization has {} channels, tile has {c}", self.mean.len());
        }
        let mut out = tile.clone();
        for px in out.data_mut().chunks_exact_mut(c) {
            for ((v, &m), &s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// Softmax outputs of the four heads over the output grid (1x1 for a
/// single 200x200 tile).
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs<T> {
    pub land: Tensor<T>,
    pub bd: Tensor<T>,
    pub far: Tensor<T>,
    pub pop: Tensor<T>,
}

impl<T: Scalar> HeadOutputs<T> {
    pub fn head(&self, task: Task) -> &Tensor<T> {
        match task {
            Task::Land => &self.land,
            Task::Bd => &self.bd,
            Task::Far => &self.far,
            Task::Pop => &self.pop,
        }
    }

    /// Output grid extent `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.land.height(), self.land.width())
    }

    /// Distribution of `task` at output position `(y, x)`.
    pub fn at(&self, task: Task, y: usize, x: usize) -> &[T] {
        self.head(task).pixel(y, x)
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self, task: Task, y: usize, x: usize) -> usize {
        argmax(self.at(task, y, x))
    }
}

pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradients of the loss with respect to each head's logits. `None` means the
/// head received no gradient at all.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogitGrads<T> {
    pub land: Option<Tensor<T>>,
    pub bd: Option<Tensor<T>>,
    pub far: Option<Tensor<T>>,
    pub pop: Option<Tensor<T>>,
}

impl<T: Scalar> LogitGrads<T> {
    pub fn get(&self, task: Task) -> Option<&Tensor<T>> {
        match task {
            Task::Land => self.land.as_ref(),
            Task::Bd => self.bd.as_ref(),
            Task::Far => self.far.as_ref(),
            Task::Pop => self.pop.as_ref(),
        }
    }

    fn slot(&mut self, task: Task) -> &mut Option<Tensor<T>> {
        match task {
            Task::Land => &mut self.land,
            Task::Bd => &mut self.bd,
            Task::Far => &mut self.far,
            Task::Pop => &mut self.pop,
        }
    }

    pub fn accumulate(&mut self, task: Task, grad: Tensor<T>) {
        match self.slot(task) {
            Some(g) => g.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    pub fn merge(&mut self, other: LogitGrads<T>) {
        for task in Task::ALL {
            if let Some(g) = other.get(task) {
                self.accumulate(task, g.clone());
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        Task::ALL.iter().all(|&t| self.get(t).is_none())
    }
}

/// Activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    input: Tensor<T>,
    a1: Tensor<T>,
    p1: Tensor<T>,
    i1: PoolIndex,
    a2: Tensor<T>,
    p2: Tensor<T>,
    i2: PoolIndex,
    a3: [Tensor<T>; 2],
    p3: Tensor<T>,
    i3: PoolIndex,
    a4: [Tensor<T>; 2],
    c4_shape: Shape,
    feature: Tensor<T>,
    heads: HeadOutputs<T>,
    pop_input: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Feature-map shapes in order: stage I conv, pool, stage II conv, pool,
    /// stage III concat, pool, stage IV concat, average pool.
    pub fn trace(&self) -> Vec<Shape> {
        let c3 = Shape::new(self.a3[0].height(), self.a3[0].width(), self.a3[0].channels() + self.a3[1].channels());
        vec![
            self.a1.shape(),
            self.p1.shape(),
            self.a2.shape(),
            self.p2.shape(),
            c3,
            self.p3.shape(),
            self.c4_shape,
            self.feature.shape(),
        ]
    }

    /// Shape entering the average pool.
    pub fn avgpool_input(&self) -> Shape {
        self.c4_shape
    }

    pub fn feature(&self) -> &Tensor<T> {
        &self.feature
    }

    /// Hash of every ReLU on/off state and max-pool winner. Two forward
    /// passes with equal signatures lie on the same linear piece.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for t in [&self.a1, &self.a2, &self.a3[0], &self.a3[1], &self.a4[0], &self.a4[1]] {
            for chunk in t.data().chunks(64) {
                let bits = chunk.iter().enumerate().fold(0u64, |b, (i, v)| b | (u64::from(*v > T::zero()) << i));
                bits.hash(&mut h);
            }
        }
        for idx in [&self.i1, &self.i2, &self.i3] {
            idx.indices.hash(&mut h);
        }
        h.finish()
    }
}

fn relu_in_place<T: Scalar>(t: &mut Tensor<T>) {
    for v in t.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// The multi-task network: shared stages I-IV, three first-layer heads and
/// the population head fed by their distributions and the shared feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetworkConfig,
    layers: Vec<ConvLayer<T>>,
    pub normalization: Option<Normalization<T>>,
}

impl<T: Scalar> Network<T> {
    /// Allocates every layer; kernels are drawn from `N(0, 2 / fan_in)`,
    /// biases start at zero.
    pub fn build(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::layer_specs(config)
            .into_iter()
            .map(|(layer, spec, in_channels)| {
                let kernel = KernelShape { size: spec.size, in_channels, out_channels: spec.filters };
                let fan_in = kernel.patch_len() as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
                let values = (0..kernel.len()).map(|_| T::of(normal.sample(&mut rng))).collect();
                ConvLayer {
                    weight: Parameter::new(
                        format!("{}.weight", layer.name()),
                        ParamRole::Weight,
                        vec![spec.size, spec.size, in_channels, spec.filters],
                        values,
                    ),
                    bias: Parameter::zeros(format!("{}.bias", layer.name()), ParamRole::Bias, vec![spec.filters]),
                    kernel,
                    padding: spec.padding,
                }
            })
            .collect();
        Ok(Network { config: config.clone(), layers, normalization: None })
    }

    fn layer_specs(config: &NetworkConfig) -> Vec<(Layer, ConvSpec, usize)> {
        let head = |task: Task| ConvSpec { size: 1, filters: task.classes(), padding: 0 };
        let s3_in = config.stage2.filters;
        let s4_in = config.stage3[0].filters + config.stage3[1].filters;
        let feat = config.feature_channels();
        vec![
            (Layer::Stage1, config.stage1, config.input_channels),
            (Layer::Stage2, config.stage2, config.stage1.filters),
            (Layer::Stage3Pointwise, config.stage3[0], s3_in),
            (Layer::Stage3Spatial, config.stage3[1], s3_in),
            (Layer::Stage4Pointwise, config.stage4[0], s4_in),
            (Layer::Stage4Spatial, config.stage4[1], s4_in),
            (Layer::LandHead, head(Task::Land), feat),
            (Layer::BdHead, head(Task::Bd), feat),
            (Layer::FarHead, head(Task::Far), feat),
            (Layer::PopHead, head(Task::Pop), config.pop_head_inputs()),
        ]
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layer(&self, layer: Layer) -> &ConvLayer<T> {
        &self.layers[layer as usize]
    }

    pub fn layer_mut(&mut self, layer: Layer) -> &mut ConvLayer<T> {
        &mut self.layers[layer as usize]
    }

    /// All parameters in a fixed order: per layer, weight then bias.
    pub fn params(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(|p| p.zero_grad());
    }

    pub fn reset_velocity(&mut self) {
        self.params_mut().for_each(|p| p.reset_velocity());
    }

    /// Runs the network on one tile. Tiles larger than the training tile run
    /// fully convolutionally and produce a grid of head outputs.
    pub fn forward(&self, tile: &Tensor<T>) -> Result<(HeadOutputs<T>, ForwardCache<T>)> {
        let cfg = &self.config;
        if tile.height() < cfg.tile_size || tile.width() < cfg.tile_size {
            bail!(
                ShapeMismatch,
                "tile {} is smaller than {}x{}",
                tile.shape(),
                cfg.tile_size,
                cfg.tile_size
            );
        }
        if tile.channels() != cfg.input_channels {
            bail!(ShapeMismatch, "tile has {} channels, expected {}", tile.channels(), cfg.input_channels);
        }
        let input = match &self.normalization {
            Some(n) => n.apply(tile)?,
            None => tile.clone(),
        };

        let mut a1 = self.layer(Layer::Stage1).forward(&input)?;
        relu_in_place(&mut a1);
        let (p1, i1) = maxpool2d(&a1, cfg.pool1.region, cfg.pool1.stride)?;

        let mut a2 = self.layer(Layer::Stage2).forward(&p1)?;
        relu_in_place(&mut a2);
        let (p2, i2) = maxpool2d(&a2, cfg.pool2.region, cfg.pool2.stride)?;

        let mut a3 = [
            self.layer(Layer::Stage3Pointwise).forward(&p2)?,
            self.layer(Layer::Stage3Spatial).forward(&p2)?,
        ];
        a3.iter_mut().for_each(relu_in_place);
        let c3 = concat_channels(&[&a3[0], &a3[1]])?;
        let (p3, i3) = maxpool2d(&c3, cfg.pool3.region, cfg.pool3.stride)?;
        drop(c3);

        let mut a4 = [
            self.layer(Layer::Stage4Pointwise).forward(&p3)?,
            self.layer(Layer::Stage4Spatial).forward(&p3)?,
        ];
        a4.iter_mut().for_each(relu_in_place);
        let c4 = concat_channels(&[&a4[0], &a4[1]])?;
        let feature = avgpool2d(&c4, cfg.avgpool.region, cfg.avgpool.stride)?;

        let land = softmax_channels(&self.layer(Layer::LandHead).forward(&feature)?);
        let bd = softmax_channels(&self.layer(Layer::BdHead).forward(&feature)?);
        let far = softmax_channels(&self.layer(Layer::FarHead).forward(&feature)?);
        let pop_input = concat_channels(&[&land, &bd, &far, &feature])?;
        let pop = softmax_channels(&self.layer(Layer::PopHead).forward(&pop_input)?);

        let heads = HeadOutputs { land, bd, far, pop };
        let cache = ForwardCache {
            input,
            a1,
            p1,
            i1,
            a2,
            p2,
            i2,
            a3,
            p3,
            i3,
            a4,
            c4_shape: c4.shape(),
            feature,
            heads: heads.clone(),
            pop_input,
        };
        Ok((heads, cache))
    }

    /// Back-propagates logit gradients and adds parameter gradients into each
    /// layer's `grad` buffer. Heads whose slot is `None` receive nothing.
    pub fn backward(&mut self, cache: &ForwardCache<T>, grads: &LogitGrads<T>) -> Result<()> {
        if grads.is_empty() {
            return Ok(());
        }
        let cfg = self.config.clone();
        let mut d_feature = Tensor::zeros(cache.feature.height(), cache.feature.width(), cache.feature.channels());
        let mut head_grads = [grads.land.clone(), grads.bd.clone(), grads.far.clone()];

        if let Some(g_pop) = &grads.pop {
            let d_in = self
                .layer_mut(Layer::PopHead)
                .backward(&cache.pop_input, g_pop, true)?
                .expect("input gradient requested");
            let widths = [Task::Land.classes(), Task::Bd.classes(), Task::Far.classes(), cfg.feature_channels()];
            let mut parts = split_channels(&d_in, &widths)?;
            d_feature.add_assign(&parts.pop().expect("four parts"));
            let probs = [&cache.heads.land, &cache.heads.bd, &cache.heads.far];
            for ((slot, d_probs), y) in head_grads.iter_mut().zip(parts).zip(probs) {
                let d_logits = softmax_backward(y, &d_probs);
                match slot {
                    Some(g) => g.add_assign(&d_logits),
                    None => *slot = Some(d_logits),
                }
            }
        }

        for (layer, g) in [Layer::LandHead, Layer::BdHead, Layer::FarHead].into_iter().zip(&head_grads) {
            if let Some(g) = g {
                let d = self.layer_mut(layer).backward(&cache.feature, g, true)?.expect("input gradient requested");
                d_feature.add_assign(&d);
            }
        }

        let d_c4 = avgpool2d_backward(&d_feature, cache.c4_shape, cfg.avgpool.region, cfg.avgpool.stride)?;
        let mut d_a4 = split_channels(&d_c4, &[cache.a4[0].channels(), cache.a4[1].channels()])?;
        relu_backward_in_place(&cache.a4[0], &mut d_a4[0]);
        relu_backward_in_place(&cache.a4[1], &mut d_a4[1]);
        let mut d_p3 = self.layer_mut(Layer::Stage4Pointwise).backward(&cache.p3, &d_a4[0], true)?.expect("grad");
        d_p3.add_assign(&self.layer_mut(Layer::Stage4Spatial).backward(&cache.p3, &d_a4[1], true)?.expect("grad"));

        let d_c3 = maxpool2d_backward(&d_p3, &cache.i3)?;
        let mut d_a3 = split_channels(&d_c3, &[cache.a3[0].channels(), cache.a3[1].channels()])?;
        relu_backward_in_place(&cache.a3[0], &mut d_a3[0]);
        relu_backward_in_place(&cache.a3[1], &mut d_a3[1]);
        let mut d_p2 = self.layer_mut(Layer::Stage3Pointwise).backward(&cache.p2, &d_a3[0], true)?.expect("grad");
        d_p2.add_assign(&self.layer_mut(Layer::Stage3Spatial).backward(&cache.p2, &d_a3[1], true)?.expect("grad"));

        let mut d_a2 = maxpool2d_backward(&d_p2, &cache.i2)?;
        relu_backward_in_place(&cache.a2, &mut d_a2);
        let d_p1 = self.layer_mut(Layer::Stage2).backward(&cache.p1, &d_a2, true)?.expect("grad");

        let mut d_a1 = maxpool2d_backward(&d_p1, &cache.i1)?;
        relu_backward_in_place(&cache.a1, &mut d_a1);
        self.layer_mut(Layer::Stage1).backward(&cache.input, &d_a1, false)?;
        Ok(())
    }

    /// Rebuilds a network from named parameter arrays, checking every name
    /// and shape against `config`.
    pub fn from_arrays(config: &NetworkConfig, arrays: &[(String, Vec<usize>, Vec<f64>)]) -> Result<Self> {
        let mut net = Self::build(config, 0)?;
        let expected: Vec<(String, Vec<usize>)> = net.params().map(|p| (p.name.clone(), p.dims().to_vec())).collect();
        if arrays.len() != expected.len() {
            bail!(Format, "checkpoint holds {} parameters, network needs {}", arrays.len(), expected.len());
        }
        for (p, (name, dims, values)) in net.params_mut().zip(arrays) {
            if &p.name != name || p.dims() != dims.as_slice() {
                bail!(Format, "checkpoint entry {name} {dims:?} does not match {} {:?}", p.name, p.dims());
            }
            p.value = values.iter().map(|&v| T::of(v)).collect();
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_net() -> Network<f64> {
        Network::build(&NetworkConfig::default(), 3).unwrap()
    }

    #[test]
    fn parameter_inventory() {
        let net = default_net();
        let counts: Vec<usize> = Layer::ALL.iter().map(|&l| net.layer(l).param_count()).collect();
        assert_eq!(counts, vec![7296, 110720, 8256, 73792, 10320, 55344, 1677, 3225, 4128, 7960]);
        assert_eq!(net.params().count(), 20);
        assert!(net.params().filter(|p| p.role == ParamRole::Bias).all(|p| p.value.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn same_seed_same_parameters() {
        assert_eq!(default_net(), default_net());
        let other = Network::<f64>::build(&NetworkConfig::default(), 4).unwrap();
        assert_ne!(default_net(), other);
    }

    #[test]
    fn initial_weights_follow_fan_in_scale() {
        let net = default_net();
        let w = &net.layer(Layer::Stage2).weight.value;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let expect = 2.0 / (3.0 * 3.0 * 96.0);
        assert!((var / expect - 1.0).abs() < 0.05, "variance {var} vs {expect}");
    }

    #[test]
    fn forward_trace_200() {
        let net = default_net();
        let tile = Tensor::from_fn(Shape::new(200, 200, 3), |y, x, c| ((y * 7 + x * 3 + c) % 11) as f64 / 11.0);
        let (heads, cache) = net.forward(&tile).unwrap();
        let extents: Vec<usize> = cache.trace().iter().map(|s| s.height).collect();
        assert_eq!(extents, vec![196, 48, 46, 22, 22, 10, 10, 1]);
        assert_eq!(cache.avgpool_input(), Shape::new(10, 10, 128));
        for task in Task::ALL {
            assert_eq!(heads.head(task).shape(), Shape::new(1, 1, task.classes()));
            let s: f64 = heads.at(task, 0, 0).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_trace_216_is_fully_convolutional() {
        let net = default_net();
        let tile = Tensor::filled(216, 216, 3, 0.5);
        let (heads, cache) = net.forward(&tile).unwrap();
        let extents: Vec<usize> = cache.trace().iter().map(|s| s.height).collect();
        assert_eq!(extents, vec![212, 52, 50, 24, 24, 11, 11, 2]);
        assert_eq!(heads.grid(), (2, 2));
        assert_eq!(heads.pop.shape(), Shape::new(2, 2, 40));
    }

    #[test]
    fn rejects_small_or_wrong_tiles() {
        let net = default_net();
        assert!(net.forward(&Tensor::zeros(199, 200, 3)).is_err());
        assert!(net.forward(&Tensor::zeros(200, 150, 3)).is_err());
        assert!(net.forward(&Tensor::zeros(200, 200, 4)).is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let mut net = default_net();
        for p in net.params_mut() {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
        let (heads, _) = net.forward(&Tensor::filled(200, 200, 3, 0.3)).unwrap();
        for task in Task::ALL {
            let k = task.classes() as f64;
            assert!(heads.at(task, 0, 0).iter().all(|&p| (p - 1.0 / k).abs() < 1e-15));
            assert_eq!(heads.argmax(task, 0, 0), 0);
        }
    }

    #[test]
    fn normalization_standardizes() {
        let a = Tensor::from_fn(Shape::new(4, 4, 2), |y, x, c| (y * 4 + x) as f64 + 100.0 * c as f64);
        let n = Normalization::estimate([&a]).unwrap();
        let z = n.apply(&a).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = z.data().iter().skip(c).step_by(2).copied().collect();
            let mean = vals.iter().sum::<f64>() / 16.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        let flat = Normalization::estimate([&Tensor::<f64>::filled(2, 2, 1, 3.0)]).unwrap();
        assert_eq!(flat.std, vec![1.0]);
    }

    #[test]
    fn f32_network_runs() {
        let net = Network::<f32>::build(&NetworkConfig::default(), 1).unwrap();
        let (heads, _) = net.forward(&Tensor::filled(200, 200, 3, 0.1f32)).unwrap();
        let s: f32 = heads.at(Task::Pop, 0, 0).iter().sum();
        assert!((s - 1.0).abs() < 1e-5);
    }
}
