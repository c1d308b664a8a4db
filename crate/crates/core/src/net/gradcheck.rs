//! Finite-difference check of whole-network gradients.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use super::loss::{Sample, Stage};
use super::model::{Layer, Network};
use super::train::accumulate_batch;
use crate::error::{bail, Result};
use crate::numerics::gradcheck::{relative_error, GradCheckReport};
use crate::numerics::{Shape, Tensor};
use crate::task::Task;

/// Random tiles in `[-1, 1)` (the range of standardized input) with one random label per requested task.
pub fn random_batch(config: &NetworkConfig, tasks: &[Task], seed: u64) -> Vec<Sample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(config.tile_size, config.tile_size, config.input_channels);
    tasks
        .iter()
        .map(|&task| {
            let tile = Tensor::from_fn(shape, |_, _, _| rng.random_range(-1.0..1.0));
            let class = rng.random_range(0..task.classes());
            Sample::new(Arc::new(tile), task, class).expect("class in range")
        })
        .collect()
}

/// Batch-mean loss and the combined kink signature of every forward pass.
pub fn objective(net: &Network<f64>, batch: &[Sample<f64>], stage: Stage) -> Result<(f64, u64)> {
    let weight = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut signature = 0u64;
    for s in batch {
        let (heads, cache) = net.forward(&s.tile)?;
        let (l, _) = super::loss::sample_loss(&heads, s.label, stage, weight)?;
        loss += l;
        signature = signature.rotate_left(17) ^ cache.kink_signature();
    }
    Ok((loss, signature))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightCheck {
    pub layer: Layer,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EndToEndReport {
    pub checks: Vec<WeightCheck>,
    /// Candidates dropped because a ReLU or max-pool switched inside the
    /// finite-difference interval.
    pub skipped: usize,
    /// Candidates in units that are inactive for the whole batch, whose
    /// gradient is exactly zero on both routes.
    pub inactive: usize,
}

impl EndToEndReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }
}

/// Seeded candidate kernel entries drawn from `layers`.
pub fn sample_weights(net: &Network<f64>, layers: &[Layer], count: usize, seed: u64) -> Vec<(Layer, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let layer = layers[rng.random_range(0..layers.len())];
            (layer, rng.random_range(0..net.layer(layer).weight.len()))
        })
        .collect()
}

/// End-to-end checks of the first- and second-stage objectives at `wanted`
/// sampled trunk weights each. A stage that yields fewer than `wanted`
/// usable checks reports an infinite error.
pub fn objective_suite(
    config: &NetworkConfig,
    seed: u64,
    wanted: usize,
    epsilon: f64,
) -> Result<Vec<(GradCheckReport, EndToEndReport)>> {
    let net = Network::<f64>::build(config, seed)?;
    let candidates = sample_weights(&net, &Layer::TRUNK, 20 * wanted.max(1), seed ^ 0x9e37);
    let mut out = Vec::new();
    for (name, stage, tasks) in [
        ("end_to_end.j_first", Stage::First, &[Task::Land, Task::Bd, Task::Far][..]),
        ("end_to_end.j_second", Stage::Second, &Task::ALL[..]),
    ] {
        let batch = random_batch(config, tasks, seed.wrapping_add(1));
        let report = end_to_end_check(&net, &batch, stage, &candidates, wanted, epsilon)?;
        let max_rel_error = if report.checks.len() < wanted { f64::INFINITY } else { report.max_rel_error() };
        out.push((GradCheckReport { name: name.to_string(), max_rel_error }, report));
    }
    Ok(out)
}

/// Compares back-propagated kernel gradients with central differences of the
/// batch loss, checking up to `wanted` candidates that stay on one linear
/// piece of the network and carry a nonzero gradient.
pub fn end_to_end_check(
    net: &Network<f64>,
    batch: &[Sample<f64>],
    stage: Stage,
    candidates: &[(Layer, usize)],
    wanted: usize,
    epsilon: f64,
) -> Result<EndToEndReport> {
    if batch.is_empty() {
        bail!(InvalidArgument, "empty batch");
    }
    let mut work = net.clone();
    work.zero_grad();
    let refs: Vec<&Sample<f64>> = batch.iter().collect();
    accumulate_batch(&mut work, &refs, stage)?;
    let analytic: Vec<Vec<f64>> = Layer::ALL.iter().map(|&l| work.layer(l).weight.grad.clone()).collect();
    work.zero_grad();

    let (_, base_sig) = objective(&work, batch, stage)?;
    let mut report = EndToEndReport::default();
    for &(layer, index) in candidates {
        if report.checks.len() == wanted {
            break;
        }
        let original = work.layer(layer).weight.value[index];
        work.layer_mut(layer).weight.value[index] = original + epsilon;
        let (up, sig_up) = objective(&work, batch, stage)?;
        work.layer_mut(layer).weight.value[index] = original - epsilon;
        let (down, sig_down) = objective(&work, batch, stage)?;
        work.layer_mut(layer).weight.value[index] = original;
        if sig_up != base_sig || sig_down != base_sig {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[layer as usize][index];
        if a == 0.0 && numeric == 0.0 {
            report.inactive += 1;
            continue;
        }
        report.checks.push(WeightCheck { layer, index, analytic: a, numeric, rel_error: relative_error(a, numeric) });
    }
    Ok(report)
}
