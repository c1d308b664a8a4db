use std::sync::Arc;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::loss::{sample_loss, Sample, Stage};
use super::model::{Layer, LogitGrads, Network, Normalization};
use crate::error::{bail, Result};
use crate::numerics::OptimizerConfig;
use crate::scalar::Scalar;
use crate::task::Task;

pub const DEFAULT_LR_DECAY: f64 = 0.95;

/// `base_lr * 0.95^epoch`.
pub fn lr_schedule(epoch: usize, base_lr: f64) -> f64 {
    base_lr * DEFAULT_LR_DECAY.powi(epoch as i32)
}

/// Mean sample loss of every completed epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// First stage: land, BD and FAR heads plus the shared stages, all at the
/// decayed base rate. The population head is left untouched.
pub fn train_stage1<T: Scalar>(net: &mut Network<T>, dataset: &[Sample<T>], config: &TrainConfig) -> Result<TrainReport> {
    train_stage1_with(net, dataset, config, |_, _| {})
}

pub fn train_stage1_with<T: Scalar>(
    net: &mut Network<T>,
    dataset: &[Sample<T>],
    config: &TrainConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    let decay = config.lr_decay_per_epoch;
    let base = config.base_lr;
    // the population head is not part of the first-stage objective
    run_stage(net, dataset, config, Stage::First, config.stage1_epochs, |epoch, layer| {
        if layer.is_second_task_layer() {
            0.0
        } else {
            base * decay.powi(epoch as i32)
        }
    }, on_epoch)
}

/// Second stage: adds the population loss. The population head trains at
/// `stage2_head2_lr`, every other layer at `stage2_trunk_lr`, both decayed
/// per epoch.
pub fn train_stage2<T: Scalar>(net: &mut Network<T>, dataset: &[Sample<T>], config: &TrainConfig) -> Result<TrainReport> {
    train_stage2_with(net, dataset, config, |_, _| {})
}

pub fn train_stage2_with<T: Scalar>(
    net: &mut Network<T>,
    dataset: &[Sample<T>],
    config: &TrainConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    let decay = config.lr_decay_per_epoch;
    let (trunk, head2) = (config.stage2_trunk_lr, config.stage2_head2_lr);
    run_stage(net, dataset, config, Stage::Second, config.stage2_epochs, |epoch, layer| {
        let base = if layer.is_second_task_layer() { head2 } else { trunk };
        base * decay.powi(epoch as i32)
    }, on_epoch)
}

fn run_stage<T: Scalar>(
    net: &mut Network<T>,
    dataset: &[Sample<T>],
    config: &TrainConfig,
    stage: Stage,
    epochs: usize,
    lr_for: impl Fn(usize, Layer) -> f64,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    config.validate()?;
    if dataset.is_empty() {
        bail!(InvalidArgument, "training set is empty");
    }
    if let Some(s) = dataset.iter().find(|s| !stage.admits(s.label.task)) {
        bail!(InvalidArgument, "{} sample not allowed in stage {stage:?}", s.label.task);
    }
    let required: &[Task] = match stage {
        Stage::First => &[Task::Land, Task::Bd, Task::Far],
        Stage::Second => &Task::ALL,
    };
    for task in required {
        if !dataset.iter().any(|s| s.label.task == *task) {
            warn!("training set has no {task} samples");
        }
    }
    if net.normalization.is_none() {
        net.normalization = Normalization::estimate(unique_tiles(dataset).into_iter().map(|t| t.as_ref()));
    }

    net.reset_velocity();
    net.zero_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ stage_salt(stage));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let batch: Vec<&Sample<T>> = batch.iter().map(|&i| &dataset[i]).collect();
            epoch_loss += accumulate_batch(net, &batch, stage)? * batch.len() as f64;
            for layer in Layer::ALL {
                let opt = OptimizerConfig {
                    learning_rate: lr_for(epoch, layer),
                    momentum: config.momentum,
                    weight_decay: config.weight_decay,
                };
                let l = net.layer_mut(layer);
                l.weight.sgd_update(&opt);
                l.bias.sgd_update(&opt);
            }
        }
        let mean = epoch_loss / dataset.len() as f64;
        info!("stage {stage:?} epoch {epoch}: loss {mean:.6}");
        on_epoch(epoch, mean);
        report.epoch_losses.push(mean);
    }
    Ok(report)
}

fn stage_salt(stage: Stage) -> u64 {
    match stage {
        Stage::First => 0x5151_0001,
        Stage::Second => 0x5151_0002,
    }
}

fn unique_tiles<T>(dataset: &[Sample<T>]) -> Vec<&Arc<crate::numerics::Tensor<T>>> {
    let mut seen: Vec<&Arc<crate::numerics::Tensor<T>>> = Vec::new();
    let mut ptrs = std::collections::HashSet::new();
    for s in dataset {
        if ptrs.insert(Arc::as_ptr(&s.tile)) {
            seen.push(&s.tile);
        }
    }
    seen
}

/// Forward/backward over one batch, adding the batch-mean gradient into the
/// parameter buffers. Samples that share a tile are evaluated with a single
/// forward pass; groups run in order of first appearance.
pub fn accumulate_batch<T: Scalar>(net: &mut Network<T>, batch: &[&Sample<T>], stage: Stage) -> Result<f64> {
    let weight = T::one() / T::of(batch.len() as f64);
    let mut groups: Vec<(&Arc<crate::numerics::Tensor<T>>, Vec<usize>)> = Vec::new();
    for (i, s) in batch.iter().enumerate() {
        match groups.iter_mut().find(|(t, _)| Arc::ptr_eq(t, &s.tile)) {
            Some((_, members)) => members.push(i),
            None => groups.push((&s.tile, vec![i])),
        }
    }
    let mut total = 0.0;
    for (tile, members) in groups {
        let (heads, cache) = net.forward(tile)?;
        let mut grads = LogitGrads::default();
        for i in members {
            let (loss, g) = sample_loss(&heads, batch[i].label, stage, weight)?;
            total += loss.to_f64().unwrap_or(f64::NAN);
            grads.merge(g);
        }
        net.backward(&cache, &grads)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0, 0.01), 0.01);
        assert!((lr_schedule(1, 0.01) - 0.0095).abs() < 1e-15);
        assert!((lr_schedule(10, 0.01) - 0.005987).abs() < 1e-6);
        assert!((lr_schedule(10, 0.01) - 0.01 * 0.95f64.powi(10)).abs() < 1e-9);
    }
}
