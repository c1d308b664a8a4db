use std::sync::Arc;

use super::model::{HeadOutputs, LogitGrads};
use crate::error::{bail, Result};
use crate::numerics::{cross_entropy, cross_entropy_logit_grad, Tensor};
use crate::scalar::Scalar;
use crate::task::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Land, BD and FAR losses only.
    First,
    /// Adds the population loss.
    Second,
}

impl Stage {
    pub fn admits(self, task: Task) -> bool {
        self == Stage::Second || task != Task::Pop
    }
}

/// Exactly one supervised target; `task` is the sample-type indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub task: Task,
    pub class: usize,
}

impl Label {
    pub fn new(task: Task, class: usize) -> Result<Self> {
        if class >= task.classes() {
            bail!(InvalidArgument, "{task} label {class} out of range 0..{}", task.classes());
        }
        Ok(Label { task, class })
    }
}

/// A training tile and its single label. Samples cut from the same grid
/// cell share one tile allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub tile: Arc<Tensor<T>>,
    pub label: Label,
}

impl<T: Scalar> Sample<T> {
    pub fn new(tile: Arc<Tensor<T>>, task: Task, class: usize) -> Result<Self> {
        Ok(Sample { tile, label: Label::new(task, class)? })
    }
}

/// Batch-mean loss with its per-task split and per-sample logit gradients.
#[derive(Clone, Debug)]
pub struct BatchLoss<T> {
    pub total: T,
    /// Contribution of each task, indexed like [`Task::ALL`].
    pub per_task: [T; 4],
    pub grads: Vec<LogitGrads<T>>,
}

impl<T: Scalar> BatchLoss<T> {
    /// The land + BD + FAR part of the total.
    pub fn first_stage_part(&self) -> T {
        self.per_task[0] + self.per_task[1] + self.per_task[2]
    }
}

/// Loss of one sample scaled by `weight`, with gradient only on its own head.
pub fn sample_loss<T: Scalar>(heads: &HeadOutputs<T>, label: Label, stage: Stage, weight: T) -> Result<(T, LogitGrads<T>)> {
    if !stage.admits(label.task) {
        bail!(InvalidArgument, "population samples are not trained in the first stage");
    }
    let probs = heads.head(label.task);
    let loss = cross_entropy(probs, label.class)? * weight;
    let mut grad = cross_entropy_logit_grad(probs, label.class)?;
    grad.scale(weight);
    let mut grads = LogitGrads::default();
    grads.accumulate(label.task, grad);
    Ok((loss, grads))
}

/// Indicator-masked multi-task loss averaged over the batch.
///
/// `outputs[i]` must be the forward result for the sample labelled
/// `labels[i]`.
pub fn multitask_loss<T: Scalar>(outputs: &[HeadOutputs<T>], labels: &[Label], stage: Stage) -> Result<BatchLoss<T>> {
    if outputs.len() != labels.len() || labels.is_empty() {
        bail!(InvalidArgument, "need one head output per label in a non-empty batch");
    }
    let weight = T::one() / T::of(labels.len() as f64);
    let mut per_task = [T::zero(); 4];
    let mut grads = Vec::with_capacity(labels.len());
    for (heads, &label) in outputs.iter().zip(labels) {
        let (loss, g) = sample_loss(heads, label, stage, weight)?;
        per_task[label.task as usize] += loss;
        grads.push(g);
    }
    let total = per_task.iter().fold(T::zero(), |a, &b| a + b);
    Ok(BatchLoss { total, per_task, grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_heads() -> HeadOutputs<f64> {
        let u = |k: usize| Tensor::filled(1, 1, k, 1.0 / k as f64);
        HeadOutputs { land: u(13), bd: u(25), far: u(32), pop: u(40) }
    }

    #[test]
    fn single_land_sample() {
        let l = multitask_loss(&[uniform_heads()], &[Label::new(Task::Land, 4).unwrap()], Stage::First).unwrap();
        assert!((l.total - 13f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn other_heads_are_masked() {
        let l = multitask_loss(&[uniform_heads()], &[Label::new(Task::Bd, 3).unwrap()], Stage::First).unwrap();
        let g = &l.grads[0];
        assert!(g.bd.is_some());
        assert!(g.land.is_none() && g.far.is_none() && g.pop.is_none());
    }

    #[test]
    fn population_rejected_in_first_stage() {
        let pop = Label::new(Task::Pop, 0).unwrap();
        assert!(multitask_loss(&[uniform_heads()], &[pop], Stage::First).is_err());
        assert!(multitask_loss(&[uniform_heads()], &[pop], Stage::Second).is_ok());
    }

    #[test]
    fn second_stage_total_bounds_first_part() {
        let labels = [
            Label::new(Task::Land, 1).unwrap(),
            Label::new(Task::Pop, 39).unwrap(),
            Label::new(Task::Far, 2).unwrap(),
        ];
        let outs = vec![uniform_heads(); 3];
        let l = multitask_loss(&outs, &labels, Stage::Second).unwrap();
        assert!(l.total >= l.first_stage_part());
        let expect = (13f64.ln() + 40f64.ln() + 32f64.ln()) / 3.0;
        assert!((l.total - expect).abs() < 1e-12);
    }

    #[test]
    fn labels_validated() {
        assert!(Label::new(Task::Bd, 25).is_err());
        assert!(Label::new(Task::Pop, 39).is_ok());
    }
}
