use crate::error::{bail, Result};
use crate::task::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub size: usize,
    pub filters: usize,
    pub padding: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub region: usize,
    pub stride: usize,
}

const fn conv(size: usize, filters: usize, padding: usize) -> ConvSpec {
    ConvSpec { size, filters, padding }
}

/// Layer layout of the four feature-extraction stages.
///
/// Stages III and IV run a pointwise and a 3x3 branch in parallel and
/// concatenate them; the 3x3 branches are padded so both branches agree in
/// extent. The task heads are 1x1 convolutions whose widths are fixed by
/// [`Task::classes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub input_channels: usize,
    /// Smallest accepted tile edge, in pixels.
    pub tile_size: usize,
    pub stage1: ConvSpec,
    pub pool1: PoolSpec,
    pub stage2: ConvSpec,
    pub pool2: PoolSpec,
    pub stage3: [ConvSpec; 2],
    pub pool3: PoolSpec,
    pub stage4: [ConvSpec; 2],
    pub avgpool: PoolSpec,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_channels: 3,
            tile_size: 200,
            stage1: conv(5, 96, 0),
            pool1: PoolSpec { region: 7, stride: 4 },
            stage2: conv(3, 128, 0),
            pool2: PoolSpec { region: 3, stride: 2 },
            stage3: [conv(1, 64, 0), conv(3, 64, 1)],
            pool3: PoolSpec { region: 3, stride: 2 },
            stage4: [conv(1, 80, 0), conv(3, 48, 1)],
            avgpool: PoolSpec { region: 10, stride: 1 },
        }
    }
}

impl NetworkConfig {
    /// Channels of the pooled shared feature fed to every head.
    pub fn feature_channels(&self) -> usize {
        self.stage4[0].filters + self.stage4[1].filters
    }

    /// Input width of the population head: the three first-layer head
    /// distributions plus the pooled feature.
    pub fn pop_head_inputs(&self) -> usize {
        Task::Land.classes() + Task::Bd.classes() + Task::Far.classes() + self.feature_channels()
    }

    /// Number of weighted layers.
    pub fn layer_count(&self) -> usize {
        super::Layer::ALL.len()
    }

    pub fn validate(&self) -> Result<()> {
        let convs = [self.stage1, self.stage2, self.stage3[0], self.stage3[1], self.stage4[0], self.stage4[1]];
        if self.input_channels == 0 || convs.iter().any(|c| c.size == 0 || c.filters == 0) {
            bail!(InvalidArgument, "network extents must be positive");
        }
        for branch in [self.stage3, self.stage4] {
            // both branches must preserve the same extent to be concatenated
            let delta = |c: ConvSpec| 2 * c.padding as isize - c.size as isize;
            if delta(branch[0]) != delta(branch[1]) {
                bail!(InvalidArgument, "parallel branches {branch:?} produce different extents");
            }
        }
        let pools = [self.pool1, self.pool2, self.pool3, self.avgpool];
        if pools.iter().any(|p| p.region == 0 || p.stride == 0) {
            bail!(InvalidArgument, "pooling region and stride must be positive");
        }
        Ok(())
    }
}

/// Hyperparameters of the two training stages.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay_per_epoch: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Stage-two rate for the shared stages and the land/BD/FAR heads.
    pub stage2_trunk_lr: f64,
    /// Stage-two rate for the population head.
    pub stage2_head2_lr: f64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            base_lr: 0.01,
            lr_decay_per_epoch: 0.95,
            momentum: 0.9,
            weight_decay: 0.0005,
            stage2_trunk_lr: 0.001,
            stage2_head2_lr: 0.01,
            stage1_epochs: 20,
            stage2_epochs: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(InvalidArgument, "batch size must be positive");
        }
        let rates = [self.base_lr, self.stage2_trunk_lr, self.stage2_head2_lr];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            bail!(InvalidArgument, "learning rates must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            bail!(InvalidArgument, "momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !(self.lr_decay_per_epoch > 0.0) {
            bail!(InvalidArgument, "weight decay must be >= 0 and lr decay > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let t = TrainConfig::default();
        assert_eq!(t.batch_size, 64);
        assert_eq!((t.base_lr, t.lr_decay_per_epoch, t.momentum, t.weight_decay), (0.01, 0.95, 0.9, 0.0005));
        assert!(t.stage2_trunk_lr < t.stage2_head2_lr);
        t.validate().unwrap();

        let n = NetworkConfig::default();
        n.validate().unwrap();
        assert_eq!(n.feature_channels(), 128);
        assert_eq!(n.pop_head_inputs(), 198);
        assert_eq!(n.layer_count(), 10);
    }

    #[test]
    fn mismatched_branches_rejected() {
        let mut n = NetworkConfig::default();
        n.stage3[1].padding = 0;
        assert!(n.validate().is_err());
    }
}
