//! The multi-task network, its loss and the two-stage training procedure.

mod checkpoint;
mod config;
pub mod gradcheck;
mod loss;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Entry};
pub use config::{ConvSpec, NetworkConfig, PoolSpec, TrainConfig};
pub use loss::{multitask_loss, sample_loss, BatchLoss, Label, Sample, Stage};
pub use model::{argmax, ConvLayer, ForwardCache, HeadOutputs, Layer, LogitGrads, Network, Normalization};
pub use train::{
    accumulate_batch, lr_schedule, train_stage1, train_stage1_with, train_stage2, train_stage2_with, TrainReport,
    DEFAULT_LR_DECAY,
};
