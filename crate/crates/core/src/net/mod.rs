//! Row-independent predictor of optimal row potentials.

mod checkpoint;
mod instance;
mod model;
mod params;
mod train;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use instance::LabeledInstance;
pub use model::{cost_scale, loss, ForwardCache, LossValue};
pub use params::{Activation, ModelConfig, ModelParams, RefineCosts, RefinePooling, ResidualBlock};
pub use train::{evaluate, train, EpochLog, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
