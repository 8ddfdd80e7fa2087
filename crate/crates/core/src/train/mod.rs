//! Fine-tuning the denoiser on a captioned pattern dataset.

mod checkpoint;
mod config;
mod finetune;
mod optim;
mod step;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use config::{CodecChoice, ScheduleConfig, TrainConfig};
pub use finetune::{finetune, EpochMetrics};
pub use optim::{Adam, Ema};
pub use step::{training_step, ConstantNoise, NoiseSource, TrainItem, TrainState};

use crate::dataset::DatasetError;
use crate::diffusion::DiffusionError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("shape incompatibility: {0}")]
    ShapeIncompatibility(String),
    /// Carries the last checkpoint whose losses were all finite, when one exists.
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss {
        epoch: usize,
        last_good: Option<Box<Checkpoint>>,
    },
    #[error("checkpoint format version {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint digest mismatch")]
    DigestMismatch,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
