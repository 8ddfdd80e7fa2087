//! Text-guided textile pattern generation.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`dataset`]: keyword taxonomy, ingestion, captioning, caption augmentation,
//!   the seeded tileable synthetic corpus, stratified splits and the JSON-lines
//!   manifest format.
//! - [`diffusion`]: noise schedules, the forward process, DDPM/DDIM reverse
//!   steps, classifier-free guidance, latent codecs, text conditioning, the
//!   trainable denoiser and the sampler.
//! - [`train`]: the noise-prediction objective, Adam, EMA, fine-tuning and the
//!   binary checkpoint format.
//! - [`eval`]: similarity and perceptual metrics, paired model comparison and
//!   report rendering.
//! - [`service`]: the `ttx` command line and the HTTP generation service.
//!
//! Images are stored in `[0, 1]` and mapped to model space `[-1, 1]` with
//! `x -> 2x - 1` (see [`raster::to_model_space`]) at the dataset/model boundary.

pub mod dataset;
pub mod diffusion;
pub mod eval;
pub mod raster;
pub mod service;
pub mod train;

mod digest;

pub use dataset::{DatasetManifest, KeywordTaxonomy, PatternRecord};

pub use diffusion::{NoiseSchedule, TextEncoder};
pub use raster::Raster;
pub use train::{Checkpoint, TrainConfig};

