//! Denoising diffusion machinery.

mod codec;
mod denoiser;
mod process;
mod sampler;
mod schedule;
mod text;

pub use codec::{latent_decode, latent_encode, Codec, LatentCodec, PatchCodec};
pub use denoiser::{time_features, DenoiserModel, MlpDenoiser, MlpSpec};
pub use process::{cfg_combine, ddim_sigma, ddim_step, ddpm_step, forward_diffuse, predict_x0};
pub use sampler::{sample, SampleRequest, SamplerKind, SamplingContext};
pub use schedule::{build_schedule, NoiseSchedule, ScheduleKind};
pub use text::{encode_text, tokenize, ConditioningVector, TextEncoder, DEFAULT_COND_DIM, NULL_ROW, OOV_ROW};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffusionError {
    #[error("invalid schedule bounds: {0}")]
    InvalidBounds(String),
    #[error("step {t} outside 1..={max}")]
    StepOutOfRange { t: usize, max: usize },
    #[error("step order violation: need 0 <= t_prev < t <= T, got t = {t}, t_prev = {t_prev}")]
    StepOrderViolation { t: usize, t_prev: usize },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
