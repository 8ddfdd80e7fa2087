//! Similarity and perceptual metrics, paired model comparison and report rendering.

mod compare;
mod embed;
mod features;
mod metrics;
mod report;

pub use compare::{evaluate_pair, generation_seed, pairing_seed, EvalConfig};
pub use embed::{
    autocorrelations, centroid_embedding, l2_normalize, orientation_histogram, raw_features, JointEmbedder,
    StatisticsEmbedder, EMBEDDING_DIM,
};
pub use features::{channel_normalize, ConvFeatureBank, FeatureExtractor, FEATURE_BANK_SEED, FEATURE_CHANNELS, FEATURE_LAYERS};
pub use metrics::{clip_similarity, dot, feature_distance, pair_indices, perceptual_loss};
pub use report::{format_metric, render_report, EvalReport, ReportConfig, ReportFormat, ReportRow};

use crate::diffusion::DiffusionError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("unknown keyword: {0}")]
    UnknownKeyword(String),
    #[error("no reference records for keyword {0:?}")]
    NoRecordsForKeyword(String),
    #[error("empty image set")]
    EmptyImageSet,
    #[error("empty generated or base set")]
    EmptySet,
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("malformed report file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
