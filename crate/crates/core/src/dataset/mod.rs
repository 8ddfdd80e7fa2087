//! Pattern dataset: taxonomy, ingestion, captioning, augmentation, synthesis and splits.

mod augment;
mod caption;
mod ingest;
mod manifest;
mod split;
mod synth;
mod taxonomy;
mod validate;

pub use augment::{augment_caption, augment_manifest, AUGMENT_SUFFIX};
pub use caption::{caption_records, CaptionerAdapter, ExternalCaptioner, TemplateCaptioner};
pub use ingest::{ingest_images, IngestOutcome, IngestWarning};
pub use manifest::{
    compute_checksum, content_id, manifest_file, DatasetManifest, ImageSize, PatternRecord,
    RecordSource, Split, MANIFEST_FILE_NAME, MANIFEST_VERSION, TOOL_VERSION,
};
pub use split::split_manifest;
pub use synth::{render_motif, synthesize_corpus, CorpusClass, MotifKind, MotifStyle, SyntheticCorpusSpec};
pub use taxonomy::{load_taxonomy, normalize, KeywordTaxonomy, CANONICAL_KEYWORDS};
pub use validate::{validate_manifest, ValidationReport, Violation};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no decodable images found under {0}")]
    EmptyDirectory(PathBuf),
    #[error("directory {0:?} does not resolve to a canonical keyword")]
    UnknownKeywordDirectory(String),
    #[error("captioner {name} failed on record {record}: {reason}")]
    CaptionerFailure {
        name: String,
        record: String,
        reason: String,
    },
    #[error("keyword {0:?} is not canonical")]
    NonCanonicalKeyword(String),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("keyword {keyword:?} has {count} records; at least 2 are needed to split")]
    TooFewRecords { keyword: String, count: usize },
    #[error("invalid split fraction {0}; expected 0 < fraction < 1")]
    InvalidFraction(f64),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
