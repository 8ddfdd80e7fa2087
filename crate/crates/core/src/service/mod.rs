//! The `ttx` command line and the HTTP generation service.

pub mod cli;
mod http;

pub use http::{
    handle_checkpoints, handle_compare, handle_generate, handle_keywords, router, serve, ApiError, AppState, CheckpointInfo,
    CompareRequest, CompareResponse, GenerateResponse, GenerationRequest, Registry, MAX_COUNT,
};

use std::path::{Path, PathBuf};

/// Environment variable naming the root that relative data paths resolve against.
pub const DATA_DIR_ENV: &str = "TTX_DATA_DIR";

/// Resolves `path` against `$TTX_DATA_DIR` when it is relative and the variable is set.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(root) if path.is_relative() && !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
