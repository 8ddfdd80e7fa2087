use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use tokio::sync::{OwnedSemaphorePermit, Semaphore};

use crate::dataset::KeywordTaxonomy;
use crate::diffusion::{sample, SampleRequest, SamplerKind};
use crate::raster::Raster;
use crate::train::Checkpoint;

pub const MAX_COUNT: usize = 16;

/// Error body: a machine-readable code and a human message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn unknown_checkpoint(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_checkpoint", format!("no checkpoint registered as {id:?}"))
    }

    pub fn capacity() -> Self {
        Self::new(StatusCode::TOO_MANY_REQUESTS, "capacity_exceeded", "too many concurrent generations, retry later")
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

struct Entry {
    digest: String,
    checkpoint: Checkpoint,
}

/// Checkpoints available to the service, fixed at startup.
#[derive(Default, Clone)]
pub struct Registry {
    entries: BTreeMap<String, Arc<Entry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub name: String,
    pub digest: String,
    pub height: usize,
    pub width: usize,
    pub schedule_steps: usize,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, checkpoint: Checkpoint) {
        let digest = checkpoint.digest();
        self.entries.insert(name.into(), Arc::new(Entry { digest, checkpoint }));
    }

    /// Parses `name=path` and loads the checkpoint.
    pub fn register(&mut self, spec: &str, resolve: impl Fn(&Path) -> std::path::PathBuf) -> anyhow::Result<()> {
        let (name, path) = spec
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| anyhow::anyhow!("--register expects name=path, got {spec:?}"))?;
        let path = resolve(Path::new(path));
        let ckpt = Checkpoint::load(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        self.insert(name, ckpt);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, name: &str) -> Result<&Arc<Entry>, ApiError> {
        self.entries.get(name).ok_or_else(|| ApiError::unknown_checkpoint(name))
    }

    pub fn info(&self) -> Vec<CheckpointInfo> {
        self.entries
            .iter()
            .map(|(name, e)| CheckpointInfo {
                name: name.clone(),
                digest: e.digest.clone(),
                height: e.checkpoint.image_size.height,
                width: e.checkpoint.image_size.width,
                schedule_steps: e.checkpoint.schedule.steps(),
            })
            .collect()
    }
}

/// Shared, immutable service state.
#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub taxonomy: Arc<KeywordTaxonomy>,
    limiter: Arc<Semaphore>,
}

impl AppState {
    pub fn new(registry: Registry, taxonomy: KeywordTaxonomy, max_concurrent: usize) -> Self {
        Self {
            registry: Arc::new(registry),
            taxonomy: Arc::new(taxonomy),
            limiter: Arc::new(Semaphore::new(max_concurrent.max(1))),
        }
    }

    /// Takes one generation slot, if free, until the guard is dropped.
    pub fn try_reserve(&self) -> Option<OwnedSemaphorePermit> {
        self.limiter.clone().try_acquire_owned().ok()
    }
}

fn default_steps() -> usize {
    50
}

fn default_guidance() -> f64 {
    3.0
}

fn default_count() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    /// Drawn at random when absent; the response echoes the seed actually used.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_guidance")]
    pub guidance: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    pub checkpoint_id: String,
    #[serde(default)]
    pub sampler: SamplerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    /// Base64-encoded PNG files.
    pub images: Vec<String>,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub checkpoint_digest: String,
    pub request: GenerationRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub prompt: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_guidance")]
    pub guidance: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    pub checkpoint_a: String,
    pub checkpoint_b: String,
    #[serde(default)]
    pub sampler: SamplerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub images_a: Vec<String>,
    pub images_b: Vec<String>,
    pub digest_a: String,
    pub digest_b: String,
    pub seed: u64,
    pub request: CompareRequest,
}

fn check_common(count: usize, guidance: f64, steps: usize, ckpt: &Checkpoint) -> Result<(), ApiError> {
    if !(1..=MAX_COUNT).contains(&count) {
        return Err(ApiError::invalid(format!("count {count} outside 1..={MAX_COUNT}")));
    }
    if !(guidance.is_finite() && guidance >= 0.0) {
        return Err(ApiError::invalid(format!("guidance {guidance} must be finite and >= 0")));
    }
    let t = ckpt.schedule.steps();
    if !(1..=t).contains(&steps) {
        return Err(ApiError::invalid(format!("steps {steps} outside 1..={t}")));
    }
    Ok(())
}

fn render(ckpt: &Checkpoint, request: &SampleRequest) -> Result<Vec<String>, ApiError> {
    let images: Vec<Raster> =
        sample(&ckpt.sampling_context(), request).map_err(|e| ApiError::invalid(e.to_string()))?;
    images
        .iter()
        .map(|img| img.encode_png().map(|b| BASE64.encode(b)).map_err(|e| ApiError::internal(e.to_string())))
        .collect()
}

fn pick_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

/// Generates `count` images from one registered checkpoint.
pub fn handle_generate(state: &AppState, request: GenerationRequest) -> Result<GenerateResponse, ApiError> {
    let entry = state.registry.get(&request.checkpoint_id)?;
    let ckpt = &entry.checkpoint;
    check_common(request.count, request.guidance, request.steps, ckpt)?;
    let seed = pick_seed(request.seed);
    let sample_request = SampleRequest {
        prompt: request.prompt.clone(),
        seed,
        steps: request.steps,
        guidance: request.guidance,
        count: request.count,
        sampler: request.sampler,
    };
    let images = render(ckpt, &sample_request)?;
    Ok(GenerateResponse {
        images,
        height: ckpt.image_size.height,
        width: ckpt.image_size.width,
        seed,
        checkpoint_digest: entry.digest.clone(),
        request: GenerationRequest {
            seed: Some(seed),
            ..request
        },
    })
}

/// Generates from two checkpoints with identical seed and settings.
pub fn handle_compare(state: &AppState, request: CompareRequest) -> Result<CompareResponse, ApiError> {
    let a = state.registry.get(&request.checkpoint_a)?;
    let b = state.registry.get(&request.checkpoint_b)?;
    check_common(request.count, request.guidance, request.steps, &a.checkpoint)?;
    check_common(request.count, request.guidance, request.steps, &b.checkpoint)?;
    let seed = pick_seed(request.seed);
    let sample_request = SampleRequest {
        prompt: request.prompt.clone(),
        seed,
        steps: request.steps,
        guidance: request.guidance,
        count: request.count,
        sampler: request.sampler,
    };
    Ok(CompareResponse {
        images_a: render(&a.checkpoint, &sample_request)?,
        images_b: render(&b.checkpoint, &sample_request)?,
        digest_a: a.digest.clone(),
        digest_b: b.digest.clone(),
        seed,
        request: CompareRequest {
            seed: Some(seed),
            ..request
        },
    })
}

pub fn handle_keywords(state: &AppState) -> Vec<String> {
    state.taxonomy.keywords().to_vec()
}

pub fn handle_checkpoints(state: &AppState) -> Vec<CheckpointInfo> {
    state.registry.info()
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed request body: {e}")))
}

/// Runs a generation off the async runtime while holding one concurrency permit.
async fn run_limited<T, F>(state: &AppState, job: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    let permit = state.try_reserve().ok_or_else(ApiError::capacity)?;
    tokio::task::spawn_blocking(move || {
        let _permit = permit;
        job()
    })
    .await
    .map_err(|e| ApiError::internal(format!("generation task failed: {e}")))?
}

async fn post_generate(State(state): State<AppState>, body: Bytes) -> Result<Json<GenerateResponse>, ApiError> {
    let request: GenerationRequest = parse(&body)?;
    let s = state.clone();
    run_limited(&state, move || handle_generate(&s, request)).await.map(Json)
}

async fn post_compare(State(state): State<AppState>, body: Bytes) -> Result<Json<CompareResponse>, ApiError> {
    let request: CompareRequest = parse(&body)?;
    let s = state.clone();
    run_limited(&state, move || handle_compare(&s, request)).await.map(Json)
}

async fn get_keywords(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "keywords": handle_keywords(&state) }))
}

async fn get_checkpoints(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "checkpoints": handle_checkpoints(&state) }))
}

async fn get_health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "checkpoints": state.registry.len() }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/generate", post(post_generate))
        .route("/v1/compare", post(post_compare))
        .route("/v1/keywords", get(get_keywords))
        .route("/v1/checkpoints", get(get_checkpoints))
        .route("/v1/health", get(get_health))
        .fallback(not_found)
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
