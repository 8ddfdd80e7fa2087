use serde::{Deserialize, Serialize};

use super::{clip_similarity, perceptual_loss, EvalError, EvalReport, FeatureExtractor, JointEmbedder, ReportConfig, ReportRow};
use crate::dataset::DatasetManifest;
use crate::diffusion::{sample, SampleRequest, SamplerKind};
use crate::digest::derive_seed;
use crate::raster::Raster;
use crate::train::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Images generated per keyword per checkpoint.
    pub num_generated: usize,
    pub seed: u64,
    pub steps: usize,
    pub guidance: f64,
    pub sampler: SamplerKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            num_generated: 16,
            seed: 7,
            steps: 50,
            guidance: 3.0,
            sampler: SamplerKind::default(),
        }
    }
}

/// Sampling seed for one checkpoint and keyword.
pub fn generation_seed(seed: u64, keyword: &str, digest: &str) -> u64 {
    derive_seed(&[&seed.to_le_bytes(), keyword.as_bytes(), digest.as_bytes()])
}

/// Base-image pairing seed, shared by both checkpoints so the comparison is paired.
pub fn pairing_seed(seed: u64, keyword: &str) -> u64 {
    derive_seed(&[&seed.to_le_bytes(), b"pairing", keyword.as_bytes()])
}

fn generate(ckpt: &Checkpoint, digest: &str, keyword: &str, config: &EvalConfig) -> Result<Vec<Raster>, EvalError> {
    let request = SampleRequest {
        prompt: keyword.to_string(),
        seed: generation_seed(config.seed, keyword, digest),
        steps: config.steps,
        guidance: config.guidance,
        count: config.num_generated,
        sampler: config.sampler,
    };
    Ok(sample(&ckpt.sampling_context(), &request)?)
}

/// Scores both checkpoints per keyword: images are generated with the bare
/// keyword as prompt and compared against the reference records carrying it.
/// Rows come out in taxonomy order.
pub fn evaluate_pair(
    candidate: &Checkpoint,
    baseline: &Checkpoint,
    keywords: &[String],
    reference: &DatasetManifest,
    config: &EvalConfig,
    embedder: &dyn JointEmbedder,
    extractor: &dyn FeatureExtractor,
) -> Result<EvalReport, EvalError> {
    let keywords = reference.taxonomy.ordered(keywords.iter()).map_err(EvalError::UnknownKeyword)?;
    let cand_digest = candidate.digest();
    let base_digest = baseline.digest();
    let mut rows = Vec::with_capacity(keywords.len());
    for keyword in &keywords {
        let base: Vec<Raster> = reference.records_with_keyword(keyword).map(|r| r.image.clone()).collect();
        if base.is_empty() {
            return Err(EvalError::NoRecordsForKeyword(keyword.clone()));
        }
        let pairing = pairing_seed(config.seed, keyword);
        let gen_c = generate(candidate, &cand_digest, keyword, config)?;
        let gen_b = generate(baseline, &base_digest, keyword, config)?;
        rows.push(ReportRow {
            keyword: keyword.clone(),
            perceptual_candidate: perceptual_loss(&gen_c, &base, extractor, pairing)?,
            perceptual_baseline: perceptual_loss(&gen_b, &base, extractor, pairing)?,
            similarity_candidate: clip_similarity(&gen_c, keyword, reference, embedder)?,
            similarity_baseline: clip_similarity(&gen_b, keyword, reference, embedder)?,
        });
    }
    let report = EvalReport {
        rows,
        config: ReportConfig {
            num_generated: config.num_generated,
            seed: config.seed,
            steps: config.steps,
            guidance: config.guidance,
            candidate_digest: cand_digest,
            baseline_digest: base_digest,
            embedder: embedder.name().to_string(),
            extractor: extractor.name().to_string(),
        },
    };
    report.validate()?;
    Ok(report)
}
