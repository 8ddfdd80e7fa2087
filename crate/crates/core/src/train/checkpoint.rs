use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochMetrics, TrainConfig, TrainError};
use crate::dataset::{ImageSize, KeywordTaxonomy};
use crate::diffusion::{Codec, DenoiserModel, MlpDenoiser, MlpSpec, NoiseSchedule, SamplingContext, ScheduleKind, TextEncoder};
use crate::digest::{sha256, sha256_hex};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TTXD";
pub const FORMAT_VERSION: u32 = 1;

/// Trained (or freshly initialised) model plus everything needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: MlpDenoiser,
    pub text_encoder: TextEncoder,
    pub schedule: NoiseSchedule,
    pub codec: Codec,
    pub taxonomy: KeywordTaxonomy,
    pub image_size: ImageSize,
    pub config: TrainConfig,
    pub history: Vec<EpochMetrics>,
}

#[derive(Serialize, Deserialize)]
struct Architecture {
    denoiser: MlpSpec,
    codec: Codec,
    schedule_kind: ScheduleKind,
    schedule_steps: usize,
    text_dim: usize,
    text_rows: usize,
    image_size: ImageSize,
    taxonomy: KeywordTaxonomy,
}

#[derive(Serialize, Deserialize)]
struct Provenance {
    config: TrainConfig,
    history: Vec<EpochMetrics>,
}

fn push_segment(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn corrupt(m: impl Into<String>) -> TrainError {
    TrainError::Corrupt(m.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.bytes.len() < n {
            return Err(corrupt("truncated checkpoint"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn segment(&mut self) -> Result<&'a [u8], TrainError> {
        let len = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| corrupt("segment length overflow"))?;
        self.take(len)
    }
}

impl Checkpoint {
    pub fn sampling_context(&self) -> SamplingContext<'_> {
        SamplingContext {
            model: &self.model,
            schedule: &self.schedule,
            codec: &self.codec,
            text_encoder: &self.text_encoder,
            taxonomy: &self.taxonomy,
            image_size: self.image_size,
        }
    }

    fn segments(&self) -> Vec<u8> {
        let arch = Architecture {
            denoiser: self.model.spec(),
            codec: self.codec.clone(),
            schedule_kind: self.schedule.kind,
            schedule_steps: self.schedule.steps(),
            text_dim: self.text_encoder.dim(),
            text_rows: self.text_encoder.rows(),
            image_size: self.image_size,
            taxonomy: self.taxonomy.clone(),
        };
        let mut params = Vec::new();
        for v in self
            .model
            .parameters()
            .iter()
            .chain(self.text_encoder.table())
            .chain(&self.codec.parameters())
        {
            params.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        let mut schedule = Vec::new();
        for v in self.schedule.betas.iter().chain(&self.schedule.alphas).chain(&self.schedule.alpha_bars) {
            schedule.extend_from_slice(&v.to_le_bytes());
        }
        let provenance = Provenance {
            config: self.config.clone(),
            history: self.history.clone(),
        };
        let mut out = Vec::new();
        push_segment(&mut out, serde_json::to_string(&arch).expect("architecture").as_bytes());
        push_segment(&mut out, &params);
        push_segment(&mut out, &schedule);
        push_segment(&mut out, self.text_encoder.vocabulary_json().as_bytes());
        push_segment(&mut out, serde_json::to_string(&provenance).expect("provenance").as_bytes());
        out
    }

    /// Hex SHA-256 of the serialized content (everything after the header).
    pub fn digest(&self) -> String {
        sha256_hex(&self.segments())
    }

    /// Serialized form: magic, format version, content digest, then five
    /// length-prefixed segments (architecture, `f32` parameters, `f64`
    /// schedule, vocabulary, config and metrics).
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.segments();
        let mut out = Vec::with_capacity(body.len() + 40);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&sha256(&body));
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let mut r = Reader { bytes };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(TrainError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let stored: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        if sha256(r.bytes) != stored {
            return Err(TrainError::DigestMismatch);
        }
        let arch: Architecture =
            serde_json::from_slice(r.segment()?).map_err(|e| corrupt(format!("architecture: {e}")))?;
        let raw = r.segment()?;
        let schedule_raw = r.segment()?;
        let vocab = std::str::from_utf8(r.segment()?).map_err(|_| corrupt("vocabulary is not UTF-8"))?;
        let provenance: Provenance =
            serde_json::from_slice(r.segment()?).map_err(|e| corrupt(format!("provenance: {e}")))?;
        if !r.bytes.is_empty() {
            return Err(corrupt("trailing bytes"));
        }

        if raw.len() % 4 != 0 {
            return Err(corrupt("parameter segment is not a whole number of f32 values"));
        }
        let params: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        let n_model = arch.denoiser.num_parameters();
        let n_text = arch.text_rows * arch.text_dim;
        let n_codec = match &arch.codec {
            Codec::Patch2x(p) => 12 + 12 * p.channels,
            _ => 0,
        };
        if params.len() != n_model + n_text + n_codec {
            return Err(corrupt(format!(
                "parameter segment holds {} values, layout needs {}",
                params.len(),
                n_model + n_text + n_codec
            )));
        }
        let model = MlpDenoiser::from_parameters(arch.denoiser, params[..n_model].to_vec()).map_err(corrupt)?;
        let (dim, tokens) = TextEncoder::parse_vocabulary(vocab).map_err(|e| corrupt(format!("vocabulary: {e}")))?;
        if dim != arch.text_dim {
            return Err(corrupt("vocabulary width disagrees with architecture"));
        }
        let text_encoder =
            TextEncoder::from_parts(tokens, dim, params[n_model..n_model + n_text].to_vec()).map_err(corrupt)?;
        let mut codec = arch.codec;
        if let Codec::Patch2x(p) = &mut codec {
            let rest = &params[n_model + n_text..];
            p.mean = rest[..12].to_vec();
            p.basis = rest[12..].to_vec();
        }

        let t = arch.schedule_steps;
        if schedule_raw.len() != 3 * t * 8 {
            return Err(corrupt("schedule segment length"));
        }
        let values: Vec<f64> = schedule_raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let schedule = NoiseSchedule {
            kind: arch.schedule_kind,
            betas: values[..t].to_vec(),
            alphas: values[t..2 * t].to_vec(),
            alpha_bars: values[2 * t..].to_vec(),
        };
        Ok(Self {
            model,
            text_encoder,
            schedule,
            codec,
            taxonomy: arch.taxonomy,
            image_size: arch.image_size,
            config: provenance.config,
            history: provenance.history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
