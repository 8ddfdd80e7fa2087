use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::CodecChoice;
use super::step::{conditioning, mse, training_step, NoiseSource, TrainItem, TrainState};
use super::{Checkpoint, TrainConfig, TrainError};
use crate::dataset::DatasetManifest;
use crate::diffusion::{forward_diffuse, Codec, DenoiserModel, LatentCodec, MlpDenoiser, MlpSpec, PatchCodec, TextEncoder};
use crate::digest::derive_seed;
use crate::raster::{to_model_space, Raster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// One-based epoch number.
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

fn model_images(manifest: &DatasetManifest) -> Vec<Raster> {
    manifest.records.iter().map(|r| to_model_space(&r.image)).collect()
}

fn keyword_prompt(keywords: &[String]) -> String {
    keywords.join(", ")
}

impl Checkpoint {
    /// Untrained checkpoint for a training set: the schedule from `config`, a
    /// codec (fitted on the training images when learned), a text encoder over
    /// the training captions and keywords, and a seeded denoiser.
    pub fn initialize(train: &DatasetManifest, config: &TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        if train.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let schedule = config.schedule.build()?;
        let codec = match config.codec {
            CodecChoice::Identity => Codec::Identity,
            CodecChoice::AvgPool2x => Codec::AvgPool2x,
            CodecChoice::Patch2x { channels } => Codec::Patch2x(PatchCodec::fit(&model_images(train), channels)?),
        };
        let prompts: Vec<String> = train.records.iter().map(|r| keyword_prompt(&r.keywords)).collect();
        let text_encoder = TextEncoder::build(
            train.records.iter().map(|r| r.caption.as_str()).chain(prompts.iter().map(String::as_str)),
            &train.taxonomy,
            config.cond_dim,
            derive_seed(&[&config.seed.to_le_bytes(), b"text"]),
        );
        let (h, w, c) = codec.latent_shape(train.image_size.height, train.image_size.width);
        let spec = MlpSpec {
            latent_dim: h * w * c,
            cond_dim: config.cond_dim,
            hidden: config.hidden,
            time_dim: 32,
        };
        let model = MlpDenoiser::new(spec, derive_seed(&[&config.seed.to_le_bytes(), b"denoiser"]));
        Ok(Self {
            model,
            text_encoder,
            schedule,
            codec,
            taxonomy: train.taxonomy.clone(),
            image_size: train.image_size,
            config: config.clone(),
            history: Vec::new(),
        })
    }
}

fn prepare(manifest: &DatasetManifest, ckpt: &Checkpoint) -> Result<Vec<TrainItem>, TrainError> {
    if manifest.image_size != ckpt.image_size {
        return Err(TrainError::ShapeIncompatibility(format!(
            "dataset images are {}, checkpoint expects {}",
            manifest.image_size, ckpt.image_size
        )));
    }
    let (lh, lw, _) = ckpt.codec.latent_shape(ckpt.image_size.height, ckpt.image_size.width);
    manifest
        .records
        .iter()
        .map(|r| {
            let latent = ckpt.codec.encode(&to_model_space(&r.image))?;
            if latent.len() != ckpt.model.latent_dim() || (latent.height(), latent.width()) != (lh, lw) {
                return Err(TrainError::ShapeIncompatibility(format!(
                    "record {} encodes to {} values, denoiser expects {}",
                    r.id,
                    latent.len(),
                    ckpt.model.latent_dim()
                )));
            }
            Ok(TrainItem {
                latent: latent.data().to_vec(),
                caption_rows: ckpt.text_encoder.token_rows(&r.caption, &ckpt.taxonomy),
                keyword_rows: ckpt.text_encoder.token_rows(&keyword_prompt(&r.keywords), &ckpt.taxonomy),
            })
        })
        .collect()
}

/// Validation noise drawn once so every epoch scores against the same targets.
struct ValidationSet {
    items: Vec<TrainItem>,
    steps: Vec<usize>,
    noise: Vec<Vec<f64>>,
}

impl ValidationSet {
    fn new(items: Vec<TrainItem>, t_max: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[&seed.to_le_bytes(), b"validation"]));
        let mut steps = Vec::new();
        let mut noise = Vec::new();
        for item in &items {
            steps.push(rng.timestep(t_max));
            noise.push((0..item.latent.len()).map(|_| rng.normal()).collect());
        }
        Self { items, steps, noise }
    }

    fn loss(&self, ckpt: &Checkpoint) -> Result<Option<f64>, TrainError> {
        if self.items.is_empty() {
            return Ok(None);
        }
        let dim = ckpt.model.latent_dim();
        let mut total = 0.0;
        for chunk in (0..self.items.len()).collect::<Vec<_>>().chunks(64) {
            let mut x = ndarray::Array2::zeros((chunk.len(), dim));
            let mut e = ndarray::Array2::zeros((chunk.len(), dim));
            let mut t = Vec::new();
            let mut rows: Vec<&[usize]> = Vec::new();
            for (k, &i) in chunk.iter().enumerate() {
                let xt = forward_diffuse(&self.items[i].latent, self.steps[i], &self.noise[i], &ckpt.schedule)?;
                x.row_mut(k).assign(&ndarray::ArrayView1::from(&xt));
                e.row_mut(k).assign(&ndarray::ArrayView1::from(&self.noise[i]));
                t.push(self.steps[i]);
                rows.push(&self.items[i].caption_rows);
            }
            let cond = conditioning(&ckpt.text_encoder, &rows);
            let pred = ckpt.model.predict_noise(x.view(), &t, cond.view());
            total += mse(&pred, &e) * chunk.len() as f64;
        }
        Ok(Some(total / self.items.len() as f64))
    }
}

fn snapshot(state: &TrainState<MlpDenoiser>, base: &Checkpoint, config: &TrainConfig, history: &[EpochMetrics]) -> Checkpoint {
    let (params, table) = state.published();
    let round = |v: Vec<f64>| v.into_iter().map(|x| f64::from(x as f32)).collect::<Vec<_>>();
    let model = MlpDenoiser::from_parameters(state.model.spec(), round(params)).expect("same layout");
    let text_encoder =
        TextEncoder::from_parts(state.text_encoder.tokens(), state.text_encoder.dim(), round(table)).expect("same layout");
    Checkpoint {
        model,
        text_encoder,
        schedule: base.schedule.clone(),
        codec: base.codec.clone(),
        taxonomy: base.taxonomy.clone(),
        image_size: base.image_size,
        config: config.clone(),
        history: history.to_vec(),
    }
}

/// Fine-tunes `initial` (or a fresh [`Checkpoint::initialize`] when `None`) on
/// `train`, scoring `val` after every epoch. The returned checkpoint carries
/// the moving-average weights when EMA is enabled.
///
/// All randomness derives from `config.seed`: one stream for minibatch order
/// per epoch, one for step/noise/dropout draws, one for the validation targets.
pub fn finetune(
    initial: Option<&Checkpoint>,
    train: &DatasetManifest,
    val: &DatasetManifest,
    config: &TrainConfig,
) -> Result<Checkpoint, TrainError> {
    config.validate()?;
    let base = match initial {
        Some(c) => c.clone(),
        None => Checkpoint::initialize(train, config)?,
    };
    let items = prepare(train, &base)?;
    if items.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let validation = ValidationSet::new(prepare(val, &base)?, base.schedule.steps(), config.seed);

    let mut state = TrainState::new(base.model.clone(), base.text_encoder.clone(), config);
    let mut history = base.history.clone();
    let first_epoch = history.last().map_or(0, |m| m.epoch);
    let mut last_good = snapshot(&state, &base, config, &history);
    let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(&[&config.seed.to_le_bytes(), b"noise"]));
    let mut order: Vec<usize> = (0..items.len()).collect();

    for epoch in 0..config.epochs {
        state.learning_rate = config.learning_rate_at(epoch);
        let mut shuffle =
            ChaCha8Rng::seed_from_u64(derive_seed(&[&config.seed.to_le_bytes(), b"order", &(epoch as u64).to_le_bytes()]));
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TrainItem> = chunk.iter().map(|&i| items[i].clone()).collect();
            let loss = match training_step(&mut state, &batch, &base.schedule, config, &mut noise) {
                Err(TrainError::NonFiniteLoss { .. }) => {
                    return Err(TrainError::NonFiniteLoss {
                        epoch: first_epoch + epoch + 1,
                        last_good: Some(Box::new(last_good)),
                    })
                }
                other => other?,
            };
            sum += loss;
            batches += 1;
        }
        let mut current = snapshot(&state, &base, config, &history);
        let val_loss = validation.loss(&current)?;
        if val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteLoss {
                epoch: first_epoch + epoch + 1,
                last_good: Some(Box::new(last_good)),
            });
        }
        history.push(EpochMetrics {
            epoch: first_epoch + epoch + 1,
            learning_rate: state.learning_rate,
            train_loss: sum / batches as f64,
            val_loss,
        });
        current.history = history.clone();
        last_good = current;
    }
    Ok(last_good)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_taxonomy, split_manifest, synthesize_corpus, ImageSize, SyntheticCorpusSpec};

    fn data() -> (DatasetManifest, DatasetManifest) {
        let tax = load_taxonomy();
        let corpus = synthesize_corpus(&SyntheticCorpusSpec::standard(2, 10, ImageSize::square(8), 1), &tax).unwrap();
        split_manifest(&corpus, 0.2, 1).unwrap()
    }

    fn config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 4,
            hidden: 16,
            cond_dim: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (train, val) = data();
        let a = finetune(None, &train, &val, &config()).unwrap();
        let b = finetune(None, &train, &val, &config()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = finetune(None, &train, &val, &TrainConfig { seed: 8, ..config() }).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn records_metrics_per_epoch() {
        let (train, val) = data();
        let c = finetune(None, &train, &val, &config()).unwrap();
        assert_eq!(c.history.iter().map(|m| m.epoch).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(c.history.iter().all(|m| m.train_loss.is_finite() && m.val_loss.is_some()));
    }

    #[test]
    fn continues_from_a_checkpoint() {
        let (train, val) = data();
        let base = Checkpoint::initialize(&train, &config()).unwrap();
        let tuned = finetune(Some(&base), &train, &val, &config()).unwrap();
        assert_eq!(tuned.text_encoder.tokens(), base.text_encoder.tokens());
        assert_ne!(tuned.model, base.model);
        let again = finetune(Some(&tuned), &train, &val, &TrainConfig { epochs: 1, ..config() }).unwrap();
        assert_eq!(again.history.last().unwrap().epoch, 4);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let (train, val) = data();
        let base = Checkpoint::initialize(&train, &config()).unwrap();
        let tax = load_taxonomy();
        let other = synthesize_corpus(&SyntheticCorpusSpec::standard(2, 4, ImageSize::square(12), 1), &tax).unwrap();
        assert!(matches!(
            finetune(Some(&base), &other, &val, &config()),
            Err(TrainError::ShapeIncompatibility(_))
        ));
    }

    #[test]
    fn exploding_rate_reports_last_good() {
        let (train, val) = data();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            ema_decay: None,
            ..config()
        };
        match finetune(None, &train, &val, &cfg) {
            Err(TrainError::NonFiniteLoss { last_good, .. }) => {
                let good = last_good.expect("initial snapshot");
                assert!(good.model.parameters().iter().all(|v| v.is_finite()));
            }
            other => panic!("expected non-finite loss, got {:?}", other.map(|c| c.digest())),
        }
    }
}
