use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::optim::{Adam, Ema};
use super::{TrainConfig, TrainError};
use crate::diffusion::{forward_diffuse, DenoiserModel, NoiseSchedule, TextEncoder, NULL_ROW};

/// Source of the training-time randomness: step indices, dropout coins and noise.
pub trait NoiseSource {
    /// Uniform step in `1..=max`.
    fn timestep(&mut self, max: usize) -> usize;
    /// Uniform in `[0, 1)`.
    fn uniform(&mut self) -> f64;
    fn normal(&mut self) -> f64;
}

impl NoiseSource for ChaCha8Rng {
    fn timestep(&mut self, max: usize) -> usize {
        self.random_range(1..=max)
    }

    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

/// Deterministic stand-in: a fixed step, coins that never fire and a constant noise value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantNoise {
    pub t: usize,
    pub value: f64,
}

impl NoiseSource for ConstantNoise {
    fn timestep(&mut self, max: usize) -> usize {
        self.t.clamp(1, max)
    }

    fn uniform(&mut self) -> f64 {
        1.0 - f64::EPSILON
    }

    fn normal(&mut self) -> f64 {
        self.value
    }
}

/// One training example: a model-space latent and its precomputed token rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub latent: Vec<f64>,
    /// Rows of the full (augmented) caption.
    pub caption_rows: Vec<usize>,
    /// Rows of the keyword-only prompt.
    pub keyword_rows: Vec<usize>,
}

/// Mutable training state: the network, the text table and both optimizers.
pub struct TrainState<M: DenoiserModel> {
    pub model: M,
    pub text_encoder: TextEncoder,
    pub learning_rate: f64,
    model_opt: Adam,
    text_opt: Adam,
    ema: Option<Ema>,
}

impl<M: DenoiserModel> TrainState<M> {
    pub fn new(model: M, text_encoder: TextEncoder, config: &TrainConfig) -> Self {
        let model_opt = Adam::new(model.parameters().len());
        let text_opt = Adam::new(text_encoder.table().len());
        let ema = config.ema_decay.map(|d| {
            let init: Vec<f64> = model.parameters().iter().chain(text_encoder.table()).copied().collect();
            Ema::new(d, &init)
        });
        Self {
            model,
            text_encoder,
            learning_rate: config.learning_rate,
            model_opt,
            text_opt,
            ema,
        }
    }

    pub fn updates(&self) -> u64 {
        self.model_opt.steps()
    }

    /// Parameters to publish: the moving average when enabled, the live values
    /// otherwise. Returned as (denoiser, text table).
    pub fn published(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.ema {
            Some(e) => {
                let n = self.model.parameters().len();
                let v = e.values();
                (v[..n].to_vec(), v[n..].to_vec())
            }
            None => (self.model.parameters().to_vec(), self.text_encoder.table().to_vec()),
        }
    }
}

/// Conditioning matrix whose row `b` is the mean of `rows[b]`.
pub(crate) fn conditioning(encoder: &TextEncoder, rows: &[&[usize]]) -> Array2<f64> {
    let mut cond = Array2::zeros((rows.len(), encoder.dim()));
    for (b, r) in rows.iter().enumerate() {
        cond.row_mut(b).assign(&ndarray::ArrayView1::from(&encoder.mean_of_rows(r)));
    }
    cond
}

/// Mean squared error between two equally shaped matrices.
pub(crate) fn mse(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// One optimizer update on the noise-prediction objective. Returns the batch
/// loss measured before the update.
///
/// Per item, in stream order: a step `t`, the dropout coin, the keyword-prompt
/// coin, then the noise vector.
pub fn training_step<M: DenoiserModel>(
    state: &mut TrainState<M>,
    batch: &[TrainItem],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    noise: &mut dyn NoiseSource,
) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let dim = state.model.latent_dim();
    let b = batch.len();
    let mut x_t = Array2::zeros((b, dim));
    let mut eps = Array2::zeros((b, dim));
    let mut steps = Vec::with_capacity(b);
    let mut rows: Vec<&[usize]> = Vec::with_capacity(b);
    const NULL: &[usize] = &[NULL_ROW];
    for (i, item) in batch.iter().enumerate() {
        if item.latent.len() != dim {
            return Err(TrainError::ShapeIncompatibility(format!(
                "latent has {} values, denoiser expects {dim}",
                item.latent.len()
            )));
        }
        let t = noise.timestep(schedule.steps());
        let drop = noise.uniform() < config.cond_dropout_prob;
        let keyword_only = noise.uniform() < config.keyword_prompt_prob;
        let e: Vec<f64> = (0..dim).map(|_| noise.normal()).collect();
        let xt = forward_diffuse(&item.latent, t, &e, schedule)?;
        x_t.row_mut(i).assign(&ndarray::ArrayView1::from(&xt));
        eps.row_mut(i).assign(&ndarray::ArrayView1::from(&e));
        steps.push(t);
        rows.push(if drop {
            NULL
        } else if keyword_only {
            &item.keyword_rows
        } else {
            &item.caption_rows
        });
    }
    let cond = conditioning(&state.text_encoder, &rows);
    let pred = state.model.predict_noise(x_t.view(), &steps, cond.view());
    let loss = mse(&pred, &eps);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            epoch: 0,
            last_good: None,
        });
    }
    let scale = 2.0 / (b * dim) as f64;
    let grad_out = (&pred - &eps) * scale;
    let (g_params, g_cond) = state.model.backward(x_t.view(), &steps, cond.view(), grad_out.view());

    let lr = state.learning_rate;
    let mut params = state.model.parameters().to_vec();
    state.model_opt.step(&mut params, &g_params, lr);
    state.model.parameters_mut().copy_from_slice(&params);

    if config.train_text_encoder {
        let d = state.text_encoder.dim();
        let mut g_table = vec![0.0; state.text_encoder.table().len()];
        for (bi, r) in rows.iter().enumerate() {
            let w = 1.0 / r.len() as f64;
            for &row in r.iter() {
                for k in 0..d {
                    g_table[row * d + k] += w * g_cond[[bi, k]];
                }
            }
        }
        let mut table = state.text_encoder.table().to_vec();
        state.text_opt.step(&mut table, &g_table, lr);
        state.text_encoder.table_mut().copy_from_slice(&table);
    }

    if let Some(ema) = &mut state.ema {
        let current: Vec<f64> = state
            .model
            .parameters()
            .iter()
            .chain(state.text_encoder.table())
            .copied()
            .collect();
        ema.update(&current);
    }
    Ok(loss)
}
