use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::codec::{Codec, LatentCodec};
use super::denoiser::DenoiserModel;
use super::process::{cfg_combine, ddim_step, ddpm_step};
use super::schedule::NoiseSchedule;
use super::text::TextEncoder;
use super::DiffusionError;
use crate::dataset::{ImageSize, KeywordTaxonomy};
use crate::raster::{to_storage_space, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerKind {
    /// Generalized step; `eta = 0` is fully deterministic given `x_T`.
    Ddim { eta: f64 },
    /// Ancestral sampling. With fewer steps than `T` the strided chain uses the
    /// DDIM step at `eta = 1`, which matches the ancestral variance at stride 1.
    Ddpm,
}

impl Default for SamplerKind {
    fn default() -> Self {
        SamplerKind::Ddim { eta: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    pub prompt: String,
    pub seed: u64,
    pub steps: usize,
    pub guidance: f64,
    pub count: usize,
    #[serde(default)]
    pub sampler: SamplerKind,
}

impl SampleRequest {
    pub fn new(prompt: impl Into<String>, seed: u64) -> Self {
        Self {
            prompt: prompt.into(),
            seed,
            steps: 50,
            guidance: 3.0,
            count: 1,
            sampler: SamplerKind::default(),
        }
    }
}

/// Everything a checkpoint contributes to sampling.
pub struct SamplingContext<'a> {
    pub model: &'a dyn DenoiserModel,
    pub schedule: &'a NoiseSchedule,
    pub codec: &'a Codec,
    pub text_encoder: &'a TextEncoder,
    pub taxonomy: &'a KeywordTaxonomy,
    pub image_size: ImageSize,
}

impl SamplingContext<'_> {
    fn latent_shape(&self) -> (usize, usize, usize) {
        self.codec.latent_shape(self.image_size.height, self.image_size.width)
    }

    fn check(&self) -> Result<(), DiffusionError> {
        let (h, w, c) = self.latent_shape();
        if self.model.latent_dim() != h * w * c {
            return Err(DiffusionError::IncompatibleCheckpoint(format!(
                "denoiser expects {} latent values, codec produces {}",
                self.model.latent_dim(),
                h * w * c
            )));
        }
        if self.model.cond_dim() != self.text_encoder.dim() {
            return Err(DiffusionError::IncompatibleCheckpoint(format!(
                "denoiser expects conditioning of width {}, text encoder gives {}",
                self.model.cond_dim(),
                self.text_encoder.dim()
            )));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generates `request.count` storage-space images for a prompt.
///
/// A dedicated ChaCha stream seeded with `request.seed` supplies `x_T` and any
/// sampler noise, so the output is a pure function of the context and request.
pub fn sample(ctx: &SamplingContext<'_>, request: &SampleRequest) -> Result<Vec<Raster>, DiffusionError> {
    ctx.check()?;
    if request.count == 0 {
        return Err(DiffusionError::InvalidRequest("count must be at least 1".into()));
    }
    if !(request.guidance >= 0.0 && request.guidance.is_finite()) {
        return Err(DiffusionError::InvalidRequest(format!(
            "guidance {} must be finite and >= 0",
            request.guidance
        )));
    }
    if let SamplerKind::Ddim { eta } = request.sampler {
        if !(0.0..=1.0).contains(&eta) {
            return Err(DiffusionError::InvalidRequest(format!("eta {eta} outside [0, 1]")));
        }
    }
    let steps = ctx.schedule.strided_steps(request.steps)?;
    let full_chain = steps.len() == ctx.schedule.steps();
    let (lh, lw, lc) = ctx.latent_shape();
    let dim = lh * lw * lc;
    let n = request.count;

    let null = ctx.text_encoder.null_embedding();
    let prompt = ctx.text_encoder.encode(&request.prompt, ctx.taxonomy);
    let mut cond = Array2::zeros((2 * n, ctx.text_encoder.dim()));
    for i in 0..n {
        cond.row_mut(i).assign(&ndarray::ArrayView1::from(&null.values));
        cond.row_mut(n + i).assign(&ndarray::ArrayView1::from(&prompt.values));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    let mut x = Array2::from_shape_vec((n, dim), draw(&mut rng, n * dim)).expect("latent batch");

    for (k, &t) in steps.iter().enumerate() {
        let t_prev = steps.get(k + 1).copied().unwrap_or(0);
        let mut doubled = Array2::zeros((2 * n, dim));
        doubled.slice_mut(s![..n, ..]).assign(&x);
        doubled.slice_mut(s![n.., ..]).assign(&x);
        let eps = ctx.model.predict_noise(doubled.view(), &vec![t; 2 * n], cond.view());
        let mut next = Array2::zeros((n, dim));
        for i in 0..n {
            let eps_u = eps.row(i).to_vec();
            let eps_c = eps.row(n + i).to_vec();
            let guided = cfg_combine(&eps_u, &eps_c, request.guidance)?;
            let xi = x.row(i).to_vec();
            let stepped = match request.sampler {
                SamplerKind::Ddpm if full_chain => {
                    let noise = if t > 1 { draw(&mut rng, dim) } else { Vec::new() };
                    ddpm_step(&xi, &guided, t, ctx.schedule, &noise)?
                }
                SamplerKind::Ddpm => {
                    let noise = draw(&mut rng, dim);
                    ddim_step(&xi, &guided, t, t_prev, ctx.schedule, 1.0, &noise)?
                }
                SamplerKind::Ddim { eta } => {
                    let noise = if eta > 0.0 { draw(&mut rng, dim) } else { Vec::new() };
                    ddim_step(&xi, &guided, t, t_prev, ctx.schedule, eta, &noise)?
                }
            };
            next.row_mut(i).assign(&ndarray::ArrayView1::from(&stepped));
        }
        x = next;
    }

    x.rows()
        .into_iter()
        .map(|row| {
            let latent = Raster::from_vec(lh, lw, lc, row.to_vec());
            let image = ctx.codec.decode(&latent)?;
            Ok(to_storage_space(&image))
        })
        .collect()
}
