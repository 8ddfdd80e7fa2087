use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DiffusionError;
use crate::raster::Raster;

/// Maps model-space images to the latent space the denoiser works in.
pub trait LatentCodec {
    fn encode(&self, image: &Raster) -> Result<Raster, DiffusionError>;
    fn decode(&self, latent: &Raster) -> Result<Raster, DiffusionError>;
    /// Image side over latent side.
    fn scale_factor(&self) -> usize;
    fn latent_channels(&self) -> usize;
    /// Reconstruction mean absolute error this codec guarantees on its training data.
    fn tolerance(&self) -> f64;

    fn latent_shape(&self, height: usize, width: usize) -> (usize, usize, usize) {
        let s = self.scale_factor();
        (height / s, width / s, self.latent_channels())
    }
}

/// The codec variants a checkpoint can carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Codec {
    /// Pixel space: latents are the images themselves.
    Identity,
    /// 2x2 average pooling down, nearest-neighbour upsampling back.
    AvgPool2x,
    /// Per-2x2-patch linear autoencoder fitted by principal components.
    Patch2x(PatchCodec),
}

impl Default for Codec {
    fn default() -> Self {
        Codec::Identity
    }
}

impl Codec {
    pub fn name(&self) -> &'static str {
        match self {
            Codec::Identity => "identity",
            Codec::AvgPool2x => "avgpool2x",
            Codec::Patch2x(_) => "patch2x",
        }
    }

    /// Flat learned parameters (empty for the fixed codecs).
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            Codec::Patch2x(p) => p.mean.iter().chain(&p.basis).copied().collect(),
            _ => Vec::new(),
        }
    }
}

fn check_even(image: &Raster) -> Result<(), DiffusionError> {
    if image.height() % 2 != 0 || image.width() % 2 != 0 {
        return Err(DiffusionError::ShapeMismatch {
            expected: image.len() - image.len() % 4,
            actual: image.len(),
        });
    }
    Ok(())
}

fn patches(image: &Raster) -> impl Iterator<Item = (usize, usize, [f64; 12])> + '_ {
    let (h, w) = (image.height() / 2, image.width() / 2);
    (0..h).flat_map(move |py| {
        (0..w).map(move |px| {
            let mut p = [0.0; 12];
            for dy in 0..2 {
                for dx in 0..2 {
                    for c in 0..3 {
                        p[(dy * 2 + dx) * 3 + c] = image.get(py * 2 + dy, px * 2 + dx, c);
                    }
                }
            }
            (py, px, p)
        })
    })
}

/// Linear map from 2x2x3 patches to `channels` latent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCodec {
    pub channels: usize,
    /// Patch mean, 12 values.
    #[serde(skip)]
    pub mean: Vec<f64>,
    /// Row-major `channels x 12` orthonormal basis.
    #[serde(skip)]
    pub basis: Vec<f64>,
    pub tolerance: f64,
}

impl PatchCodec {
    pub const DEFAULT_CHANNELS: usize = 8;

    /// Principal-component fit over all patches of the training images.
    pub fn fit(images: &[Raster], channels: usize) -> Result<Self, DiffusionError> {
        if channels == 0 || channels > 12 {
            return Err(DiffusionError::InvalidRequest(format!("patch codec channels {channels} outside 1..=12")));
        }
        let mut all = Vec::new();
        for img in images {
            check_even(img)?;
            all.extend(patches(img).map(|(_, _, p)| p));
        }
        if all.is_empty() {
            return Err(DiffusionError::InvalidRequest("patch codec needs training images".into()));
        }
        let n = all.len() as f64;
        let mut mean = vec![0.0; 12];
        for p in &all {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(12, 12);
        for p in &all {
            for i in 0..12 {
                for j in 0..12 {
                    cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
                }
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..12).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut basis = Vec::with_capacity(channels * 12);
        for &k in order.iter().take(channels) {
            let col = eig.eigenvectors.column(k);
            // fix the sign so the fit is reproducible
            let sign = if col.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            basis.extend(col.iter().map(|v| f64::from((sign * v) as f32)));
        }
        let mean = mean.into_iter().map(|v| f64::from(v as f32)).collect();
        let mut codec = Self {
            channels,
            mean,
            basis,
            tolerance: 0.0,
        };
        let mut err = 0.0;
        let mut count = 0usize;
        for img in images {
            let rec = codec.decode_impl(&codec.encode_impl(img)?)?;
            err += img.data().iter().zip(rec.data()).map(|(a, b)| (a - b).abs()).sum::<f64>();
            count += img.len();
        }
        codec.tolerance = err / count as f64;
        Ok(codec)
    }

    fn encode_impl(&self, image: &Raster) -> Result<Raster, DiffusionError> {
        check_even(image)?;
        let mut out = Raster::zeros(image.height() / 2, image.width() / 2, self.channels);
        for (py, px, p) in patches(image) {
            for k in 0..self.channels {
                let b = &self.basis[k * 12..(k + 1) * 12];
                let v: f64 = (0..12).map(|i| b[i] * (p[i] - self.mean[i])).sum();
                out.set(py, px, k, v);
            }
        }
        Ok(out)
    }

    fn decode_impl(&self, latent: &Raster) -> Result<Raster, DiffusionError> {
        if latent.channels() != self.channels {
            return Err(DiffusionError::ShapeMismatch {
                expected: self.channels,
                actual: latent.channels(),
            });
        }
        let mut out = Raster::zeros(latent.height() * 2, latent.width() * 2, 3);
        for py in 0..latent.height() {
            for px in 0..latent.width() {
                let mut p = self.mean.clone();
                for k in 0..self.channels {
                    let z = latent.get(py, px, k);
                    for (pi, b) in p.iter_mut().zip(&self.basis[k * 12..(k + 1) * 12]) {
                        *pi += z * b;
                    }
                }
                for dy in 0..2 {
                    for dx in 0..2 {
                        for c in 0..3 {
                            out.set(py * 2 + dy, px * 2 + dx, c, p[(dy * 2 + dx) * 3 + c]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl LatentCodec for Codec {
    fn encode(&self, image: &Raster) -> Result<Raster, DiffusionError> {
        match self {
            Codec::Identity => Ok(image.clone()),
            Codec::AvgPool2x => {
                check_even(image)?;
                let mut out = Raster::zeros(image.height() / 2, image.width() / 2, image.channels());
                for y in 0..out.height() {
                    for x in 0..out.width() {
                        for c in 0..image.channels() {
                            let s = image.get(2 * y, 2 * x, c)
                                + image.get(2 * y, 2 * x + 1, c)
                                + image.get(2 * y + 1, 2 * x, c)
                                + image.get(2 * y + 1, 2 * x + 1, c);
                            out.set(y, x, c, s / 4.0);
                        }
                    }
                }
                Ok(out)
            }
            Codec::Patch2x(p) => p.encode_impl(image),
        }
    }

    fn decode(&self, latent: &Raster) -> Result<Raster, DiffusionError> {
        match self {
            Codec::Identity => Ok(latent.clone()),
            Codec::AvgPool2x => {
                let mut out = Raster::zeros(latent.height() * 2, latent.width() * 2, latent.channels());
                for y in 0..out.height() {
                    for x in 0..out.width() {
                        for c in 0..latent.channels() {
                            out.set(y, x, c, latent.get(y / 2, x / 2, c));
                        }
                    }
                }
                Ok(out)
            }
            Codec::Patch2x(p) => p.decode_impl(latent),
        }
    }

    fn scale_factor(&self) -> usize {
        match self {
            Codec::Identity => 1,
            _ => 2,
        }
    }

    fn latent_channels(&self) -> usize {
        match self {
            Codec::Patch2x(p) => p.channels,
            _ => 3,
        }
    }

    fn tolerance(&self) -> f64 {
        match self {
            Codec::Identity => 0.0,
            // not bounded in general; exact on images that are constant over 2x2 blocks
            Codec::AvgPool2x => f64::INFINITY,
            Codec::Patch2x(p) => p.tolerance,
        }
    }
}

/// Shape-checked encode against the image size a checkpoint expects.
pub fn latent_encode(image: &Raster, codec: &Codec, expected: (usize, usize)) -> Result<Raster, DiffusionError> {
    if (image.height(), image.width(), image.channels()) != (expected.0, expected.1, 3) {
        return Err(DiffusionError::ShapeMismatch {
            expected: expected.0 * expected.1 * 3,
            actual: image.len(),
        });
    }
    codec.encode(image)
}

pub fn latent_decode(latent: &Raster, codec: &Codec) -> Result<Raster, DiffusionError> {
    if latent.channels() != codec.latent_channels() {
        return Err(DiffusionError::ShapeMismatch {
            expected: codec.latent_channels(),
            actual: latent.channels(),
        });
    }
    codec.decode(latent)
}
