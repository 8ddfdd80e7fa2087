use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{to_model_space, Raster};

/// Multi-layer image features for perceptual comparison.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;
    /// Per-layer feature maps, each channel-normalized.
    fn features(&self, image: &Raster) -> Vec<Raster>;
}

/// Seed the reference kernels are drawn from. Changing it changes every score.
pub const FEATURE_BANK_SEED: u64 = 0x7e47_11e5;
pub const FEATURE_LAYERS: usize = 3;
pub const FEATURE_CHANNELS: usize = 16;

/// Reference extractor: three cyclic 3x3 convolution layers of 16 channels
/// with ReLU and 2x2 average pooling, kernels drawn once from
/// [`FEATURE_BANK_SEED`]. Each layer's output is normalized to unit length
/// across channels at every position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFeatureBank {
    /// Per layer: `out x in x 3 x 3` weights.
    kernels: Vec<Vec<f64>>,
    inputs: Vec<usize>,
}

impl Default for ConvFeatureBank {
    fn default() -> Self {
        Self::new(FEATURE_BANK_SEED)
    }
}

impl ConvFeatureBank {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kernels = Vec::new();
        let mut inputs = Vec::new();
        let mut c_in = 3;
        for _ in 0..FEATURE_LAYERS {
            let std = (2.0 / (9 * c_in) as f64).sqrt();
            let n = Normal::new(0.0, std).expect("positive std");
            kernels.push(
                (0..FEATURE_CHANNELS * c_in * 9)
                    .map(|_| f64::from(n.sample(&mut rng) as f32))
                    .collect(),
            );
            inputs.push(c_in);
            c_in = FEATURE_CHANNELS;
        }
        Self { kernels, inputs }
    }

    fn conv_relu(&self, layer: usize, x: &Raster) -> Raster {
        let c_in = self.inputs[layer];
        let k = &self.kernels[layer];
        let mut out = Raster::zeros(x.height(), x.width(), FEATURE_CHANNELS);
        for y in 0..x.height() as isize {
            for xx in 0..x.width() as isize {
                for o in 0..FEATURE_CHANNELS {
                    let mut acc = 0.0;
                    for i in 0..c_in {
                        for dy in -1..=1isize {
                            for dx in -1..=1isize {
                                let w = k[((o * c_in + i) * 3 + (dy + 1) as usize) * 3 + (dx + 1) as usize];
                                acc += w * x.get_wrapped(y + dy, xx + dx, i);
                            }
                        }
                    }
                    out.set(y as usize, xx as usize, o, acc.max(0.0));
                }
            }
        }
        out
    }
}

fn avg_pool(x: &Raster) -> Raster {
    if x.height() < 2 || x.width() < 2 {
        return x.clone();
    }
    let mut out = Raster::zeros(x.height() / 2, x.width() / 2, x.channels());
    for y in 0..out.height() {
        for xx in 0..out.width() {
            for c in 0..x.channels() {
                let s = x.get(2 * y, 2 * xx, c)
                    + x.get(2 * y + 1, 2 * xx, c)
                    + x.get(2 * y, 2 * xx + 1, c)
                    + x.get(2 * y + 1, 2 * xx + 1, c);
                out.set(y, xx, c, s / 4.0);
            }
        }
    }
    out
}

/// Scales the channel vector at every position to unit length.
pub fn channel_normalize(x: &Raster) -> Raster {
    let c = x.channels();
    let mut out = x.clone();
    for px in out.data_mut().chunks_mut(c) {
        let n = px.iter().map(|v| v * v).sum::<f64>().sqrt();
        px.iter_mut().for_each(|v| *v /= n + 1e-10);
    }
    out
}

impl FeatureExtractor for ConvFeatureBank {
    fn name(&self) -> &str {
        "conv-bank-v1"
    }

    fn features(&self, image: &Raster) -> Vec<Raster> {
        let mut x = to_model_space(image);
        let mut layers = Vec::with_capacity(FEATURE_LAYERS);
        for l in 0..FEATURE_LAYERS {
            x = avg_pool(&self.conv_relu(l, &x));
            layers.push(channel_normalize(&x));
        }
        layers
    }
}
