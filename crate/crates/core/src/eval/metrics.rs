use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EvalError, FeatureExtractor, JointEmbedder};
use crate::dataset::DatasetManifest;
use crate::raster::Raster;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `100 x` the mean cosine between each image embedding and the keyword embedding.
pub fn clip_similarity(
    images: &[Raster],
    keyword: &str,
    reference: &DatasetManifest,
    embedder: &dyn JointEmbedder,
) -> Result<f64, EvalError> {
    if images.is_empty() {
        return Err(EvalError::EmptyImageSet);
    }
    let text = embedder.embed_text(keyword, reference)?;
    let total: f64 = images.iter().map(|img| dot(&embedder.embed_image(img), &text)).sum();
    Ok(100.0 * total / images.len() as f64)
}

/// Mean over layers of the mean squared difference between two feature stacks.
pub fn feature_distance(a: &[Raster], b: &[Raster]) -> f64 {
    assert_eq!(a.len(), b.len(), "layer count");
    let per_layer: f64 = a
        .iter()
        .zip(b)
        .map(|(la, lb)| {
            assert_eq!(la.len(), lb.len(), "layer shape");
            la.data().iter().zip(lb.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / la.len() as f64
        })
        .sum();
    per_layer / a.len() as f64
}

/// Base image index for each generated image: distinct draws when there are
/// enough base images, uniform with replacement otherwise.
pub fn pair_indices(generated: usize, base: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if base >= generated {
        sample(&mut rng, base, generated).into_vec()
    } else {
        (0..generated).map(|_| rng.random_range(0..base)).collect()
    }
}

/// `100 x` the mean feature distance between each generated image and its randomly drawn base image.
pub fn perceptual_loss(
    generated: &[Raster],
    base: &[Raster],
    extractor: &dyn FeatureExtractor,
    pairing_seed: u64,
) -> Result<f64, EvalError> {
    if generated.is_empty() || base.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let pairs = pair_indices(generated.len(), base.len(), pairing_seed);
    let mut base_features: Vec<Option<Vec<Raster>>> = vec![None; base.len()];
    let mut total = 0.0;
    for (g, &j) in generated.iter().zip(&pairs) {
        let fg = extractor.features(g);
        let fb = base_features[j].get_or_insert_with(|| extractor.features(&base[j]));
        total += feature_distance(&fg, fb);
    }
    Ok(100.0 * total / generated.len() as f64)
}
