use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use super::EvalError;
use crate::dataset::DatasetManifest;
use crate::raster::Raster;

/// Maps images and keywords into one space where cosine similarity is meaningful.
pub trait JointEmbedder: Send + Sync {
    fn name(&self) -> &str;
    /// Unit vector for a storage-space image.
    fn embed_image(&self, image: &Raster) -> Vec<f64>;
    /// Unit vector for a canonical keyword, grounded in `reference`.
    fn embed_text(&self, keyword: &str, reference: &DatasetManifest) -> Result<Vec<f64>, EvalError>;
}

pub const EMBEDDING_DIM: usize = 30;
const ORIENTATION_BINS: usize = 8;
const MAX_LAG: usize = 8;

/// Divisors applied before normalization, one per feature group.
const MEAN_SCALE: f64 = 0.5;
const STD_SCALE: f64 = 0.25;
const HIST_SCALE: f64 = 1.0 / ORIENTATION_BINS as f64;
const AUTOCORR_SCALE: f64 = 1.0;

pub fn l2_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Magnitude-weighted histogram of unsigned gradient orientation over luma,
/// using cyclic central differences. Bin 0 is centred on horizontal gradients
/// (`gy = 0`). A gradient-free image yields the uniform histogram.
pub fn orientation_histogram(image: &Raster) -> [f64; ORIENTATION_BINS] {
    let luma = image.luma();
    let (h, w) = (luma.height() as isize, luma.width() as isize);
    let mut hist = [0.0; ORIENTATION_BINS];
    let width = PI / ORIENTATION_BINS as f64;
    for y in 0..h {
        for x in 0..w {
            let gx = luma.get_wrapped(y, x + 1, 0) - luma.get_wrapped(y, x - 1, 0);
            let gy = luma.get_wrapped(y + 1, x, 0) - luma.get_wrapped(y - 1, x, 0);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(PI);
            let bin = ((theta + width / 2.0) / width).floor() as usize % ORIENTATION_BINS;
            hist[bin] += mag;
        }
    }
    let total: f64 = hist.iter().sum();
    if total == 0.0 {
        return [1.0 / ORIENTATION_BINS as f64; ORIENTATION_BINS];
    }
    hist.map(|v| v / total)
}

/// Cyclic luma autocorrelation at lags `1..=8` along rows then along columns,
/// normalized by the variance (zero for a flat image).
pub fn autocorrelations(image: &Raster) -> [f64; 2 * MAX_LAG] {
    let luma = image.luma();
    let n = luma.len() as f64;
    let mean = luma.data().iter().sum::<f64>() / n;
    let var = luma.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut out = [0.0; 2 * MAX_LAG];
    if var <= 1e-12 {
        return out;
    }
    let (h, w) = (luma.height() as isize, luma.width() as isize);
    for lag in 1..=MAX_LAG as isize {
        let (mut along_x, mut along_y) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let c = luma.get_wrapped(y, x, 0) - mean;
                along_x += c * (luma.get_wrapped(y, x + lag, 0) - mean);
                along_y += c * (luma.get_wrapped(y + lag, x, 0) - mean);
            }
        }
        out[lag as usize - 1] = along_x / n / var;
        out[MAX_LAG + lag as usize - 1] = along_y / n / var;
    }
    out
}

/// The 30 raw statistics: channel means (3), channel standard deviations (3),
/// orientation histogram (8) and row/column autocorrelations (16).
pub fn raw_features(image: &Raster) -> Vec<f64> {
    let c = image.channels();
    let n = (image.height() * image.width()) as f64;
    let mut means = vec![0.0; 3];
    let mut stds = vec![0.0; 3];
    for ch in 0..3 {
        let src = ch.min(c - 1);
        let vals = image.data().iter().skip(src).step_by(c);
        let m = vals.clone().sum::<f64>() / n;
        means[ch] = m;
        stds[ch] = (vals.map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    }
    let mut out = Vec::with_capacity(EMBEDDING_DIM);
    out.extend(means.iter().map(|v| v / MEAN_SCALE));
    out.extend(stds.iter().map(|v| v / STD_SCALE));
    out.extend(orientation_histogram(image).iter().map(|v| v / HIST_SCALE));
    out.extend(autocorrelations(image).iter().map(|v| v / AUTOCORR_SCALE));
    out
}

/// Reference embedder: hand-crafted colour, orientation and periodicity
/// statistics. A keyword embeds as the normalized centroid of its reference
/// images, cached per (manifest checksum, keyword).
#[derive(Default)]
pub struct StatisticsEmbedder {
    cache: Mutex<BTreeMap<(String, String), Vec<f64>>>,
}

impl StatisticsEmbedder {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Normalized mean of `embed` over the records tagged with `keyword`.
pub fn centroid_embedding(
    keyword: &str,
    reference: &DatasetManifest,
    embed: impl Fn(&Raster) -> Vec<f64>,
) -> Result<Vec<f64>, EvalError> {
    if !reference.taxonomy.is_canonical(keyword) {
        return Err(EvalError::UnknownKeyword(keyword.to_string()));
    }
    let mut sum: Option<Vec<f64>> = None;
    for r in reference.records_with_keyword(keyword) {
        let e = embed(&r.image);
        match &mut sum {
            Some(s) => s.iter_mut().zip(&e).for_each(|(a, b)| *a += b),
            None => sum = Some(e),
        }
    }
    let mut v = sum.ok_or_else(|| EvalError::NoRecordsForKeyword(keyword.to_string()))?;
    l2_normalize(&mut v);
    Ok(v)
}

impl JointEmbedder for StatisticsEmbedder {
    fn name(&self) -> &str {
        "statistics-v1"
    }

    fn embed_image(&self, image: &Raster) -> Vec<f64> {
        let mut v = raw_features(image);
        l2_normalize(&mut v);
        v
    }

    fn embed_text(&self, keyword: &str, reference: &DatasetManifest) -> Result<Vec<f64>, EvalError> {
        let key = (reference.checksum.clone(), keyword.to_string());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = centroid_embedding(keyword, reference, |img| self.embed_image(img))?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}
