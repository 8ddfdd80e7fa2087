use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetManifest, PatternRecord, Split};
use super::DatasetError;
use crate::digest::derive_seed;

/// Number of validation records for a keyword group: round-half-up of
/// `fraction * count`, clamped so both sides keep at least one record.
fn val_count(count: usize, fraction: f64) -> usize {
    let raw = (fraction * count as f64 + 0.5).floor() as usize;
    raw.clamp(1, count - 1)
}

/// Stratified, seeded train/val split. Records are grouped by their primary keyword.
pub fn split_manifest(
    manifest: &DatasetManifest,
    val_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest), DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(val_fraction));
    }
    let mut groups: BTreeMap<String, Vec<&PatternRecord>> = BTreeMap::new();
    for r in &manifest.records {
        let key = r.primary_keyword().unwrap_or_default().to_string();
        groups.entry(key).or_default().push(r);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (keyword, mut group) in groups {
        if group.len() < 2 {
            return Err(DatasetError::TooFewRecords {
                keyword,
                count: group.len(),
            });
        }
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[&seed.to_le_bytes(), keyword.as_bytes()]));
        group.shuffle(&mut rng);
        let n_val = val_count(group.len(), val_fraction);
        for (i, r) in group.into_iter().enumerate() {
            let mut r = r.clone();
            if i < n_val {
                r.split = Split::Val;
                val.push(r);
            } else {
                r.split = Split::Train;
                train.push(r);
            }
        }
    }
    let make = |records| {
        let mut m = DatasetManifest::new(records, manifest.taxonomy.clone(), manifest.image_size);
        m.created_with = manifest.created_with.clone();
        m
    };
    Ok((make(train), make(val)))
}
