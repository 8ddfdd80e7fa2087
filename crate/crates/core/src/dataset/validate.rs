use std::collections::BTreeSet;
use std::fmt;

use super::manifest::{compute_checksum, DatasetManifest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyCaption { id: String },
    NoKeywords { id: String },
    NonCanonicalKeyword { id: String, keyword: String },
    DuplicateId { id: String },
    SizeMismatch { id: String, height: usize, width: usize },
    ChannelMismatch { id: String, channels: usize },
    ValueOutOfRange { id: String },
    ChecksumMismatch { stored: String, computed: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyCaption { id } => write!(f, "{id}: empty caption"),
            Violation::NoKeywords { id } => write!(f, "{id}: no keywords"),
            Violation::NonCanonicalKeyword { id, keyword } => {
                write!(f, "{id}: keyword {keyword:?} is not canonical")
            }
            Violation::DuplicateId { id } => write!(f, "{id}: duplicate record id"),
            Violation::SizeMismatch { id, height, width } => {
                write!(f, "{id}: image is {height}x{width}, manifest size differs")
            }
            Violation::ChannelMismatch { id, channels } => write!(f, "{id}: {channels} channels, expected 3"),
            Violation::ValueOutOfRange { id } => write!(f, "{id}: pixel values outside [0, 1]"),
            Violation::ChecksumMismatch { stored, computed } => {
                write!(f, "checksum mismatch: stored {stored}, computed {computed}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_manifest(manifest: &DatasetManifest) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = BTreeSet::new();
    let size = manifest.image_size;
    for r in &manifest.records {
        let id = || r.id.clone();
        if !ids.insert(&r.id) {
            violations.push(Violation::DuplicateId { id: id() });
        }
        if r.caption.trim().is_empty() {
            violations.push(Violation::EmptyCaption { id: id() });
        }
        if r.keywords.is_empty() {
            violations.push(Violation::NoKeywords { id: id() });
        }
        for k in &r.keywords {
            if !manifest.taxonomy.is_canonical(k) {
                violations.push(Violation::NonCanonicalKeyword {
                    id: id(),
                    keyword: k.clone(),
                });
            }
        }
        if r.image.height() != size.height || r.image.width() != size.width {
            violations.push(Violation::SizeMismatch {
                id: id(),
                height: r.image.height(),
                width: r.image.width(),
            });
        }
        if r.image.channels() != 3 {
            violations.push(Violation::ChannelMismatch {
                id: id(),
                channels: r.image.channels(),
            });
        }
        if r.image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            violations.push(Violation::ValueOutOfRange { id: id() });
        }
    }
    let computed = compute_checksum(&manifest.records);
    if computed != manifest.checksum {
        violations.push(Violation::ChecksumMismatch {
            stored: manifest.checksum.clone(),
            computed,
        });
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_taxonomy, synthesize_corpus, ImageSize, SyntheticCorpusSpec};
    use crate::raster::Raster;

    fn manifest() -> DatasetManifest {
        synthesize_corpus(
            &SyntheticCorpusSpec::standard(3, 4, ImageSize::square(8), 1),
            &load_taxonomy(),
        )
        .unwrap()
    }

    #[test]
    fn valid_synthetic_manifest() {
        assert!(validate_manifest(&manifest()).is_valid());
    }

    #[test]
    fn blank_caption_names_the_record() {
        let mut m = manifest();
        m.records[2].caption.clear();
        // keep the checksum consistent so only the caption is flagged
        m.refresh_checksum();
        let report = validate_manifest(&m);
        assert_eq!(
            report.violations,
            vec![Violation::EmptyCaption {
                id: m.records[2].id.clone()
            }]
        );
    }

    #[test]
    fn corrupted_checksum() {
        let mut m = manifest();
        m.checksum = "0".repeat(64);
        let report = validate_manifest(&m);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::ChecksumMismatch { .. }));
    }

    #[test]
    fn size_and_keyword_violations() {
        let mut m = manifest();
        m.records[0].image = Raster::zeros(4, 8, 3);
        m.records[1].keywords = vec!["Aborigin patterns".into()];
        let report = validate_manifest(&m);
        assert_eq!(report.violations.len(), 2);
        assert!(matches!(report.violations[0], Violation::SizeMismatch { .. }));
        assert!(matches!(report.violations[1], Violation::NonCanonicalKeyword { .. }));
    }
}
