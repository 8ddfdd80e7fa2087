use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{DatasetManifest, ImageSize, PatternRecord, RecordSource};
use super::taxonomy::KeywordTaxonomy;
use super::DatasetError;
use crate::raster::Raster;

/// Files and directories that ingestion skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    Undecodable(PathBuf),
    /// A subdirectory whose name resolves to no canonical keyword; its files are skipped.
    UnknownKeywordDirectory(String),
    /// Image sitting directly in the root, outside any keyword directory.
    Unclassified(PathBuf),
    /// Same content hash as an image already ingested.
    Duplicate { path: PathBuf, id: String },
}

impl IngestWarning {
    pub fn as_error(&self) -> Option<DatasetError> {
        match self {
            IngestWarning::UnknownKeywordDirectory(d) => {
                Some(DatasetError::UnknownKeywordDirectory(d.clone()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub manifest: DatasetManifest,
    pub warnings: Vec<IngestWarning>,
}

impl IngestOutcome {
    pub fn undecodable_count(&self) -> usize {
        self.warnings
            .iter()
            .filter(|w| matches!(w, IngestWarning::Undecodable(_)))
            .count()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut entries = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort();
    Ok(entries)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), DatasetError> {
    for p in sorted_entries(dir)? {
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Ingests every decodable image under `dir`, keyworded by its top-level subdirectory name.
///
/// Records get an empty caption; run `caption_records` afterwards.
pub fn ingest_images(
    dir: &Path,
    taxonomy: &KeywordTaxonomy,
    target_size: ImageSize,
) -> Result<IngestOutcome, DatasetError> {
    if target_size.height == 0 || target_size.width == 0 {
        return Err(DatasetError::InvalidSpec(format!("target size {target_size} must be positive")));
    }
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();

    for entry in sorted_entries(dir)? {
        if !entry.is_dir() {
            if Raster::load(&entry).is_ok() {
                warnings.push(IngestWarning::Unclassified(entry));
            } else {
                warnings.push(IngestWarning::Undecodable(entry));
            }
            continue;
        }
        let name = entry
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let Some(keyword) = taxonomy.resolve(&name) else {
            warnings.push(IngestWarning::UnknownKeywordDirectory(name));
            continue;
        };
        let mut files = Vec::new();
        collect_files(&entry, &mut files)?;
        for file in files {
            let decoded = fs::read(&file)
                .ok()
                .and_then(|bytes| image::load_from_memory(&bytes).ok());
            let Some(img) = decoded else {
                warnings.push(IngestWarning::Undecodable(file));
                continue;
            };
            let raster = Raster::resized_from(&img.to_rgb8(), target_size.height, target_size.width);
            let record = PatternRecord::new(raster, String::new(), vec![keyword.to_string()], RecordSource::Ingested);
            if !seen.insert(record.id.clone()) {
                warnings.push(IngestWarning::Duplicate {
                    path: file,
                    id: record.id,
                });
                continue;
            }
            records.push(record);
        }
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(IngestOutcome {
        manifest: DatasetManifest::new(records, taxonomy.clone(), target_size),
        warnings,
    })
}
