use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::taxonomy::KeywordTaxonomy;
use super::DatasetError;
use crate::digest::sha256_hex;
use crate::raster::Raster;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE_NAME: &str = "manifest.jsonl";
pub const TOOL_VERSION: &str = concat!("ttx ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Ingested,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Unassigned,
    Train,
    Val,
}

/// Height and width shared by every image of a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub height: usize,
    pub width: usize,
}

impl ImageSize {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn square(side: usize) -> Self {
        Self::new(side, side)
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRecord {
    pub id: String,
    pub image: Raster,
    pub caption: String,
    /// Canonical keywords in taxonomy order.
    pub keywords: Vec<String>,
    pub source: RecordSource,
    pub split: Split,
}

/// Content hash of an image: SHA-256 over its shape and 8-bit pixel values.
pub fn content_id(image: &Raster) -> String {
    let mut bytes = Vec::with_capacity(image.len() + 24);
    for dim in [image.height(), image.width(), image.channels()] {
        bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    }
    bytes.extend(image.quantized_bytes());
    sha256_hex(&bytes)[..32].to_string()
}

impl PatternRecord {
    /// Builds a record whose id is derived from the (quantized) image content.
    pub fn new(
        image: Raster,
        caption: impl Into<String>,
        keywords: Vec<String>,
        source: RecordSource,
    ) -> Self {
        let image = image.quantize();
        Self {
            id: content_id(&image),
            image,
            caption: caption.into(),
            keywords,
            source,
            split: Split::Unassigned,
        }
    }

    /// Keyword used for stratification and grouping: the first in taxonomy order.
    pub fn primary_keyword(&self) -> Option<&str> {
        self.keywords.first().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<PatternRecord>,
    pub taxonomy: KeywordTaxonomy,
    pub image_size: ImageSize,
    pub checksum: String,
    pub created_with: String,
}

/// Digest over `(id, caption)` of every record, sorted by id.
pub fn compute_checksum(records: &[PatternRecord]) -> String {
    let mut pairs: Vec<(&str, &str)> = records
        .iter()
        .map(|r| (r.id.as_str(), r.caption.as_str()))
        .collect();
    pairs.sort_unstable();
    let mut buf = Vec::new();
    for (id, caption) in pairs {
        buf.extend_from_slice(id.as_bytes());
        buf.push(0x1f);
        buf.extend_from_slice(caption.as_bytes());
        buf.push(b'\n');
    }
    sha256_hex(&buf)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    version: u32,
    image_size: ImageSize,
    checksum: String,
    taxonomy: KeywordTaxonomy,
    created_with: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    caption: String,
    keywords: Vec<String>,
    source: RecordSource,
    split: Split,
    image_path: String,
}

/// Resolves a manifest location: either a `.jsonl` file or a directory holding `manifest.jsonl`.
pub fn manifest_file(path: &Path) -> PathBuf {
    let is_file_like = path.extension().is_some_and(|e| e == "jsonl" || e == "json");
    if is_file_like && !path.is_dir() {
        path.to_path_buf()
    } else {
        path.join(MANIFEST_FILE_NAME)
    }
}

impl DatasetManifest {
    /// Sorts records by id and stamps a fresh checksum.
    pub fn new(mut records: Vec<PatternRecord>, taxonomy: KeywordTaxonomy, image_size: ImageSize) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let checksum = compute_checksum(&records);
        Self {
            records,
            taxonomy,
            image_size,
            checksum,
            created_with: TOOL_VERSION.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn refresh_checksum(&mut self) {
        self.checksum = compute_checksum(&self.records);
    }

    pub fn records_with_keyword<'a>(&'a self, keyword: &'a str) -> impl Iterator<Item = &'a PatternRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.keywords.iter().any(|k| k == keyword))
    }

    /// Canonical keywords present in the manifest, in taxonomy order.
    pub fn keywords_present(&self) -> Vec<String> {
        self.taxonomy
            .keywords()
            .iter()
            .filter(|k| self.records_with_keyword(k).next().is_some())
            .cloned()
            .collect()
    }

    /// Writes `manifest.jsonl` plus `images/<id>.png`. `path` may be a directory or a `.jsonl` file.
    /// Returns the manifest file path.
    pub fn save(&self, path: &Path) -> Result<PathBuf, DatasetError> {
        let file = manifest_file(path);
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let images_dir = root.join("images");
        fs::create_dir_all(&images_dir)?;

        let mut out = Vec::new();
        let header = HeaderLine {
            version: MANIFEST_VERSION,
            image_size: self.image_size,
            checksum: self.checksum.clone(),
            taxonomy: self.taxonomy.clone(),
            created_with: self.created_with.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.push(b'\n');
        for r in &self.records {
            let rel = format!("images/{}.png", r.id);
            r.image.save_png(&root.join(&rel))?;
            let line = RecordLine {
                id: r.id.clone(),
                caption: r.caption.clone(),
                keywords: r.keywords.clone(),
                source: r.source,
                split: r.split,
                image_path: rel,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.push(b'\n');
        }
        let mut f = fs::File::create(&file)?;
        f.write_all(&out)?;
        Ok(file)
    }

    /// Reads a manifest written by [`DatasetManifest::save`]. The stored checksum is kept
    /// as-is; use `validate_manifest` to check it.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = manifest_file(path);
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let reader = BufReader::new(fs::File::open(&file)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| DatasetError::MalformedManifest("missing header line".into()))??;
        let header: HeaderLine = serde_json::from_str(&header_line)?;
        if header.version != MANIFEST_VERSION {
            return Err(DatasetError::MalformedManifest(format!(
                "unsupported manifest version {}",
                header.version
            )));
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine = serde_json::from_str(&line)?;
            let image = Raster::load(&root.join(&rec.image_path))?;
            records.push(PatternRecord {
                id: rec.id,
                image,
                caption: rec.caption,
                keywords: rec.keywords,
                source: rec.source,
                split: rec.split,
            });
        }
        Ok(Self {
            records,
            taxonomy: header.taxonomy,
            image_size: header.image_size,
            checksum: header.checksum,
            created_with: header.created_with,
        })
    }
}
