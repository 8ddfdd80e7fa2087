use super::manifest::DatasetManifest;
use super::taxonomy::KeywordTaxonomy;
use super::DatasetError;

pub const AUGMENT_SUFFIX: &str = "textile pattern";

/// Appends keywords (taxonomy order) and the constant suffix to a caption:
/// `"{caption}, {k1}, {k2}, ..., textile pattern"`.
///
/// A caption that already carries exactly this tail is returned unchanged.
pub fn augment_caption(
    caption: &str,
    keywords: &[String],
    taxonomy: &KeywordTaxonomy,
) -> Result<String, DatasetError> {
    let ordered = taxonomy
        .ordered(keywords)
        .map_err(DatasetError::NonCanonicalKeyword)?;
    let mut tail = String::new();
    for k in &ordered {
        tail.push_str(", ");
        tail.push_str(k);
    }
    tail.push_str(", ");
    tail.push_str(AUGMENT_SUFFIX);
    if caption.ends_with(&tail) {
        return Ok(caption.to_string());
    }
    Ok(format!("{caption}{tail}"))
}

/// Applies [`augment_caption`] to every record and refreshes the checksum.
pub fn augment_manifest(manifest: &DatasetManifest) -> Result<DatasetManifest, DatasetError> {
    let mut out = manifest.clone();
    for r in &mut out.records {
        r.caption = augment_caption(&r.caption, &r.keywords, &manifest.taxonomy)?;
    }
    out.refresh_checksum();
    Ok(out)
}
