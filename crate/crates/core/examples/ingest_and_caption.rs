//! Ingests a folder tree of images (one subfolder per keyword), captions it
//! with the template captioner, augments the captions and validates.
//!
//! cargo run --example ingest_and_caption <image_dir> [out_dir] [size]

use std::path::PathBuf;

use anyhow::Context;
use ttx::dataset::{augment_manifest, caption_records, ingest_images, load_taxonomy, validate_manifest, ImageSize, TemplateCaptioner};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().context("usage: ingest_and_caption <image_dir> [out_dir] [size]")?);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/ingested".into()));
    let size: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(32);

    let outcome = ingest_images(&dir, &load_taxonomy(), ImageSize::square(size))?;
    for w in &outcome.warnings {
        eprintln!("warning: {w:?}");
    }
    let captioned = caption_records(&outcome.manifest, &TemplateCaptioner)?;
    let manifest = augment_manifest(&captioned)?;
    for r in manifest.records.iter().take(3) {
        println!("{}  {:?}  {}", &r.id[..12.min(r.id.len())], r.keywords, r.caption);
    }
    let report = validate_manifest(&manifest);
    println!("{} records, {} violations", manifest.len(), report.violations.len());
    manifest.save(&out)?;
    Ok(())
}
