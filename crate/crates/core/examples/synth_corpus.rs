//! Builds the seeded synthetic corpus, checks it, and writes it to disk.
//!
//! cargo run --example synth_corpus [out_dir] [classes] [per_class] [size]

use std::path::PathBuf;

use ttx::dataset::{load_taxonomy, synthesize_corpus, validate_manifest, ImageSize, SyntheticCorpusSpec};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/synth-corpus".into()));
    let classes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let per_class: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let size: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(32);

    let taxonomy = load_taxonomy();
    let spec = SyntheticCorpusSpec::standard(classes, per_class, ImageSize::square(size), 7);
    let corpus = synthesize_corpus(&spec, &taxonomy)?;
    for class in &spec.classes {
        let n = corpus.records_with_keyword(&class.keyword).count();
        println!("{:<32} {:<12} {n} images", class.keyword, class.class_name);
    }
    let report = validate_manifest(&corpus);
    println!("violations: {}", report.violations.len());
    let file = corpus.save(&out)?;
    println!("manifest {} (checksum {})", file.display(), corpus.checksum);
    Ok(())
}
