//! Scores every class of the synthetic corpus against every keyword with the
//! joint embedder, then measures perceptual distances between classes.
//!
//! cargo run --release --example embedding_metrics

use ttx::dataset::{load_taxonomy, synthesize_corpus, ImageSize, SyntheticCorpusSpec};
use ttx::eval::{clip_similarity, perceptual_loss, ConvFeatureBank, StatisticsEmbedder};
use ttx::Raster;

fn main() -> anyhow::Result<()> {
    let spec = SyntheticCorpusSpec::standard(5, 12, ImageSize::square(32), 7);
    let corpus = synthesize_corpus(&spec, &load_taxonomy())?;
    let keywords = corpus.keywords_present();
    let images = |k: &str| -> Vec<Raster> { corpus.records_with_keyword(k).map(|r| r.image.clone()).collect() };
    let embedder = StatisticsEmbedder::new();
    let bank = ConvFeatureBank::default();

    println!("similarity of class images (rows) to keyword prompts (columns)");
    for row in &keywords {
        let imgs = images(row);
        let scores = keywords
            .iter()
            .map(|col| clip_similarity(&imgs, col, &corpus, &embedder).map(|s| format!("{s:>7.2}")))
            .collect::<Result<Vec<_>, _>>()?;
        println!("{row:<32}{}", scores.join(""));
    }

    println!("\nperceptual loss of each class against the first");
    let reference = images(&keywords[0]);
    for k in &keywords {
        println!("{k:<32}{:>8.3}", perceptual_loss(&images(k), &reference, &bank, 7)?);
    }
    Ok(())
}
