//! Trains on the five-class synthetic corpus and compares the result against
//! its untrained starting point on every class keyword.
//!
//! cargo run --release --example desk_comparison [epochs]

use std::time::Instant;

use ttx::dataset::{load_taxonomy, split_manifest, synthesize_corpus, SyntheticCorpusSpec};
use ttx::eval::{evaluate_pair, render_report, ConvFeatureBank, EvalConfig, ReportFormat, StatisticsEmbedder};
use ttx::train::{finetune, Checkpoint, TrainConfig};

fn main() -> anyhow::Result<()> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let taxonomy = load_taxonomy();
    let corpus = synthesize_corpus(&SyntheticCorpusSpec::desk_scale(7), &taxonomy)?;
    let (train, val) = split_manifest(&corpus, 0.2, 7)?;
    let config = TrainConfig {
        epochs,
        seed: 7,
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let baseline = Checkpoint::initialize(&train, &config)?;
    let tuned = finetune(Some(&baseline), &train, &val, &config)?;
    for m in &tuned.history {
        println!("epoch {:>2}  lr {:.2e}  train {:.4}  val {:.4}", m.epoch, m.learning_rate, m.train_loss, m.val_loss.unwrap_or(f64::NAN));
    }
    println!("trained in {:.1?}", start.elapsed());

    let keywords = corpus.keywords_present();
    let report = evaluate_pair(
        &tuned,
        &baseline,
        &keywords,
        &corpus,
        &EvalConfig::default(),
        &StatisticsEmbedder::new(),
        &ConvFeatureBank::default(),
    )?;
    print!("{}", render_report(&report, ReportFormat::Text));
    println!("candidate wins both metrics on {} of {} keywords ({:.1?} total)", report.wins(), report.rows.len(), start.elapsed());
    Ok(())
}
