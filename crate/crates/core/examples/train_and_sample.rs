//! Fine-tunes a small model on the synthetic corpus, saves the checkpoint,
//! reloads it and samples a few images per keyword.
//!
//! cargo run --release --example train_and_sample [out_dir] [epochs]

use std::path::PathBuf;

use ttx::dataset::{load_taxonomy, split_manifest, synthesize_corpus, ImageSize, SyntheticCorpusSpec};
use ttx::diffusion::{sample, SampleRequest, SamplerKind};
use ttx::train::finetune;
use ttx::{Checkpoint, TrainConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/train-and-sample".into()));
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(8);

    let spec = SyntheticCorpusSpec::standard(3, 40, ImageSize::square(16), 11);
    let corpus = synthesize_corpus(&spec, &load_taxonomy())?;
    let (train, val) = split_manifest(&corpus, 0.1, 11)?;
    let config = TrainConfig {
        epochs,
        hidden: 128,
        ..TrainConfig::default()
    };
    let tuned = finetune(None, &train, &val, &config)?;
    if let Some(last) = tuned.history.last() {
        println!("epoch {} train {:.4} val {:.4}", last.epoch, last.train_loss, last.val_loss.unwrap_or(f64::NAN));
    }

    let path = out.join("model.ckpt");
    tuned.save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    println!("checkpoint {} digest {}", path.display(), loaded.digest());

    for keyword in corpus.keywords_present() {
        let request = SampleRequest {
            count: 2,
            steps: 25,
            sampler: SamplerKind::Ddim { eta: 0.0 },
            ..SampleRequest::new(&keyword, 3)
        };
        for (i, img) in sample(&loaded.sampling_context(), &request)?.iter().enumerate() {
            let file = out.join(format!("{}_{i}.png", keyword.to_lowercase().replace(' ', "_")));
            img.save_png(&file)?;
            println!("wrote {}", file.display());
        }
    }
    Ok(())
}
