#![allow(dead_code)]

use std::path::Path;

use ttx::dataset::{load_taxonomy, render_motif, split_manifest, synthesize_corpus, ImageSize, MotifKind, MotifStyle, SyntheticCorpusSpec};
use ttx::train::{finetune, Checkpoint, TrainConfig};
use ttx::{DatasetManifest, Raster};

pub fn tiny_corpus(per_class: usize, side: usize) -> DatasetManifest {
    synthesize_corpus(&SyntheticCorpusSpec::standard(2, per_class, ImageSize::square(side), 11), &load_taxonomy()).unwrap()
}

pub fn tiny_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        hidden: 32,
        cond_dim: 8,
        ..TrainConfig::default()
    }
}

/// A briefly trained 8x8 checkpoint and its untrained starting point.
pub fn tiny_pair() -> (Checkpoint, Checkpoint) {
    let corpus = tiny_corpus(8, 8);
    let (train, val) = split_manifest(&corpus, 0.25, 11).unwrap();
    let base = Checkpoint::initialize(&train, &tiny_config(2)).unwrap();
    let tuned = finetune(Some(&base), &train, &val, &tiny_config(2)).unwrap();
    (tuned, base)
}

fn motif(kind: MotifKind, fg: [f64; 3], bg: [f64; 3], side: usize) -> Raster {
    let style = MotifStyle {
        foreground: fg,
        background: bg,
        accent: [0.9, 0.9, 0.2],
        shift: (0, 0),
    };
    let size = ImageSize::square(side);
    let mut r = Raster::zeros(side, side, 3);
    for y in 0..side {
        for x in 0..side {
            let c = render_motif(kind, &style, size, y as i64, x as i64);
            for (ch, v) in c.iter().enumerate() {
                r.set(y, x, ch, *v);
            }
        }
    }
    r
}

/// Keyword-named folders of PNG/JPEG images at 40x40 plus one corrupt file,
/// laid out the way a scraped collection would be.
pub fn write_ingest_fixture(root: &Path) {
    let sets = [
        ("Turkish Patterns", MotifKind::Stripes, [0.8, 0.2, 0.2], [0.95, 0.9, 0.8]),
        ("Calico Pattern", MotifKind::Dots, [0.2, 0.3, 0.7], [0.9, 0.9, 0.95]),
        ("floral pattern fabric", MotifKind::FloralBlob, [0.9, 0.4, 0.6], [0.2, 0.4, 0.2]),
    ];
    for (dir, kind, fg, bg) in sets {
        let d = root.join(dir);
        std::fs::create_dir_all(&d).unwrap();
        for i in 0..4 {
            let shade = 0.08 * i as f64;
            let img = motif(kind, fg.map(|v: f64| (v - shade).max(0.0)), bg, 40);
            img.save_png(&d.join(format!("img_{i}.png"))).unwrap();
        }
    }
    std::fs::write(root.join("Turkish Patterns/broken.png"), b"\x89PNG not really").unwrap();
}
