use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::augment_caption;
use super::manifest::{DatasetManifest, ImageSize, PatternRecord, RecordSource};
use super::taxonomy::KeywordTaxonomy;
use super::DatasetError;
use crate::digest::derive_seed;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifKind {
    Stripes,
    Dots,
    Checker,
    FloralBlob,
    Zigzag,
}

impl MotifKind {
    pub const ALL: [MotifKind; 5] = [
        MotifKind::Stripes,
        MotifKind::Dots,
        MotifKind::Checker,
        MotifKind::FloralBlob,
        MotifKind::Zigzag,
    ];

    fn default_class_name(self) -> &'static str {
        match self {
            MotifKind::Stripes => "striped",
            MotifKind::Dots => "polka dot",
            MotifKind::Checker => "checkered",
            MotifKind::FloralBlob => "floral",
            MotifKind::Zigzag => "zigzag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusClass {
    pub class_name: String,
    pub keyword: String,
    pub palette_seed: u64,
    pub motif: MotifKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub classes: Vec<CorpusClass>,
    pub per_class_count: usize,
    pub image_size: ImageSize,
    pub seed: u64,
}

/// Keywords assigned to generated classes, in class order.
const CLASS_KEYWORDS: [&str; 15] = [
    "Turkish Patterns",
    "Calico Patterns",
    "Traditional Japanese Patterns",
    "Floral Pattern Fabric",
    "African Pattern Fabric",
    "Allover patterns",
    "Abstract Patterns",
    "Animal Patterns Printed",
    "Ottoman Embroidery Patterns",
    "Indian Fabric Patterns",
    "Iranian Rug pattern",
    "Oriental patterns",
    "Aboriginal Patterns",
    "Vintage Fabric Patterns",
    "Art Nouveau pattern",
];

impl SyntheticCorpusSpec {
    /// `num_classes` classes (at most 15), one motif kind per class in rotation.
    pub fn standard(num_classes: usize, per_class_count: usize, image_size: ImageSize, seed: u64) -> Self {
        let classes = (0..num_classes.min(CLASS_KEYWORDS.len()))
            .map(|i| {
                let motif = MotifKind::ALL[i % MotifKind::ALL.len()];
                let round = i / MotifKind::ALL.len();
                let class_name = if round == 0 {
                    motif.default_class_name().to_string()
                } else {
                    format!("{} variant {}", motif.default_class_name(), round + 1)
                };
                CorpusClass {
                    class_name,
                    keyword: CLASS_KEYWORDS[i].to_string(),
                    palette_seed: 1000 + i as u64,
                    motif,
                }
            })
            .collect();
        Self {
            classes,
            per_class_count,
            image_size,
            seed,
        }
    }

    /// The five-class, 100-per-class, 32x32 desk-scale corpus.
    pub fn desk_scale(seed: u64) -> Self {
        Self::standard(5, 100, ImageSize::square(32), seed)
    }

    fn validate(&self, taxonomy: &KeywordTaxonomy) -> Result<(), DatasetError> {
        let invalid = |m: String| Err(DatasetError::InvalidSpec(m));
        if self.classes.is_empty() {
            return invalid("at least one class is required".into());
        }
        if self.per_class_count == 0 {
            return invalid("per_class_count must be positive".into());
        }
        if self.image_size.height < 4 || self.image_size.width < 4 {
            return invalid(format!("image size {} is below 4x4", self.image_size));
        }
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            if !taxonomy.is_canonical(&c.keyword) {
                return invalid(format!("class {:?} has non-canonical keyword {:?}", c.class_name, c.keyword));
            }
            if !seen.insert(&c.keyword) {
                return invalid(format!("keyword {:?} used by more than one class", c.keyword));
            }
            if c.class_name.trim().is_empty() {
                return invalid("class names must be non-empty".into());
            }
        }
        Ok(())
    }
}

/// Colours and offsets for one rendered image.
#[derive(Debug, Clone, Copy)]
pub struct MotifStyle {
    pub foreground: [f64; 3],
    pub background: [f64; 3],
    pub accent: [f64; 3],
    pub shift: (i64, i64),
}

fn luma(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn class_palette(seed: u64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let fg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
        let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
        let accent: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.9));
        if (luma(fg) - luma(bg)).abs() > 0.35 {
            return (fg, bg, accent);
        }
    }
}

/// Position inside a repeat of `cycles` periods across `len` pixels, in `[0, 1)`.
fn phase(coord: i64, len: i64, cycles: i64) -> f64 {
    (coord.rem_euclid(len) * cycles).rem_euclid(len) as f64 / len as f64
}

/// Colour of the motif at integer coordinates `(y, x)`.
///
/// Coordinates are reduced modulo the image size first, so the motif field has
/// period `(height, width)` and any rendered image tiles seamlessly.
pub fn render_motif(kind: MotifKind, style: &MotifStyle, size: ImageSize, y: i64, x: i64) -> [f64; 3] {
    let (h, w) = (size.height as i64, size.width as i64);
    let y = (y + style.shift.0).rem_euclid(h);
    let x = (x + style.shift.1).rem_euclid(w);
    let fg = style.foreground;
    let bg = style.background;
    match kind {
        MotifKind::Stripes => {
            let p = phase(x, w, 4);
            if p < 0.5 {
                fg
            } else {
                bg
            }
        }
        MotifKind::Dots => {
            let (py, px) = (phase(y, h, 4) - 0.5, phase(x, w, 4) - 0.5);
            if py * py + px * px < 0.3 * 0.3 {
                fg
            } else {
                bg
            }
        }
        MotifKind::Checker => {
            let a = phase(y, h, 4) < 0.5;
            let b = phase(x, w, 4) < 0.5;
            if a ^ b {
                fg
            } else {
                bg
            }
        }
        MotifKind::FloralBlob => {
            let (py, px) = (phase(y, h, 2) - 0.5, phase(x, w, 2) - 0.5);
            let r = (py * py + px * px).sqrt();
            let theta = py.atan2(px);
            let petal = 0.26 * (1.0 + 0.45 * (5.0 * theta).cos());
            if r < 0.08 {
                style.accent
            } else if r < petal {
                fg
            } else {
                bg
            }
        }
        MotifKind::Zigzag => {
            let tri = {
                let p = phase(x, w, 4);
                if p < 0.5 {
                    p * 2.0
                } else {
                    2.0 - p * 2.0
                }
            };
            let yy = y as f64 / h as f64 + 0.12 * tri;
            let band = (yy * 4.0).rem_euclid(1.0);
            if band < 0.5 {
                fg
            } else {
                bg
            }
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, c: [f64; 3]) -> [f64; 3] {
    c.map(|v| (v + rng.random_range(-0.04..0.04)).clamp(0.0, 1.0))
}

fn render(kind: MotifKind, style: &MotifStyle, size: ImageSize) -> Raster {
    let mut img = Raster::zeros(size.height, size.width, 3);
    for y in 0..size.height {
        for x in 0..size.width {
            let c = render_motif(kind, style, size, y as i64, x as i64);
            for (ch, v) in c.iter().enumerate() {
                img.set(y, x, ch, *v);
            }
        }
    }
    img
}

/// Generates `per_class_count` seeded, exactly tileable images per class.
pub fn synthesize_corpus(
    spec: &SyntheticCorpusSpec,
    taxonomy: &KeywordTaxonomy,
) -> Result<DatasetManifest, DatasetError> {
    spec.validate(taxonomy)?;
    let mut records = Vec::with_capacity(spec.classes.len() * spec.per_class_count);
    let mut ids = BTreeSet::new();
    for (ci, class) in spec.classes.iter().enumerate() {
        let (fg, bg, accent) = class_palette(class.palette_seed);
        let caption = augment_caption(
            &format!("a seamless {} textile pattern", class.class_name),
            std::slice::from_ref(&class.keyword),
            taxonomy,
        )?;
        for i in 0..spec.per_class_count {
            let mut attempt = 0u64;
            loop {
                let seed = derive_seed(&[
                    &spec.seed.to_le_bytes(),
                    &(ci as u64).to_le_bytes(),
                    &(i as u64).to_le_bytes(),
                    &attempt.to_le_bytes(),
                ]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let style = MotifStyle {
                    foreground: jitter(&mut rng, fg),
                    background: jitter(&mut rng, bg),
                    accent: jitter(&mut rng, accent),
                    shift: (rng.random_range(0..3), rng.random_range(0..3)),
                };
                let image = render(class.motif, &style, spec.image_size);
                let record = PatternRecord::new(
                    image,
                    caption.clone(),
                    vec![class.keyword.clone()],
                    RecordSource::Synthetic,
                );
                if ids.insert(record.id.clone()) {
                    records.push(record);
                    break;
                }
                attempt += 1;
            }
        }
    }
    Ok(DatasetManifest::new(records, taxonomy.clone(), spec.image_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_taxonomy;

    fn small_spec() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec::standard(5, 6, ImageSize::square(16), 7)
    }

    #[test]
    fn counts_per_keyword() {
        let tx = load_taxonomy();
        let m = synthesize_corpus(&SyntheticCorpusSpec::desk_scale(7), &tx).unwrap();
        assert_eq!(m.len(), 500);
        for class in &SyntheticCorpusSpec::desk_scale(7).classes {
            assert_eq!(m.records_with_keyword(&class.keyword).count(), 100);
        }
    }

    #[test]
    fn seeded_reproducibility() {
        let tx = load_taxonomy();
        let a = synthesize_corpus(&small_spec(), &tx).unwrap();
        let b = synthesize_corpus(&small_spec(), &tx).unwrap();
        assert_eq!(a.checksum, b.checksum);
        assert_eq!(a, b);
        let mut other = small_spec();
        other.seed = 8;
        assert_ne!(synthesize_corpus(&other, &tx).unwrap().checksum, a.checksum);
    }

    #[test]
    fn captions_are_augmented() {
        let tx = load_taxonomy();
        let m = synthesize_corpus(&small_spec(), &tx).unwrap();
        let r = m.records_with_keyword("Turkish Patterns").next().unwrap();
        assert_eq!(r.caption, "a seamless striped textile pattern, Turkish Patterns, textile pattern");
    }

    fn max_edge_gap(img: &Raster, kind: MotifKind, style: &MotifStyle, size: ImageSize) -> f64 {
        // Rendering one period further must reproduce the opposite edge of the image.
        let mut gap: f64 = 0.0;
        let (h, w) = (size.height as i64, size.width as i64);
        for y in 0..h {
            let right_neighbour = render_motif(kind, style, size, y, w);
            for c in 0..3 {
                gap = gap.max((img.get(y as usize, 0, c) - right_neighbour[c]).abs());
            }
        }
        for x in 0..w {
            let below = render_motif(kind, style, size, h, x);
            for c in 0..3 {
                gap = gap.max((img.get(0, x as usize, c) - below[c]).abs());
            }
        }
        gap
    }

    #[test]
    fn every_motif_tiles_exactly() {
        for size in [ImageSize::square(32), ImageSize::new(12, 20), ImageSize::square(7)] {
            for kind in MotifKind::ALL {
                let style = MotifStyle {
                    foreground: [0.9, 0.1, 0.2],
                    background: [0.1, 0.2, 0.8],
                    accent: [1.0, 1.0, 0.0],
                    shift: (1, 2),
                };
                let img = render(kind, &style, size);
                assert_eq!(max_edge_gap(&img, kind, &style, size), 0.0, "{kind:?} {size}");
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let tx = load_taxonomy();
        let mut s = small_spec();
        s.per_class_count = 0;
        assert!(matches!(synthesize_corpus(&s, &tx), Err(DatasetError::InvalidSpec(_))));
        let mut s = small_spec();
        s.classes[0].keyword = "Spaceship Patterns".into();
        assert!(matches!(synthesize_corpus(&s, &tx), Err(DatasetError::InvalidSpec(_))));
        let mut s = small_spec();
        s.classes.clear();
        assert!(matches!(synthesize_corpus(&s, &tx), Err(DatasetError::InvalidSpec(_))));
    }
}
