use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize, KeywordTaxonomy};

pub const NULL_ROW: usize = 0;
pub const OOV_ROW: usize = 1;
pub const DEFAULT_COND_DIM: usize = 64;

/// Text conditioning handed to the denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningVector {
    pub values: Vec<f64>,
    /// Set for the unconditional (empty prompt) embedding.
    pub is_null: bool,
}

/// Bag-of-tokens text encoder: a caption is the mean of its token rows.
///
/// Rows 0 and 1 are the null and out-of-vocabulary embeddings; every
/// vocabulary token owns one further row.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    vocabulary: BTreeMap<String, usize>,
    dim: usize,
    table: Vec<f64>,
}

/// Splits a caption into tokens. Taxonomy phrases (canonical keywords and their
/// aliases) are matched greedily, longest first, and become one token: the
/// lowercased canonical keyword. Everything else splits on whitespace and commas.
pub fn tokenize(caption: &str, taxonomy: &KeywordTaxonomy) -> Vec<String> {
    let words: Vec<String> = caption
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect();
    let normalized: Vec<String> = words.iter().map(|w| normalize(w)).collect();
    let mut phrases: Vec<(Vec<String>, String)> = taxonomy
        .phrases()
        .map(|(p, c)| (normalize(p).split(' ').map(String::from).collect(), c.to_lowercase()))
        .collect();
    phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let hit = phrases.iter().find(|(p, _)| {
            p.len() <= normalized.len() - i && normalized[i..i + p.len()] == p[..]
        });
        match hit {
            Some((p, canonical)) => {
                tokens.push(canonical.clone());
                i += p.len();
            }
            None => {
                tokens.push(words[i].clone());
                i += 1;
            }
        }
    }
    tokens
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    dim: usize,
    tokens: Vec<String>,
}

impl TextEncoder {
    /// Vocabulary from the captions plus every canonical keyword; rows drawn from
    /// `N(0, 1)` with a seeded stream.
    pub fn build<'a>(
        captions: impl IntoIterator<Item = &'a str>,
        taxonomy: &KeywordTaxonomy,
        dim: usize,
        seed: u64,
    ) -> Self {
        let mut tokens: BTreeSet<String> = taxonomy.keywords().iter().map(|k| k.to_lowercase()).collect();
        for c in captions {
            tokens.extend(tokenize(c, taxonomy));
        }
        let vocabulary: BTreeMap<String, usize> = tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, i + 2))
            .collect();
        let rows = vocabulary.len() + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let table = (0..rows * dim)
            .map(|_| f64::from(normal.sample(&mut rng) as f32))
            .collect();
        Self { vocabulary, dim, table }
    }

    /// Rebuilds an encoder from its serialized vocabulary and a flat table.
    pub fn from_parts(tokens: Vec<String>, dim: usize, table: Vec<f64>) -> Result<Self, String> {
        let rows = tokens.len() + 2;
        if table.len() != rows * dim {
            return Err(format!("embedding table has {} values, expected {}", table.len(), rows * dim));
        }
        let vocabulary: BTreeMap<String, usize> = tokens.into_iter().enumerate().map(|(i, t)| (t, i + 2)).collect();
        if vocabulary.len() + 2 != rows {
            return Err("duplicate vocabulary tokens".into());
        }
        Ok(Self { vocabulary, dim, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.table.len() / self.dim
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Tokens ordered by their row index.
    pub fn tokens(&self) -> Vec<String> {
        let mut v: Vec<(&String, &usize)> = self.vocabulary.iter().collect();
        v.sort_by_key(|(_, &i)| i);
        v.into_iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.table[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_of(&self, token: &str) -> usize {
        self.vocabulary.get(token).copied().unwrap_or(OOV_ROW)
    }

    /// Row indices for a caption; `[NULL_ROW]` for an empty caption.
    pub fn token_rows(&self, caption: &str, taxonomy: &KeywordTaxonomy) -> Vec<usize> {
        let tokens = tokenize(caption, taxonomy);
        if tokens.is_empty() {
            return vec![NULL_ROW];
        }
        tokens.iter().map(|t| self.row_of(t)).collect()
    }

    pub fn mean_of_rows(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &r in rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn null_embedding(&self) -> ConditioningVector {
        ConditioningVector {
            values: self.row(NULL_ROW).to_vec(),
            is_null: true,
        }
    }

    pub fn encode(&self, caption: &str, taxonomy: &KeywordTaxonomy) -> ConditioningVector {
        let rows = self.token_rows(caption, taxonomy);
        if rows == [NULL_ROW] {
            return self.null_embedding();
        }
        ConditioningVector {
            values: self.mean_of_rows(&rows),
            is_null: false,
        }
    }

    pub(crate) fn vocabulary_json(&self) -> String {
        serde_json::to_string(&VocabularyFile {
            dim: self.dim,
            tokens: self.tokens(),
        })
        .expect("vocabulary serializes")
    }

    pub(crate) fn parse_vocabulary(text: &str) -> Result<(usize, Vec<String>), serde_json::Error> {
        let v: VocabularyFile = serde_json::from_str(text)?;
        Ok((v.dim, v.tokens))
    }
}

pub fn encode_text(caption: &str, encoder: &TextEncoder, taxonomy: &KeywordTaxonomy) -> ConditioningVector {
    encoder.encode(caption, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_taxonomy;

    fn encoder() -> (TextEncoder, KeywordTaxonomy) {
        let tx = load_taxonomy();
        let e = TextEncoder::build(
            ["a seamless striped textile pattern, Turkish Patterns, textile pattern"],
            &tx,
            8,
            3,
        );
        (e, tx)
    }

    #[test]
    fn empty_caption_is_null() {
        let (e, tx) = encoder();
        let c = encode_text("", &e, &tx);
        assert!(c.is_null);
        assert_eq!(c.values, e.row(NULL_ROW));
        assert!(encode_text(" , ", &e, &tx).is_null);
    }

    #[test]
    fn deterministic() {
        let (e, tx) = encoder();
        assert_eq!(encode_text("red Calico Patterns", &e, &tx), encode_text("red Calico Patterns", &e, &tx));
        let (e2, _) = encoder();
        assert_eq!(e, e2);
    }

    #[test]
    fn keyword_phrase_is_one_token() {
        let (e, tx) = encoder();
        // by-hand lookup of the keyword's row
        let idx = *e.vocabulary().get("turkish patterns").unwrap();
        let expected = &e.table()[idx * 8..idx * 8 + 8];
        let c = encode_text("Turkish Patterns", &e, &tx);
        assert!(!c.is_null);
        assert_eq!(c.values, expected);
    }

    #[test]
    fn tokenization() {
        let tx = load_taxonomy();
        assert_eq!(
            tokenize("A striped textile, Turkish Patterns, textile pattern", &tx),
            ["a", "striped", "textile", "turkish patterns", "textile", "pattern"]
        );
        // alias phrases resolve to the canonical token
        assert_eq!(tokenize("aborigin patterns", &tx), ["aboriginal patterns"]);
        assert_eq!(tokenize("Iranian Rug pattern", &tx), ["iranian rug pattern"]);
        assert_eq!(tokenize("Iranian pattern", &tx), ["iranian rug pattern"]);
    }

    #[test]
    fn unknown_tokens_share_the_oov_row() {
        let (e, tx) = encoder();
        assert_eq!(e.token_rows("zebra quokka", &tx), vec![OOV_ROW, OOV_ROW]);
        assert_eq!(encode_text("zebra", &e, &tx).values, e.row(OOV_ROW));
    }

    #[test]
    fn mean_of_rows() {
        let (e, tx) = encoder();
        let c = encode_text("striped seamless", &e, &tx);
        let a = e.row(e.row_of("striped"));
        let b = e.row(e.row_of("seamless"));
        for i in 0..8 {
            assert!((c.values[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vocabulary_round_trip() {
        let (e, _) = encoder();
        let (dim, tokens) = TextEncoder::parse_vocabulary(&e.vocabulary_json()).unwrap();
        let back = TextEncoder::from_parts(tokens, dim, e.table().to_vec()).unwrap();
        assert_eq!(back, e);
    }
}
