use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// The fifteen dataset keywords, in table reading order.
pub const CANONICAL_KEYWORDS: [&str; 15] = [
    "Allover patterns",
    "Abstract Patterns",
    "Calico Patterns",
    "Animal Patterns Printed",
    "Ottoman Embroidery Patterns",
    "Indian Fabric Patterns",
    "Traditional Japanese Patterns",
    "African Pattern Fabric",
    "Iranian Rug pattern",
    "Floral Pattern Fabric",
    "Turkish Patterns",
    "Oriental patterns",
    "Aboriginal Patterns",
    "Vintage Fabric Patterns",
    "Art Nouveau pattern",
];

/// Spelling variants seen in evaluation tables and prompts.
///
/// Case, plural and separator variants are handled by [`normalize`] and do not
/// need entries here.
const BUILTIN_ALIASES: &[(&str, &str)] = &[
    ("Aborigin patterns", "Aboriginal Patterns"),
    ("Aboriginal Pattern", "Aboriginal Patterns"),
    ("Iranian Pattern", "Iranian Rug pattern"),
    ("Iranian Patterns", "Iranian Rug pattern"),
    ("Iranian Rug Patterns", "Iranian Rug pattern"),
    ("Persian patterns", "Iranian Rug pattern"),
    ("Calico Pattern", "Calico Patterns"),
    ("African Pattern fabric", "African Pattern Fabric"),
    ("African Patterns", "African Pattern Fabric"),
    ("Oriental Patterns", "Oriental patterns"),
    ("Japanese Patterns", "Traditional Japanese Patterns"),
    ("Animal Patterns", "Animal Patterns Printed"),
    ("Ottoman Embroidery", "Ottoman Embroidery Patterns"),
    ("Indian Patterns", "Indian Fabric Patterns"),
    ("Modern Flower Print Fabric", "Floral Pattern Fabric"),
    ("Floral Patterns", "Floral Pattern Fabric"),
    ("Allover pattern", "Allover patterns"),
    ("Art Nouveau patterns", "Art Nouveau pattern"),
];

/// Canonical keyword list plus the alias table that folds variants onto it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordTaxonomy {
    keywords: Vec<String>,
    aliases: BTreeMap<String, String>,
}

/// Lowercases, folds `_`/`-` and repeated whitespace into single spaces and
/// strips a plural `s` from every word longer than three letters.
pub fn normalize(text: &str) -> String {
    text.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let w = w.to_lowercase();
            if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
                w[..w.len() - 1].to_string()
            } else {
                w
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn load_taxonomy() -> KeywordTaxonomy {
    KeywordTaxonomy::builtin()
}

impl Default for KeywordTaxonomy {
    fn default() -> Self {
        Self::builtin()
    }
}

impl KeywordTaxonomy {
    pub fn builtin() -> Self {
        let aliases = BUILTIN_ALIASES
            .iter()
            .map(|(a, c)| (a.to_string(), c.to_string()))
            .collect();
        Self {
            keywords: CANONICAL_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            aliases,
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    /// Position of a canonical keyword in taxonomy order.
    pub fn index_of(&self, keyword: &str) -> Option<usize> {
        self.keywords.iter().position(|k| k == keyword)
    }

    pub fn is_canonical(&self, keyword: &str) -> bool {
        self.index_of(keyword).is_some()
    }

    /// Maps any known variant (or a canonical keyword itself) to its canonical spelling.
    pub fn resolve(&self, text: &str) -> Option<&str> {
        if let Some(i) = self.index_of(text) {
            return Some(&self.keywords[i]);
        }
        if let Some(c) = self.aliases.get(text) {
            return self.index_of(c).map(|i| self.keywords[i].as_str());
        }
        let key = normalize(text);
        if key.is_empty() {
            return None;
        }
        if let Some(k) = self.keywords.iter().find(|k| normalize(k) == key) {
            return Some(k);
        }
        self.aliases
            .iter()
            .find(|(a, _)| normalize(a) == key)
            .and_then(|(_, c)| self.index_of(c))
            .map(|i| self.keywords[i].as_str())
    }

    /// Every phrase (canonical keywords and aliases) paired with its canonical keyword.
    pub fn phrases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.keywords
            .iter()
            .map(|k| (k.as_str(), k.as_str()))
            .chain(self.aliases.iter().map(|(a, c)| (a.as_str(), c.as_str())))
    }

    /// Sorts and deduplicates canonical keywords into taxonomy order.
    /// Returns the first keyword that is not canonical as the error.
    pub fn ordered<'a, I>(&self, keywords: I) -> Result<Vec<String>, String>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let mut idx = Vec::new();
        for k in keywords {
            match self.index_of(k) {
                Some(i) => idx.push(i),
                None => return Err(k.clone()),
            }
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(idx.into_iter().map(|i| self.keywords[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_keywords_in_table_order() {
        let tx = load_taxonomy();
        assert_eq!(tx.len(), 15);
        assert_eq!(tx.keywords()[0], "Allover patterns");
        assert_eq!(tx.keywords()[14], "Art Nouveau pattern");
        for k in ["Calico Patterns", "Turkish Patterns", "Oriental patterns"] {
            assert!(tx.is_canonical(k), "{k}");
        }
    }

    #[test]
    fn resolves_table_variants() {
        let tx = load_taxonomy();
        assert_eq!(tx.resolve("Aborigin patterns"), Some("Aboriginal Patterns"));
        assert_eq!(tx.resolve("Turkish Patterns"), Some("Turkish Patterns"));
        assert_eq!(tx.resolve("Iranian Pattern"), Some("Iranian Rug pattern"));
        assert_eq!(tx.resolve("turkish_patterns"), Some("Turkish Patterns"));
        assert_eq!(tx.resolve("  TURKISH   pattern "), Some("Turkish Patterns"));
        assert_eq!(tx.resolve("Native American Pattern"), None);
        assert_eq!(tx.resolve(""), None);
    }

    #[test]
    fn alias_resolution_is_idempotent_and_lands_on_canonical() {
        let tx = load_taxonomy();
        for (phrase, canonical) in tx.phrases() {
            let once = tx.resolve(phrase).expect(phrase);
            assert_eq!(once, canonical);
            assert_eq!(tx.resolve(once), Some(once));
            assert!(tx.is_canonical(once));
        }
        for target in tx.aliases().values() {
            assert!(tx.is_canonical(target), "alias target {target} not canonical");
        }
    }

    #[test]
    fn normalized_canonical_forms_are_distinct() {
        let tx = load_taxonomy();
        let mut forms: Vec<String> = tx.keywords().iter().map(|k| normalize(k)).collect();
        forms.sort();
        forms.dedup();
        assert_eq!(forms.len(), 15);
    }
}
