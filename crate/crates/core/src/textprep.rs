//! Deterministic text normalization, stopword removal, Porter stemming, and
//! bigram formation.
//!
//! Segmentation upstream works on raw whitespace tokens; everything here is
//! the linguistic pipeline applied per snippet: lowercase, strip non-letters,
//! drop stopwords and single letters, stem, and pair adjacent stems.

pub mod porter;

use std::collections::HashSet;

pub use porter::stem;

/// The stopword list shipped with the crate, one token per line. Versioned
/// with the repo so results are reproducible.
pub const DEFAULT_STOPWORDS: &str = include_str!("../assets/stopwords.txt");

pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
}

/// Ordered lowercase alphabetic tokens surviving the stopword filter.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Ordered "stemA stemB" strings over adjacent surviving stems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BigramSequence {
    pub bigrams: Vec<String>,
}

impl BigramSequence {
    pub fn len(&self) -> usize {
        self.bigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty()
    }
}

/// Lowercase, replace non-letters with spaces, collapse whitespace, drop
/// stopwords. Single-letter tokens are always treated as stopwords. Non-ASCII
/// letters are transliterated to ASCII where a plain mapping exists and
/// dropped otherwise.
pub fn normalize(text: &str, stopwords: &HashSet<String>) -> TokenSequence {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii_alphabetic() {
            cleaned.push(c.to_ascii_lowercase());
        } else if c.is_alphabetic() {
            for low in c.to_lowercase() {
                cleaned.push_str(transliterate(low));
            }
        } else {
            cleaned.push(' ');
        }
    }
    let tokens = cleaned
        .split_whitespace()
        .filter(|t| t.len() > 1 && !stopwords.contains(*t))
        .map(str::to_string)
        .collect();
    TokenSequence { tokens }
}

fn transliterate(c: char) -> &'static str {
    match c {
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' | 'ā' | 'ă' | 'ą' => "a",
        'ç' | 'ć' | 'č' => "c",
        'é' | 'è' | 'ê' | 'ë' | 'ē' | 'ė' | 'ę' => "e",
        'í' | 'ì' | 'î' | 'ï' | 'ī' | 'į' => "i",
        'ñ' | 'ń' => "n",
        'ó' | 'ò' | 'ô' | 'ö' | 'õ' | 'ø' | 'ō' => "o",
        'ú' | 'ù' | 'û' | 'ü' | 'ū' => "u",
        'ý' | 'ÿ' => "y",
        'š' | 'ś' => "s",
        'ž' | 'ź' | 'ż' => "z",
        'ß' => "ss",
        'æ' => "ae",
        'œ' => "oe",
        'đ' | 'ď' => "d",
        'ł' => "l",
        'ť' => "t",
        'ř' => "r",
        'ğ' => "g",
        _ => "",
    }
}

/// Porter-stem every token.
pub fn stem_all(tokens: &TokenSequence) -> TokenSequence {
    TokenSequence { tokens: tokens.tokens.iter().map(|t| porter::stem(t)).collect() }
}

/// Adjacent stem pairs in order; fewer than two stems yield none.
pub fn to_bigrams(stems: &TokenSequence) -> BigramSequence {
    let bigrams = stems.tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
    BigramSequence { bigrams }
}

/// Full per-snippet pipeline: normalize → stem → bigrams.
pub fn snippet_bigrams(text: &str, stopwords: &HashSet<String>) -> BigramSequence {
    to_bigrams(&stem_all(&normalize(text, stopwords)))
}

/// Per-snippet unigram stems (the topic-model feature unit).
pub fn snippet_stems(text: &str, stopwords: &HashSet<String>) -> TokenSequence {
    stem_all(&normalize(text, stopwords))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalize_drops_stopwords_and_single_letters() {
        let out = normalize("The U.S. and Iraq!", &set(&["the", "and", "us"]));
        assert_eq!(out.tokens, vec!["iraq"]);
    }

    #[test]
    fn normalize_empty() {
        assert!(normalize("", &set(&[])).is_empty());
    }

    #[test]
    fn normalize_case_folds() {
        let out = normalize("War war WAR", &set(&[]));
        assert_eq!(out.tokens, vec!["war", "war", "war"]);
    }

    #[test]
    fn normalize_digits_and_accents() {
        let out = normalize("Café résumé 2008, naïve Ølsen!", &set(&[]));
        assert_eq!(out.tokens, vec!["cafe", "resume", "naive", "olsen"]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let stop = default_stopwords();
        for text in ["Some tax-and-spend STORY, filed 2007.", "Wolf Blitzer's situation room!"] {
            let once = normalize(text, &stop);
            let twice = normalize(&once.tokens.join(" "), &stop);
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn bigram_examples() {
        let seq = TokenSequence {
            tokens: vec!["sean".into(), "hanniti".into(), "show".into()],
        };
        assert_eq!(to_bigrams(&seq).bigrams, vec!["sean hanniti", "hanniti show"]);

        let single = TokenSequence { tokens: vec!["war".into()] };
        assert!(to_bigrams(&single).is_empty());

        let abab = TokenSequence {
            tokens: vec!["a".into(), "b".into(), "a".into(), "b".into()],
        };
        assert_eq!(to_bigrams(&abab).bigrams, vec!["a b", "b a", "a b"]);
    }

    #[test]
    fn bigram_count_invariant() {
        for n in 0..20usize {
            let seq = TokenSequence { tokens: (0..n).map(|i| format!("tok{i}")).collect() };
            assert_eq!(to_bigrams(&seq).len(), n.saturating_sub(1));
        }
    }

    #[test]
    fn full_pipeline() {
        let stop = set(&["the", "on"]);
        let out = snippet_bigrams("The detectives capture terrorists on Hannity!", &stop);
        assert_eq!(out.bigrams, vec!["detect captur", "captur terrorist", "terrorist hanniti"]);
    }

    #[test]
    fn default_list_is_versioned_and_nontrivial() {
        let stop = default_stopwords();
        assert!(stop.len() > 150, "expected a full english list, got {}", stop.len());
        for w in ["the", "and", "because"] {
            assert!(stop.contains(w), "missing {w}");
        }
    }
}
