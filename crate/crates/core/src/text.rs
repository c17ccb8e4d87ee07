//! Tokenization and stopword removal.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use crate::medline::MedlineRecord;

const ENGLISH: &str = include_str!("../assets/english.txt");

/// Stopword set. Entries that are not purely alphabetic (e.g. "don't") are
/// kept but can never match a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::from_list(ENGLISH)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn from_list(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_path(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_list(&std::fs::read_to_string(path)?))
    }

    pub fn empty() -> Self {
        Self { words: HashSet::new() }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub pmid: u64,
    /// Terms after stopword removal.
    pub tokens: Vec<String>,
    /// Every alphabetic run, lowercased.
    pub raw_tokens: Vec<String>,
}

/// Lowercases and splits on every non-alphabetic character.
pub fn raw_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic()).filter(|t| !t.is_empty()).map(str::to_ascii_lowercase).collect()
}

pub fn tokenize(pmid: u64, text: &str, stopwords: &Stopwords) -> TokenizedDoc {
    let raw = raw_tokens(text);
    let tokens = raw.iter().filter(|t| !stopwords.contains(t)).cloned().collect();
    TokenizedDoc { pmid, tokens, raw_tokens: raw }
}

/// Tokenizes the abstracts of `records`; output order follows input order.
pub fn tokenize_records(records: &[MedlineRecord], stopwords: &Stopwords) -> Vec<TokenizedDoc> {
    records.par_iter().map(|r| tokenize(r.pmid, r.abstract_str(), stopwords)).collect()
}
