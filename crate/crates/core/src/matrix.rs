//! Vocabulary and the sparse TF-IDF document × term matrix.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::text::TokenizedDoc;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("every document is empty after stopword removal")]
    EmptyVocabulary,
    #[error("token {0:?} has no vocabulary column")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn doc_freqs(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Collects every surviving token; no frequency pruning.
pub fn build_vocabulary<D: Borrow<TokenizedDoc>>(docs: &[D]) -> Result<Vocabulary, MatrixError> {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let doc = doc.borrow();
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(MatrixError::EmptyVocabulary);
    }
    let mut terms = Vec::with_capacity(df.len());
    let mut doc_freq = Vec::with_capacity(df.len());
    let mut index = HashMap::with_capacity(df.len());
    for (i, (t, n)) in df.into_iter().enumerate() {
        index.insert(t.to_string(), i);
        terms.push(t.to_string());
        doc_freq.push(n);
    }
    Ok(Vocabulary { terms, index, doc_freq })
}

/// One document's row: strictly increasing columns, positive weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, w)| w * dense[c]).sum()
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries.binary_search_by_key(&column, |&(c, _)| c).map(|i| self.entries[i].1).unwrap_or(0.0)
    }

    pub fn to_dense(&self, n_terms: usize) -> Vec<f64> {
        let mut v = vec![0.0; n_terms];
        for &(c, w) in &self.entries {
            v[c] = w;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    pub rows: Vec<SparseRow>,
    /// `true` where every term of the document has df = N.
    pub zero_rows: Vec<bool>,
    pub doc_ids: Vec<u64>,
    pub vocabulary: Vocabulary,
}

impl TermDocMatrix {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn all_zero(&self) -> bool {
        self.zero_rows.iter().all(|&z| z)
    }
}

/// weight = tf × ln(N / df), then each row scaled to unit L2 norm.
pub fn build_matrix<D: Borrow<TokenizedDoc>>(docs: &[D], vocab: &Vocabulary) -> Result<TermDocMatrix, MatrixError> {
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab.doc_freq.iter().map(|&df| (n / df as f64).ln()).collect();
    let mut rows = Vec::with_capacity(docs.len());
    let mut zero_rows = Vec::with_capacity(docs.len());
    for doc in docs {
        let doc = doc.borrow();
        let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
        for t in &doc.tokens {
            let col = vocab.index_of(t).ok_or_else(|| MatrixError::DimensionMismatch(t.clone()))?;
            *tf.entry(col).or_default() += 1;
        }
        let mut entries: Vec<(usize, f64)> =
            tf.into_iter().map(|(c, f)| (c, f as f64 * idf[c])).filter(|&(_, w)| w > 0.0).collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        zero_rows.push(entries.is_empty());
        rows.push(SparseRow { entries });
    }
    Ok(TermDocMatrix {
        rows,
        zero_rows,
        doc_ids: docs.iter().map(|d| d.borrow().pmid).collect(),
        vocabulary: vocab.clone(),
    })
}
