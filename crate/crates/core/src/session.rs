//! Exploration state machine: update, drill into a cluster, go back.
//!
//! History frames keep document ids and parameters only. Models are
//! recomputed when a frame is popped, which is sound because clustering is a
//! deterministic function of (documents, k, seed).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{self, ClusterError, ClusterModel, DEFAULT_SEED};
use crate::matrix::{build_matrix, build_vocabulary, MatrixError};
use crate::medline::{Corpus, MedlineRecord};
use crate::text::{tokenize_records, Stopwords, TokenizedDoc};

pub const DEFAULT_K: usize = 6;
/// Largest k accepted when a session is first created.
pub const INITIAL_MAX_K: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("corpus has {0} usable records; at least 3 are needed")]
    CorpusTooSmall(usize),
    #[error("k = {k} is out of range; choose 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("the exclusion words remove every document")]
    AllDocumentsExcluded,
    #[error("the selected cluster has a single document and cannot be re-clustered")]
    SingletonCluster,
    #[error("already at the original document set")]
    AtRoot,
    #[error("cluster {index} is out of range (1..={k})")]
    ClusterOutOfRange { index: usize, k: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Cluster(ClusterError),
}

impl From<ClusterError> for SessionError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::KTooLarge { k, max } => SessionError::KOutOfRange { k, max },
            ClusterError::KTooSmall => SessionError::KOutOfRange { k: 0, max: 0 },
            other => SessionError::Cluster(other),
        }
    }
}

impl SessionError {
    /// Stable snake_case identifier for machine consumers.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::CorpusTooSmall(_) => "corpus_too_small",
            SessionError::KOutOfRange { .. } => "k_out_of_range",
            SessionError::AllDocumentsExcluded => "all_documents_excluded",
            SessionError::SingletonCluster => "singleton_cluster",
            SessionError::AtRoot => "at_root",
            SessionError::ClusterOutOfRange { .. } => "cluster_out_of_range",
            SessionError::Matrix(_) => "empty_vocabulary",
            SessionError::Cluster(_) => "degenerate_matrix",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub seed: u64,
    pub stopwords: Arc<Stopwords>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, stopwords: Arc::new(Stopwords::english()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryFrame {
    pub doc_ids: Vec<u64>,
    pub k: usize,
    pub selected_cluster: usize,
}

/// One line of the cluster panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSummary {
    /// 1-based.
    pub cluster: usize,
    pub size: usize,
    pub words: Vec<String>,
}

impl fmt::Display for ClusterSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cluster {} ({}):", self.cluster, self.size)?;
        for w in &self.words {
            write!(f, " {w}")?;
        }
        Ok(())
    }
}

/// The panel text: one `cluster N (size): words` line per cluster.
pub fn panel_text(summaries: &[ClusterSummary]) -> String {
    summaries.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug)]
struct Base {
    corpus: Corpus,
    by_pmid: HashMap<u64, usize>,
    tokens: Vec<TokenizedDoc>,
}

impl Base {
    fn doc(&self, pmid: u64) -> &TokenizedDoc {
        &self.tokens[self.by_pmid[&pmid]]
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    base: Arc<Base>,
    exclude_words: BTreeSet<String>,
    current_doc_ids: Vec<u64>,
    k: usize,
    model: ClusterModel,
    selected_cluster: usize,
    history: Vec<HistoryFrame>,
    seed: u64,
}

impl Session {
    pub fn new(corpus: Corpus, k: usize, config: &SessionConfig) -> Result<Self, SessionError> {
        let n = corpus.len();
        if n < 3 {
            return Err(SessionError::CorpusTooSmall(n));
        }
        let max = INITIAL_MAX_K.min(n - 1);
        if k < 1 || k > max {
            return Err(SessionError::KOutOfRange { k, max });
        }
        let tokens = tokenize_records(&corpus.records, &config.stopwords);
        let by_pmid = corpus.records.iter().enumerate().map(|(i, r)| (r.pmid, i)).collect();
        let current_doc_ids = corpus.pmids();
        let base = Arc::new(Base { corpus, by_pmid, tokens });
        let model = recluster(&base, &current_doc_ids, k, config.seed)?;
        Ok(Self {
            base,
            exclude_words: BTreeSet::new(),
            current_doc_ids,
            k,
            model,
            selected_cluster: 1,
            history: Vec::new(),
            seed: config.seed,
        })
    }

    pub fn base_corpus(&self) -> &Corpus {
        &self.base.corpus
    }

    pub fn source_name(&self) -> &str {
        &self.base.corpus.source_name
    }

    pub fn record(&self, pmid: u64) -> Option<&MedlineRecord> {
        self.base.by_pmid.get(&pmid).map(|&i| &self.base.corpus.records[i])
    }

    pub fn exclude_words(&self) -> &BTreeSet<String> {
        &self.exclude_words
    }

    pub fn current_doc_ids(&self) -> &[u64] {
        &self.current_doc_ids
    }

    pub fn document_count(&self) -> usize {
        self.current_doc_ids.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Largest k the current document set admits.
    pub fn max_k(&self) -> usize {
        self.current_doc_ids.len() - 1
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn selected_cluster(&self) -> usize {
        self.selected_cluster
    }

    pub fn history(&self) -> &[HistoryFrame] {
        &self.history
    }

    pub fn history_depth(&self) -> usize {
        self.history.len()
    }

    pub fn can_go_back(&self) -> bool {
        !self.history.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn summaries(&self) -> Vec<ClusterSummary> {
        (0..self.model.k)
            .map(|c| ClusterSummary { cluster: c + 1, size: self.model.sizes[c], words: self.model.labels[c].clone() })
            .collect()
    }

    pub fn panel_text(&self) -> String {
        panel_text(&self.summaries())
    }

    fn check_cluster(&self, c: usize) -> Result<usize, SessionError> {
        if c < 1 || c > self.model.k {
            return Err(SessionError::ClusterOutOfRange { index: c, k: self.model.k });
        }
        Ok(c - 1)
    }

    pub fn cluster_size(&self, c: usize) -> Result<usize, SessionError> {
        Ok(self.model.sizes[self.check_cluster(c)?])
    }

    /// `(pmid, date)` for 1-based cluster `c`, newest first.
    pub fn members(&self, c: usize) -> Result<Vec<(u64, NaiveDate)>, SessionError> {
        let idx = self.check_cluster(c)?;
        let mut members: Vec<(u64, NaiveDate)> = self
            .model
            .member_pmids(idx)?
            .into_iter()
            .map(|p| (p, self.record(p).map(|r| r.date).unwrap_or(crate::medline::SENTINEL_DATE)))
            .collect();
        cluster::sort_newest_first(&mut members);
        Ok(members)
    }

    /// Member records for 1-based cluster `c`, in `members` order.
    pub fn member_records(&self, c: usize) -> Result<Vec<&MedlineRecord>, SessionError> {
        Ok(self.members(c)?.into_iter().filter_map(|(p, _)| self.record(p)).collect())
    }

    pub fn select(&mut self, c: usize) -> Result<(), SessionError> {
        self.check_cluster(c)?;
        self.selected_cluster = c;
        Ok(())
    }

    fn excluded_under(&self, words: &BTreeSet<String>, pmid: u64) -> bool {
        !words.is_empty() && self.base.doc(pmid).raw_tokens.iter().any(|t| words.contains(t))
    }

    fn frame(&self) -> HistoryFrame {
        HistoryFrame { doc_ids: self.current_doc_ids.clone(), k: self.k, selected_cluster: self.selected_cluster }
    }

    /// Re-clusters with a new k and exclusion list. `words` entries may hold
    /// several whitespace-separated words.
    pub fn update<S: AsRef<str>>(&mut self, k: usize, words: &[S]) -> Result<(), SessionError> {
        let exclude: BTreeSet<String> = words
            .iter()
            .flat_map(|w| w.as_ref().split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
            .collect();
        let docs: Vec<u64> =
            self.current_doc_ids.iter().copied().filter(|&p| !self.excluded_under(&exclude, p)).collect();
        if docs.is_empty() {
            return Err(SessionError::AllDocumentsExcluded);
        }
        let max = docs.len() - 1;
        if k < 1 || k > max {
            return Err(SessionError::KOutOfRange { k, max });
        }
        let model = recluster(&self.base, &docs, k, self.seed)?;
        self.history.push(self.frame());
        self.exclude_words = exclude;
        self.current_doc_ids = docs;
        self.k = k;
        self.model = model;
        self.selected_cluster = 1;
        Ok(())
    }

    /// Replaces the document set with the selected cluster's members.
    pub fn use_cluster(&mut self) -> Result<(), SessionError> {
        let idx = self.check_cluster(self.selected_cluster)?;
        let docs = self.model.member_pmids(idx)?;
        if docs.len() == 1 {
            return Err(SessionError::SingletonCluster);
        }
        if self.k > docs.len() - 1 {
            return Err(SessionError::KOutOfRange { k: self.k, max: docs.len() - 1 });
        }
        // members come out in row order, which is base-corpus order
        let model = recluster(&self.base, &docs, self.k, self.seed)?;
        self.history.push(self.frame());
        self.current_doc_ids = docs;
        self.model = model;
        self.selected_cluster = 1;
        Ok(())
    }

    /// Pops one frame. The current exclusion list still applies to it; k and
    /// the selection are clamped if exclusion has shrunk the frame.
    pub fn back(&mut self) -> Result<(), SessionError> {
        let frame = self.history.last().ok_or(SessionError::AtRoot)?;
        // the bottom frame always stands for the whole corpus, so words
        // dropped from the exclusion list since then bring their documents back
        let scope = if self.history.len() == 1 { self.base.corpus.pmids() } else { frame.doc_ids.clone() };
        let docs: Vec<u64> = scope.into_iter().filter(|&p| !self.excluded_under(&self.exclude_words, p)).collect();
        // frames are supersets of the current set, so docs.len() >= 2
        let k = frame.k.min(docs.len() - 1).max(1);
        let selected = frame.selected_cluster.clamp(1, k);
        let model = recluster(&self.base, &docs, k, self.seed)?;
        self.history.pop();
        self.current_doc_ids = docs;
        self.k = k;
        self.model = model;
        self.selected_cluster = selected;
        Ok(())
    }

    /// Checks every state invariant; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.current_doc_ids.len();
        for &p in &self.current_doc_ids {
            if !self.base.by_pmid.contains_key(&p) {
                return Err(format!("pmid {p} not in base corpus"));
            }
            if self.excluded_under(&self.exclude_words, p) {
                return Err(format!("pmid {p} contains an excluded word"));
            }
        }
        if self.selected_cluster < 1 || self.selected_cluster > self.model.k {
            return Err(format!("selected cluster {} outside 1..={}", self.selected_cluster, self.model.k));
        }
        if self.k != self.model.k {
            return Err("k disagrees with model".into());
        }
        if self.k < 1 || self.k + 1 > n {
            return Err(format!("k = {} with {n} documents", self.k));
        }
        if self.model.doc_ids != self.current_doc_ids {
            return Err("model rows disagree with current documents".into());
        }
        if self.model.sizes.iter().sum::<usize>() != n {
            return Err("cluster sizes do not sum to document count".into());
        }
        if self.history.iter().any(|f| f.doc_ids.is_empty()) {
            return Err("empty history frame".into());
        }
        Ok(())
    }
}

fn recluster(base: &Base, doc_ids: &[u64], k: usize, seed: u64) -> Result<ClusterModel, SessionError> {
    let docs: Vec<&TokenizedDoc> = doc_ids.iter().map(|&p| base.doc(p)).collect();
    let vocab = build_vocabulary(&docs)?;
    let matrix = build_matrix(&docs, &vocab)?;
    Ok(cluster::kmeans(&matrix, k, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medline::MedlineRecord;

    fn corpus(abstracts: &[&str]) -> Corpus {
        Corpus {
            source_name: "t.txt".into(),
            records: abstracts
                .iter()
                .enumerate()
                .map(|(i, a)| MedlineRecord {
                    pmid: i as u64 + 1,
                    date: NaiveDate::from_ymd_opt(2000 + i as i32, 1, 1).unwrap(),
                    title: format!("Title {i}"),
                    abstract_text: Some(a.to_string()),
                })
                .collect(),
        }
    }

    fn six() -> Corpus {
        corpus(&[
            "cerebral air embolism in divers",
            "stroke blood flow cerebral artery",
            "air bubbles during bypass surgery",
            "blood pressure stroke outcome cohort",
            "thrombolysis stroke tissue plasminogen activator",
            "plasminogen activator dose rats",
        ])
    }

    #[test]
    fn creation_defaults_and_bounds() {
        let cfg = SessionConfig::default();
        let s = Session::new(six(), 2, &cfg).unwrap();
        assert_eq!(s.selected_cluster(), 1);
        assert_eq!(s.history_depth(), 0);
        assert!(!s.can_go_back());
        s.check_invariants().unwrap();

        let five = corpus(&["a b", "c d", "e f", "g h", "i j"]);
        assert_eq!(Session::new(five, 6, &cfg).unwrap_err(), SessionError::KOutOfRange { k: 6, max: 4 });
        assert_eq!(Session::new(corpus(&["x", "y"]), 1, &cfg).unwrap_err(), SessionError::CorpusTooSmall(2));
        let big = corpus(&(0..20).map(|_| "w").collect::<Vec<_>>());
        assert_eq!(Session::new(big, 11, &cfg).unwrap_err(), SessionError::KOutOfRange { k: 11, max: 10 });
    }

    #[test]
    fn update_excludes_by_raw_token() {
        let cfg = SessionConfig::default();
        let mut s = Session::new(six(), 2, &cfg).unwrap();
        s.update(2, &["AIR"]).unwrap();
        assert_eq!(s.current_doc_ids(), [2, 4, 5, 6]);
        assert_eq!(s.history_depth(), 1);
        // "during" is a stopword but still excludes
        let mut s = Session::new(six(), 2, &cfg).unwrap();
        s.update(2, &["during"]).unwrap();
        assert_eq!(s.current_doc_ids(), [1, 2, 4, 5, 6]);
        // whole-token matching only
        let mut s = Session::new(six(), 2, &cfg).unwrap();
        s.update(2, &["art"]).unwrap();
        assert_eq!(s.document_count(), 6);
        s.update(3, &[""]).unwrap();
        assert_eq!(s.document_count(), 6);
        assert_eq!(s.k(), 3);
    }

    #[test]
    fn update_errors_leave_state_untouched() {
        let cfg = SessionConfig::default();
        let mut s = Session::new(six(), 2, &cfg).unwrap();
        let before = (s.current_doc_ids().to_vec(), s.k(), s.history_depth());
        assert_eq!(s.update(2, &["cerebral blood air plasminogen"]).unwrap_err(), SessionError::AllDocumentsExcluded);
        assert_eq!(s.update(6, &[] as &[&str]).unwrap_err(), SessionError::KOutOfRange { k: 6, max: 5 });
        assert_eq!((s.current_doc_ids().to_vec(), s.k(), s.history_depth()), before);
    }

    #[test]
    fn back_at_root() {
        let mut s = Session::new(six(), 2, &SessionConfig::default()).unwrap();
        assert_eq!(s.back(), Err(SessionError::AtRoot));
    }

    #[test]
    fn update_then_back_restores() {
        let mut s = Session::new(six(), 2, &SessionConfig::default()).unwrap();
        let model = s.model().clone();
        s.update(4, &[] as &[&str]).unwrap();
        s.back().unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.document_count(), 6);
        assert_eq!(s.model(), &model);
    }

    #[test]
    fn exclusion_survives_back() {
        // new → exclude "air" → use_cluster → back → back: docs 1 and 3 stay out
        let mut s = Session::new(six(), 2, &SessionConfig::default()).unwrap();
        s.update(1, &["air"]).unwrap();
        assert_eq!(s.current_doc_ids(), [2, 4, 5, 6]);
        s.use_cluster().unwrap();
        assert_eq!(s.current_doc_ids(), [2, 4, 5, 6]);
        s.back().unwrap();
        assert_eq!(s.current_doc_ids(), [2, 4, 5, 6]);
        s.back().unwrap();
        assert_eq!(s.current_doc_ids(), [2, 4, 5, 6]);
        assert_eq!(s.k(), 2);
        s.check_invariants().unwrap();
    }

    #[test]
    fn singleton_cluster_cannot_be_used() {
        let mut s = Session::new(six(), 5, &SessionConfig::default()).unwrap();
        let single = s.summaries().iter().find(|c| c.size == 1).map(|c| c.cluster).unwrap();
        s.select(single).unwrap();
        assert_eq!(s.use_cluster(), Err(SessionError::SingletonCluster));
        assert_eq!(s.select(0), Err(SessionError::ClusterOutOfRange { index: 0, k: 5 }));
        assert_eq!(s.select(6), Err(SessionError::ClusterOutOfRange { index: 6, k: 5 }));
    }

    #[test]
    fn panel_line_format() {
        let s = ClusterSummary {
            cluster: 12,
            size: 1,
            words: ["progranulin", "ischaemia", "ischaemic", "expression", "cerebral", "demonstrated"]
                .map(String::from)
                .to_vec(),
        };
        assert_eq!(s.to_string(), "cluster 12 (1): progranulin ischaemia ischaemic expression cerebral demonstrated");
        assert_eq!(ClusterSummary { cluster: 2, size: 3, words: vec![] }.to_string(), "cluster 2 (3):");
    }
}
