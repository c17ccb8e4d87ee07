//! Cluster the abstracts of a PubMed MEDLINE export and explore the result
//! by drilling into clusters, excluding words and stepping back.
//!
//! The pipeline is [`medline`] → [`text`] → [`matrix`] → [`cluster`], driven
//! by a [`session::Session`]. [`report`] renders downloads, [`service`]
//! exposes sessions over HTTP and [`batch`] is the headless driver behind the
//! command-line tool.

pub mod batch;
pub mod cluster;
pub mod matrix;
pub mod medline;
pub mod report;
pub mod service;
pub mod session;
pub mod text;

pub use cluster::{kmeans, ClusterModel};
pub use matrix::{build_matrix, build_vocabulary, TermDocMatrix, Vocabulary};
pub use medline::{parse_dp, parse_medline, Corpus, IngestReport, MedlineRecord};
pub use session::{ClusterSummary, Session, SessionConfig, SessionError};
pub use text::{tokenize, Stopwords, TokenizedDoc};
