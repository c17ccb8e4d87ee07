//! Headless driver: load a file, optionally exclude words, drill down, and
//! print a panel, a titles table or an HTML report.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use thiserror::Error;

use crate::medline::{parse_medline, IngestError};
use crate::report::{render_cluster_html, render_titles, titles_tsv};
use crate::service::SessionView;
use crate::session::{Session, SessionConfig, SessionError, DEFAULT_K, INITIAL_MAX_K};
use crate::text::Stopwords;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Summary,
    Titles,
    Report(PathBuf),
}

#[derive(Debug, Clone)]
pub struct BatchScript {
    pub input_path: PathBuf,
    /// `None` means the default of 6, lowered for tiny files.
    pub k: Option<usize>,
    pub exclude_words: Vec<String>,
    pub seed: u64,
    /// 1-based clusters to enter in turn.
    pub drill: Vec<usize>,
    pub output: Output,
    /// 1-based cluster for titles and report; defaults to the selection.
    pub report_cluster: Option<usize>,
    pub json: bool,
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error("{0}")]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Session(#[from] SessionError),
    #[error("drill step {step} (cluster {cluster}): {source}")]
    Drill { step: usize, cluster: usize, source: SessionError },
}

impl BatchError {
    pub fn exit_code(&self) -> i32 {
        EXIT_DATA
    }
}

/// Builds the session a script describes, without producing output.
pub fn prepare(script: &BatchScript) -> Result<Session, BatchError> {
    let read = |path: &PathBuf| std::fs::read(path).map_err(|source| BatchError::Io { path: path.clone(), source });
    let bytes = read(&script.input_path)?;
    let stopwords = match &script.stopwords {
        Some(p) => Stopwords::from_list(&String::from_utf8_lossy(&read(p)?)),
        None => Stopwords::english(),
    };
    let source_name = script.input_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let (corpus, _) = parse_medline(&bytes, &source_name)?;
    let n = corpus.len();
    let config = SessionConfig { seed: script.seed, stopwords: Arc::new(stopwords) };

    let k = script.k.unwrap_or_else(|| DEFAULT_K.min(n.saturating_sub(1)).max(1));
    let initial_k = k.min(INITIAL_MAX_K);
    let mut session = Session::new(corpus, initial_k, &config)?;
    if k != initial_k || !script.exclude_words.is_empty() {
        session.update(k, &script.exclude_words)?;
    }
    for (step, &cluster) in script.drill.iter().enumerate() {
        let wrap = |source| BatchError::Drill { step: step + 1, cluster, source };
        session.select(cluster).map_err(wrap)?;
        session.use_cluster().map_err(wrap)?;
    }
    Ok(session)
}

pub fn run(script: &BatchScript, out: &mut dyn Write) -> Result<(), BatchError> {
    let session = prepare(script)?;
    let cluster = script.report_cluster.unwrap_or(session.selected_cluster());
    match &script.output {
        Output::Summary if script.json => {
            let view = SessionView::from(&session);
            serde_json::to_writer_pretty(&mut *out, &view).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        Output::Summary => out.write_all(session.panel_text().as_bytes())?,
        Output::Titles if script.json => {
            let rows = render_titles(&session, cluster)?;
            serde_json::to_writer_pretty(&mut *out, &rows).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        Output::Titles => out.write_all(titles_tsv(&render_titles(&session, cluster)?).as_bytes())?,
        Output::Report(path) => {
            let html = render_cluster_html(&session, cluster, Utc::now())?;
            std::fs::write(path, html).map_err(|source| BatchError::Io { path: path.clone(), source })?;
            writeln!(out, "wrote cluster {cluster} report to {}", path.display())?;
        }
    }
    Ok(())
}
