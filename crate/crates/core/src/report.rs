//! Per-cluster HTML download and titles listing.

use std::fmt::Write as _;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::Serialize;

use crate::session::{Session, SessionError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportEntry {
    pub pmid: u64,
    pub date: NaiveDate,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterReport {
    /// 1-based.
    pub cluster_index: usize,
    pub entries: Vec<ReportEntry>,
    pub generated_at: DateTime<Utc>,
    pub source_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TitleRow {
    pub pmid: u64,
    pub date: NaiveDate,
    pub title: String,
}

impl ClusterReport {
    pub fn build(session: &Session, c: usize, generated_at: DateTime<Utc>) -> Result<Self, SessionError> {
        let entries = session
            .member_records(c)?
            .into_iter()
            .map(|r| ReportEntry {
                pmid: r.pmid,
                date: r.date,
                title: r.title.clone(),
                abstract_text: r.abstract_str().to_string(),
            })
            .collect();
        Ok(Self { cluster_index: c, entries, generated_at, source_name: session.source_name().to_string() })
    }

    pub fn to_html(&self) -> String {
        let heading = format!("{} \u{2013} cluster {}", self.source_name, self.cluster_index);
        let mut out = String::with_capacity(1024 + self.entries.len() * 2048);
        out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\" />\n");
        let _ = writeln!(out, "<title>{}</title>", escape(&heading));
        let _ = writeln!(
            out,
            "<meta name=\"generated-at\" content=\"{}\" />",
            self.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true)
        );
        out.push_str(STYLE);
        out.push_str("</head>\n<body>\n");
        let _ = writeln!(out, "<h1>{}</h1>", escape(&heading));
        let _ = writeln!(out, "<p class=\"count\">{} publication(s)</p>", self.entries.len());
        for e in &self.entries {
            out.push_str("<section class=\"publication\">\n");
            let _ = writeln!(
                out,
                "<p class=\"meta\"><b>PMID:</b> {} <b>Date:</b> {}</p>",
                escape(&e.pmid.to_string()),
                escape(&e.date.format("%Y-%m-%d").to_string())
            );
            let _ = writeln!(out, "<h2><b>Title:</b> {}</h2>", escape(&e.title));
            out.push_str("<h3>Abstract:</h3>\n");
            let _ = writeln!(out, "<p class=\"abstract\">{}</p>", escape(&e.abstract_text));
            out.push_str("</section>\n");
        }
        out.push_str("</body>\n</html>\n");
        out
    }
}

const STYLE: &str = "<style>\n\
body { font-family: sans-serif; max-width: 60em; margin: 2em auto; line-height: 1.4; }\n\
section.publication { border-top: 1px solid #ccc; padding: 0.5em 0; }\n\
h2 { font-size: 1.1em; }\n\
h3 { font-size: 1em; margin-bottom: 0.2em; }\n\
</style>\n";

/// Escapes text for use in element content and double-quoted attributes.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_cluster_html(session: &Session, c: usize, generated_at: DateTime<Utc>) -> Result<String, SessionError> {
    Ok(ClusterReport::build(session, c, generated_at)?.to_html())
}

pub fn render_titles(session: &Session, c: usize) -> Result<Vec<TitleRow>, SessionError> {
    Ok(session
        .member_records(c)?
        .into_iter()
        .map(|r| TitleRow { pmid: r.pmid, date: r.date, title: r.title.clone() })
        .collect())
}

/// Tab-separated `PMID  Date  Title` table with a header row.
pub fn titles_tsv(rows: &[TitleRow]) -> String {
    let mut out = String::from("PMID\tDate\tTitle\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}", r.pmid, r.date.format("%Y-%m-%d"), r.title);
    }
    out
}

/// `cluster-<index>-<source_name>.html`, with path separators and quotes
/// replaced.
pub fn report_filename(source_name: &str, c: usize) -> String {
    let clean: String = source_name
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '-' | '_') { ch } else { '_' })
        .collect();
    let clean = if clean.is_empty() { "medline".to_string() } else { clean };
    format!("cluster-{c}-{clean}.html")
}
