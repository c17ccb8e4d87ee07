//! MEDLINE flat-file ingest.
//!
//! PubMed's "Send to → File → MEDLINE" export is a sequence of record blocks
//! separated by blank lines. Each field line is `TAG<pad to 4>- value`;
//! continuation lines start with six spaces and are joined to the previous
//! field with a single space. Only PMID, DP, TI and AB are kept.

use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

/// Date assigned to records whose `DP` field cannot be read.
pub const SENTINEL_DATE: NaiveDate = match NaiveDate::from_ymd_opt(1900, 1, 1) {
    Some(d) => d,
    None => panic!("invalid sentinel"),
};

/// Title used when a record carries no usable `TI` field.
pub const MISSING_TITLE: &str = "[No title available]";

const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("input contains no MEDLINE record blocks")]
    EmptyInput,
    #[error("no record has both a PMID and an abstract")]
    NoValidRecords,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparsable publication date {0:?}")]
pub struct UnparsableDate(pub String);

/// One publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MedlineRecord {
    pub pmid: u64,
    pub date: NaiveDate,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
}

impl MedlineRecord {
    pub fn abstract_str(&self) -> &str {
        self.abstract_text.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub records: Vec<MedlineRecord>,
    pub source_name: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, pmid: u64) -> Option<&MedlineRecord> {
        self.records.iter().find(|r| r.pmid == pmid)
    }

    pub fn pmids(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.pmid).collect()
    }

    /// Serializes to minimal MEDLINE (PMID/DP/TI/AB), one line per field.
    pub fn to_medline(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.records.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "PMID- {}", r.pmid);
            let _ = writeln!(
                out,
                "DP  - {} {} {}",
                r.date.year(),
                capitalize(MONTHS[r.date.month0() as usize]),
                r.date.day()
            );
            let _ = writeln!(out, "TI  - {}", r.title);
            if let Some(ab) = &r.abstract_text {
                let _ = writeln!(out, "AB  - {ab}");
            }
        }
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestReport {
    /// Record blocks carrying a PMID, duplicates included.
    pub total_records: usize,
    pub kept: usize,
    pub dropped_no_abstract: usize,
    pub duplicate_pmids: usize,
    pub malformed_lines: usize,
}

#[derive(Default)]
struct RawRecord {
    pmid: Option<u64>,
    dp: Option<String>,
    ti: Option<String>,
    ab: Option<String>,
}

enum Line<'a> {
    Blank,
    Field(&'a str, &'a str),
    Continuation(&'a str),
    Malformed,
}

fn classify(line: &str) -> Line<'_> {
    if line.trim().is_empty() {
        return Line::Blank;
    }
    if line.starts_with("      ") {
        return Line::Continuation(line.trim());
    }
    let bytes = line.as_bytes();
    if bytes.len() < 5 || bytes[4] != b'-' || (bytes.len() > 5 && bytes[5] != b' ') {
        return Line::Malformed;
    }
    let tag = line[..4].trim_end();
    if tag.is_empty() || !tag.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit()) {
        return Line::Malformed;
    }
    Line::Field(tag, line.get(5..).unwrap_or("").trim())
}

/// Parses a MEDLINE export. Invalid UTF-8 is replaced, never fatal.
pub fn parse_medline(input: &[u8], source_name: &str) -> Result<(Corpus, IngestReport), IngestError> {
    let text = String::from_utf8_lossy(input);
    let mut report = IngestReport::default();
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(IngestError::EmptyInput);
    }

    let mut unique: IndexMap<u64, RawRecord> = IndexMap::new();
    for block in &blocks {
        let (raw, malformed) = read_block(block);
        report.malformed_lines += malformed;
        let Some(pmid) = raw.pmid else {
            // a block without a usable PMID is not a record
            report.malformed_lines += block.len() - malformed;
            continue;
        };
        report.total_records += 1;
        if unique.insert(pmid, raw).is_some() {
            report.duplicate_pmids += 1;
        }
    }

    let mut records = Vec::with_capacity(unique.len());
    for (pmid, raw) in unique {
        let Some(ab) = raw.ab.filter(|a| !a.is_empty()) else {
            report.dropped_no_abstract += 1;
            continue;
        };
        let date = match raw.dp.as_deref().map(parse_dp) {
            Some(Ok(d)) => d,
            _ => {
                report.malformed_lines += 1;
                SENTINEL_DATE
            }
        };
        let title = raw.ti.filter(|t| !t.is_empty()).unwrap_or_else(|| MISSING_TITLE.to_string());
        records.push(MedlineRecord { pmid, date, title, abstract_text: Some(ab) });
    }
    report.kept = records.len();
    if records.is_empty() {
        return Err(IngestError::NoValidRecords);
    }
    let corpus = Corpus { records, source_name: source_name.to_string() };
    Ok((corpus, report))
}

fn read_block(lines: &[&str]) -> (RawRecord, usize) {
    let mut raw = RawRecord::default();
    let mut malformed = 0;
    let mut fields: Vec<(&str, String)> = Vec::new();
    for line in lines {
        match classify(line) {
            Line::Blank => {}
            Line::Field(tag, value) => fields.push((tag, value.to_string())),
            Line::Continuation(value) => match fields.last_mut() {
                Some((_, v)) => {
                    if !v.is_empty() {
                        v.push(' ');
                    }
                    v.push_str(value);
                }
                None => malformed += 1,
            },
            Line::Malformed => malformed += 1,
        }
    }
    for (tag, value) in fields {
        match tag {
            "PMID" if raw.pmid.is_none() => match value.parse::<u64>() {
                Ok(p) if p > 0 => raw.pmid = Some(p),
                _ => malformed += 1,
            },
            "DP" if raw.dp.is_none() => raw.dp = Some(value),
            "TI" if raw.ti.is_none() => raw.ti = Some(value),
            "AB" if raw.ab.is_none() => raw.ab = Some(value),
            _ => {}
        }
    }
    (raw, malformed)
}

/// Reads a `DP` publication date. Missing month or day default to 1;
/// ranges and seasons keep only what parses from their first component.
pub fn parse_dp(dp: &str) -> Result<NaiveDate, UnparsableDate> {
    let err = || UnparsableDate(dp.to_string());
    let dp = dp.trim();
    let year_str = dp.get(..4).ok_or_else(err)?;
    if !year_str.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let year: i32 = year_str.parse().map_err(|_| err())?;
    let rest = &dp[4..];
    if rest.starts_with(|c: char| c.is_ascii_digit()) {
        return Err(err());
    }

    let mut parts = rest.split_whitespace();
    let month = parts.next().and_then(parse_month);
    let day = match month {
        Some(_) => parts.next().and_then(|p| {
            let digits: String = p.chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse::<u32>().ok()
        }),
        None => None,
    };
    let month = month.unwrap_or(1);
    let date = day
        .and_then(|d| NaiveDate::from_ymd_opt(year, month, d))
        .or_else(|| NaiveDate::from_ymd_opt(year, month, 1))
        .ok_or_else(err)?;
    Ok(date)
}

fn parse_month(token: &str) -> Option<u32> {
    let head: String =
        token.chars().take_while(|c| c.is_ascii_alphabetic()).take(3).collect::<String>().to_ascii_lowercase();
    MONTHS.iter().position(|m| *m == head).map(|i| i as u32 + 1)
}
