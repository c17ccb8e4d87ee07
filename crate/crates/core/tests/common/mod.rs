#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use abstract_mining::matrix::{build_vocabulary, SparseRow, TermDocMatrix};
use abstract_mining::session::Session;
use abstract_mining::text::{raw_tokens, TokenizedDoc};
use abstract_mining::Corpus;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn sample_bytes() -> Vec<u8> {
    std::fs::read(fixture("sample.medline")).unwrap()
}

/// Wraps dense rows in a matrix with synthetic term names.
pub fn dense_matrix(rows: &[Vec<f64>]) -> TermDocMatrix {
    let width = rows[0].len();
    let names =
        [TokenizedDoc { pmid: 0, tokens: (0..width).map(|i| format!("t{i:03}")).collect(), raw_tokens: vec![] }];
    TermDocMatrix {
        rows: rows
            .iter()
            .map(|r| SparseRow { entries: r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect() })
            .collect(),
        zero_rows: rows.iter().map(|r| r.iter().all(|&w| w == 0.0)).collect(),
        doc_ids: (1..=rows.len() as u64).collect(),
        vocabulary: build_vocabulary(&names).unwrap(),
    }
}

/// Random non-negative unit rows, roughly half the entries zero.
pub fn random_unit_rows(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let row: Vec<f64> =
                (0..width).map(|_| if rng.random_bool(0.5) { rng.random_range(0.05..1.0) } else { 0.0 }).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break row.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by full scan over dense differences. Distances within
/// 1e-12 of the minimum count as tied; ties go to the lowest index.
pub fn brute_nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let dists: Vec<f64> = centroids.iter().map(|c| sq_dist(row, c)).collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    dists.iter().position(|&d| d <= min + 1e-12).unwrap()
}

/// WCSS of a labeling, with centroids as the group means.
pub fn partition_wcss(rows: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let width = rows[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = vec![0.0; width];
        for m in &members {
            for (x, v) in mean.iter_mut().zip(m.iter()) {
                *x += v;
            }
        }
        for x in &mut mean {
            *x /= members.len() as f64;
        }
        total += members.iter().map(|m| sq_dist(m, &mean)).sum::<f64>();
    }
    total
}

/// Minimum WCSS over every assignment of rows to k labels.
pub fn exhaustive_optimum(rows: &[Vec<f64>], k: usize) -> f64 {
    let n = rows.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(partition_wcss(rows, &labels, k));
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| c2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| c2(v)).sum();
    let expected = sum_a * sum_b / c2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// pmids whose abstract contains any of `words` as a whole token, by a
/// direct scan of the text.
pub fn linear_scan_excluded(corpus: &Corpus, words: &[&str]) -> Vec<u64> {
    corpus
        .records
        .iter()
        .filter(|r| {
            let lower = r.abstract_str().to_ascii_lowercase();
            let bytes = lower.as_bytes();
            words.iter().any(|w| {
                lower.match_indices(w).any(|(i, _)| {
                    let before = i == 0 || !bytes[i - 1].is_ascii_alphabetic();
                    let end = i + w.len();
                    let after = end == bytes.len() || !bytes[end].is_ascii_alphabetic();
                    before && after
                })
            })
        })
        .map(|r| r.pmid)
        .collect()
}

pub struct Synthetic {
    pub medline: String,
    /// Topic of each record, in file order.
    pub topics: Vec<usize>,
}

fn word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
}

/// Abstracts drawn from `topics` disjoint vocabularies of `vocab_per_topic`
/// words each, optionally mixed with `shared` words common to all topics.
pub fn synthetic_medline(
    seed: u64,
    docs: usize,
    topics: usize,
    vocab_per_topic: usize,
    shared: usize,
    words_per_doc: usize,
) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stopwords = abstract_mining::Stopwords::english();
    let mut seen = std::collections::HashSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let w = word(rng, 7);
        if !stopwords.contains(&w) && seen.insert(w.clone()) {
            break w;
        }
    };
    let vocab: Vec<Vec<String>> =
        (0..topics).map(|_| (0..vocab_per_topic).map(|_| fresh(&mut rng)).collect()).collect();
    let common: Vec<String> = (0..shared).map(|_| fresh(&mut rng)).collect();
    let mut medline = String::new();
    let mut labels = Vec::with_capacity(docs);
    for d in 0..docs {
        let topic = d % topics;
        labels.push(topic);
        let words: Vec<&str> = (0..words_per_doc)
            .map(|_| {
                if !common.is_empty() && rng.random_bool(0.3) {
                    common.choose(&mut rng).unwrap().as_str()
                } else {
                    vocab[topic].choose(&mut rng).unwrap().as_str()
                }
            })
            .collect();
        let _ = write!(
            medline,
            "PMID- {}\nDP  - {} {} {}\nTI  - Synthetic study {} of topic {}.\nAB  - {}.\n\n",
            1000 + d,
            1980 + (d % 40),
            ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"][d % 12],
            1 + d % 28,
            d,
            topic,
            words.join(" ")
        );
    }
    Synthetic { medline, topics: labels }
}

/// Every raw token of the abstract, independent of the library tokenizer's
/// stopword handling.
pub fn abstract_token_set(text: &str) -> std::collections::HashSet<String> {
    raw_tokens(text).into_iter().collect()
}

const WORDS: &[&str] = &["air", "rats", "doppler", "stroke", "the", "progranulin", "imaging", "absent", "cerebral"];

/// Applies one random operation; errors are legal outcomes and must leave
/// the state untouched.
pub fn random_op(s: &mut Session, rng: &mut ChaCha8Rng) {
    let before = (s.current_doc_ids().to_vec(), s.k(), s.selected_cluster(), s.history_depth());
    let result = match rng.random_range(0..4) {
        0 => {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(0..3);
            let words: Vec<&str> = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
            s.update(k, &words)
        }
        1 => s.use_cluster(),
        2 => s.back(),
        _ => s.select(rng.random_range(0..=s.k() + 1)),
    };
    if result.is_err() {
        assert_eq!(before, (s.current_doc_ids().to_vec(), s.k(), s.selected_cluster(), s.history_depth()));
    }
}
