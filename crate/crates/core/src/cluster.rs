//! Lloyd's k-means with k-means++ seeding over L2-normalized TF-IDF rows.
//!
//! Output is a deterministic function of (matrix, k, seed). The assignment
//! step may run on several threads, but every per-document computation is
//! sequential and centroid sums are accumulated in document order, so the
//! thread count never changes a single bit of the result.

use std::cmp::Ordering;
use std::collections::HashMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::TermDocMatrix;
use crate::medline::Corpus;

pub const DEFAULT_SEED: u64 = 42;
pub const MAX_ITERATIONS: usize = 100;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;
pub const LABEL_WORDS: usize = 6;

// Iterations past MAX_ITERATIONS are only taken while the final assignment
// would leave a cluster empty.
const HARD_ITERATION_CAP: usize = 1_000;
const PARALLEL_MIN_ROWS: usize = 256;
// Distances closer than this are ties; the expanded-norm distance carries a
// few ulps of rounding that would otherwise split exact ties arbitrarily.
const TIE_EPSILON: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    KTooSmall,
    #[error("k = {k} exceeds the maximum of {max} for this document set")]
    KTooLarge { k: usize, max: usize },
    #[error("every document row is zero; nothing to cluster")]
    DegenerateMatrix,
    #[error("cluster {index} is out of range (k = {k})")]
    ClusterOutOfRange { index: usize, k: usize },
    #[error("expected {expected} initial centroids of width {width}")]
    BadInitialCentroids { expected: usize, width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Converged,
    Tolerance,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    /// Row index → cluster index in `0..k`.
    pub assignments: Vec<usize>,
    /// Dense centroids the final assignment was made against.
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub labels: Vec<Vec<String>>,
    pub wcss: f64,
    /// WCSS after each centroid update.
    pub wcss_trace: Vec<f64>,
    pub seed: u64,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    /// Row index → pmid, copied from the matrix.
    pub doc_ids: Vec<u64>,
}

impl ClusterModel {
    pub fn members(&self, c: usize) -> Result<Vec<usize>, ClusterError> {
        if c >= self.k {
            return Err(ClusterError::ClusterOutOfRange { index: c, k: self.k });
        }
        Ok((0..self.assignments.len()).filter(|&d| self.assignments[d] == c).collect())
    }

    pub fn member_pmids(&self, c: usize) -> Result<Vec<u64>, ClusterError> {
        Ok(self.members(c)?.into_iter().map(|d| self.doc_ids[d]).collect())
    }
}

/// Squared Euclidean distance between a row and every centroid.
struct Geometry<'a> {
    matrix: &'a TermDocMatrix,
    row_norms: Vec<f64>,
}

impl<'a> Geometry<'a> {
    fn new(matrix: &'a TermDocMatrix) -> Self {
        let row_norms = matrix.rows.iter().map(|r| r.norm_sq()).collect();
        Self { matrix, row_norms }
    }

    fn distance(&self, row: usize, centroid: &[f64], centroid_norm: f64) -> f64 {
        let d = self.row_norms[row] + centroid_norm - 2.0 * self.matrix.rows[row].dot_dense(centroid);
        d.max(0.0)
    }
}

fn centroid_norms(centroids: &[Vec<f64>]) -> Vec<f64> {
    centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect()
}

fn nearest(geo: &Geometry<'_>, row: usize, centroids: &[Vec<f64>], norms: &[f64], current: Option<usize>) -> usize {
    let dists: Vec<f64> =
        centroids.iter().zip(norms).map(|(centroid, &norm)| geo.distance(row, centroid, norm)).collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = min + TIE_EPSILON;
    // a document already sitting on one of the tied nearest centroids stays put
    if let Some(cur) = current.filter(|&c| c < dists.len() && dists[c] <= cutoff) {
        return cur;
    }
    dists.iter().position(|&d| d <= cutoff).unwrap_or(0)
}

/// One assignment step. Ties go to the lowest cluster index, except that a
/// document whose `current` cluster is among the tied nearest keeps it.
pub fn assign_step(matrix: &TermDocMatrix, centroids: &[Vec<f64>], current: Option<&[usize]>) -> Vec<usize> {
    let geo = Geometry::new(matrix);
    assign_with(&geo, centroids, current)
}

fn assign_with(geo: &Geometry<'_>, centroids: &[Vec<f64>], current: Option<&[usize]>) -> Vec<usize> {
    let norms = centroid_norms(centroids);
    let n = geo.matrix.n_docs();
    let one = |d: usize| nearest(geo, d, centroids, &norms, current.map(|a| a[d]));
    if n >= PARALLEL_MIN_ROWS {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}

fn means(matrix: &TermDocMatrix, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let width = matrix.n_terms();
    let mut sums = vec![vec![0.0; width]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in matrix.rows.iter().zip(assignments) {
        counts[c] += 1;
        for &(col, w) in &row.entries {
            sums[c][col] += w;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            let inv = count as f64;
            for x in sum.iter_mut() {
                *x /= inv;
            }
        }
    }
    sums
}

fn cost(geo: &Geometry<'_>, assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let norms = centroid_norms(centroids);
    assignments.iter().enumerate().map(|(d, &c)| geo.distance(d, &centroids[c], norms[c])).sum()
}

fn sizes_of(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    sizes
}

/// Gives each empty cluster the document farthest from its own centroid,
/// taken only from clusters that keep at least one member.
fn repair_empty(geo: &Geometry<'_>, assignments: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sizes = sizes_of(assignments, k);
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let norms = centroid_norms(centroids);
        let mut pick: Option<(usize, f64)> = None;
        for (d, &c) in assignments.iter().enumerate() {
            if sizes[c] < 2 {
                continue;
            }
            let dist = geo.distance(d, &centroids[c], norms[c]);
            if pick.is_none_or(|(_, best)| dist > best) {
                pick = Some((d, dist));
            }
        }
        let Some((d, _)) = pick else { break };
        sizes[assignments[d]] -= 1;
        sizes[empty] += 1;
        assignments[d] = empty;
        centroids[empty] = geo.matrix.rows[d].to_dense(geo.matrix.n_terms());
    }
}

fn seed_plus_plus(geo: &Geometry<'_>, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let matrix = geo.matrix;
    let n = matrix.n_docs();
    let width = matrix.n_terms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![matrix.rows[first].to_dense(width)];
    let norm0 = centroid_norms(&centroids)[0];
    let mut d2: Vec<f64> = (0..n).map(|d| geo.distance(d, &centroids[0], norm0)).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (d, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(d);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            (0..n).find(|&d| !chosen[d]).unwrap_or(0)
        };
        chosen[next] = true;
        let centroid = matrix.rows[next].to_dense(width);
        let norm = centroid.iter().map(|x| x * x).sum();
        for (d, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(geo.distance(d, &centroid, norm));
        }
        centroids.push(centroid);
    }
    centroids
}

fn check_bounds(matrix: &TermDocMatrix, k: usize) -> Result<(), ClusterError> {
    if k < 1 {
        return Err(ClusterError::KTooSmall);
    }
    let max = matrix.n_docs().saturating_sub(1);
    if k > max {
        return Err(ClusterError::KTooLarge { k, max });
    }
    if matrix.all_zero() {
        return Err(ClusterError::DegenerateMatrix);
    }
    Ok(())
}

pub fn kmeans(matrix: &TermDocMatrix, k: usize, seed: u64) -> Result<ClusterModel, ClusterError> {
    check_bounds(matrix, k)?;
    let geo = Geometry::new(matrix);
    let init = seed_plus_plus(&geo, k, seed);
    Ok(lloyd(&geo, init, seed))
}

/// Runs Lloyd iterations from caller-supplied centroids.
pub fn kmeans_from_centroids(
    matrix: &TermDocMatrix,
    init: Vec<Vec<f64>>,
    seed: u64,
) -> Result<ClusterModel, ClusterError> {
    check_bounds(matrix, init.len())?;
    if init.iter().any(|c| c.len() != matrix.n_terms()) {
        return Err(ClusterError::BadInitialCentroids { expected: init.len(), width: matrix.n_terms() });
    }
    let geo = Geometry::new(matrix);
    Ok(lloyd(&geo, init, seed))
}

fn lloyd(geo: &Geometry<'_>, mut centroids: Vec<Vec<f64>>, seed: u64) -> ClusterModel {
    let matrix = geo.matrix;
    let k = centroids.len();
    let mut assignments = assign_with(geo, &centroids, None);
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let stop_reason = loop {
        iterations += 1;
        repair_empty(geo, &mut assignments, &mut centroids);
        centroids = means(matrix, &assignments, k);
        let wcss = cost(geo, &assignments, &centroids);
        let previous = trace.last().copied();
        trace.push(wcss);

        let next = assign_with(geo, &centroids, Some(&assignments));
        if next == assignments {
            break StopReason::Converged;
        }
        let small_gain = match previous {
            Some(p) if p > 0.0 => (p - wcss) / p < RELATIVE_TOLERANCE,
            Some(_) => true,
            None => false,
        };
        let reason = if small_gain {
            Some(StopReason::Tolerance)
        } else if iterations >= MAX_ITERATIONS {
            Some(StopReason::IterationCap)
        } else {
            None
        };
        let no_empty = sizes_of(&next, k).iter().all(|&s| s > 0);
        assignments = next;
        if let Some(reason) = reason {
            if no_empty {
                break reason;
            }
        }
        if iterations >= HARD_ITERATION_CAP {
            repair_empty(geo, &mut assignments, &mut centroids);
            break StopReason::IterationCap;
        }
    };

    let wcss = cost(geo, &assignments, &centroids);
    let mut model = ClusterModel {
        k,
        sizes: sizes_of(&assignments, k),
        assignments,
        centroids,
        labels: Vec::new(),
        wcss,
        wcss_trace: trace,
        seed,
        iterations_run: iterations,
        stop_reason,
        doc_ids: matrix.doc_ids.clone(),
    };
    model.labels = label_clusters(&model, matrix);
    model
}

/// Up to six terms with the largest positive centroid weight per cluster;
/// equal weights fall back to lexicographic order.
pub fn label_clusters(model: &ClusterModel, matrix: &TermDocMatrix) -> Vec<Vec<String>> {
    let vocab = &matrix.vocabulary;
    model
        .centroids
        .iter()
        .map(|centroid| {
            let mut weighted: Vec<(usize, f64)> =
                centroid.iter().copied().enumerate().filter(|&(_, w)| w > 0.0).collect();
            weighted.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| vocab.term(a.0).cmp(vocab.term(b.0)))
            });
            weighted.into_iter().take(LABEL_WORDS).map(|(col, _)| vocab.term(col).to_string()).collect()
        })
        .collect()
}

/// `(pmid, date)` of cluster `c` (0-based), newest first, ties by pmid
/// descending.
pub fn cluster_members(model: &ClusterModel, c: usize, corpus: &Corpus) -> Result<Vec<(u64, NaiveDate)>, ClusterError> {
    let dates: HashMap<u64, NaiveDate> = corpus.records.iter().map(|r| (r.pmid, r.date)).collect();
    let mut members: Vec<(u64, NaiveDate)> = model
        .member_pmids(c)?
        .into_iter()
        .map(|p| (p, dates.get(&p).copied().unwrap_or(crate::medline::SENTINEL_DATE)))
        .collect();
    sort_newest_first(&mut members);
    Ok(members)
}

pub(crate) fn sort_newest_first(members: &mut [(u64, NaiveDate)]) {
    members.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));
}
