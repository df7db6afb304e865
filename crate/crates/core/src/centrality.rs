//! Node centrality measures and the centrality similarity score.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bfs_distances, is_strongly_connected, DirectedGraph};

#[derive(Debug, Error)]
pub enum CentralityError {
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("power iteration did not converge in {iters} iterations (last change {change:e})")]
    NoConvergence { iters: usize, change: f64 },
    #[error("sets must all have the same non-zero cardinality")]
    CardinalityMismatch,
    #[error("need at least two sets to compare")]
    TooFewSets,
    #[error("k = {k} outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("unknown centrality measure `{0}`")]
    UnknownMeasure(String),
}

pub type Result<T> = std::result::Result<T, CentralityError>;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
pub const DEFAULT_EIGEN_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityMeasure {
    InDegree,
    OutDegree,
    Betweenness,
    Closeness,
    Eigenvector,
}

impl CentralityMeasure {
    pub const ALL: [CentralityMeasure; 5] = [
        CentralityMeasure::InDegree,
        CentralityMeasure::OutDegree,
        CentralityMeasure::Betweenness,
        CentralityMeasure::Closeness,
        CentralityMeasure::Eigenvector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CentralityMeasure::InDegree => "in_degree",
            CentralityMeasure::OutDegree => "out_degree",
            CentralityMeasure::Betweenness => "betweenness",
            CentralityMeasure::Closeness => "closeness",
            CentralityMeasure::Eigenvector => "eigenvector",
        }
    }
}

impl fmt::Display for CentralityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CentralityMeasure {
    type Err = CentralityError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CentralityError::UnknownMeasure(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector {
    pub measure: CentralityMeasure,
    pub scores: Vec<f64>,
}

impl CentralityVector {
    /// CSV with header `node,score`, 17 significant digits per score.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,score")?;
        for (i, s) in self.scores.iter().enumerate() {
            writeln!(w, "{i},{s:.16e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeDirection {
    In,
    Out,
}

pub fn degree_centrality(g: &DirectedGraph, direction: DegreeDirection) -> CentralityVector {
    let (measure, degrees) = match direction {
        DegreeDirection::In => (CentralityMeasure::InDegree, g.in_degrees()),
        DegreeDirection::Out => (CentralityMeasure::OutDegree, g.out_degrees()),
    };
    CentralityVector { measure, scores: degrees.into_iter().map(|d| d as f64).collect() }
}

/// Shortest-path DAG from one source: visit order, predecessors, path counts.
struct PathDag {
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
    sigma: Vec<u64>,
}

fn path_dag(g: &DirectedGraph, s: usize) -> PathDag {
    let n = g.node_count();
    let mut sigma = vec![0u64; n];
    let mut dist: Vec<Option<usize>> = vec![None; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([s]);
    sigma[s] = 1;
    dist[s] = Some(0);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let dv = dist[v].unwrap();
        for &w in g.out_neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
            if dist[w] == Some(dv + 1) {
                sigma[w] = sigma[w].saturating_add(sigma[v]);
                preds[w].push(v);
            }
        }
    }
    PathDag { order, preds, sigma }
}

/// Unnormalized directed betweenness, endpoints excluded (Brandes accumulation).
///
/// Dependencies are accumulated as exact rationals while they fit in `i128`,
/// so scores are the correctly rounded values of the true sums; larger graphs
/// fall back to floating point.
pub fn betweenness_centrality(g: &DirectedGraph) -> CentralityVector {
    let dags: Vec<PathDag> = (0..g.node_count()).map(|s| path_dag(g, s)).collect();
    let scores = brandes_exact(&dags).unwrap_or_else(|| brandes_float(&dags));
    CentralityVector { measure: CentralityMeasure::Betweenness, scores }
}

fn brandes_exact(dags: &[PathDag]) -> Option<Vec<f64>> {
    type Q = Ratio<i128>;
    let n = dags.len();
    let zero = Q::from_integer(0);
    let one = Q::from_integer(1);
    let mut scores = vec![zero; n];
    let mut delta = vec![zero; n];
    for (s, dag) in dags.iter().enumerate() {
        delta.iter_mut().for_each(|d| *d = zero);
        for &w in dag.order.iter().rev() {
            if dag.sigma[w] == u64::MAX {
                return None;
            }
            let carry = one.checked_add(&delta[w])?;
            for &v in &dag.preds[w] {
                let share = Q::new(i128::from(dag.sigma[v]), i128::from(dag.sigma[w])).checked_mul(&carry)?;
                delta[v] = delta[v].checked_add(&share)?;
            }
            if w != s {
                scores[w] = scores[w].checked_add(&delta[w])?;
            }
        }
    }
    // One division of integers below 2^53 is correctly rounded.
    const EXACT: i128 = 1 << 53;
    scores
        .iter()
        .map(|q| (q.numer().abs() < EXACT && *q.denom() < EXACT).then(|| *q.numer() as f64 / *q.denom() as f64))
        .collect()
}

fn brandes_float(dags: &[PathDag]) -> Vec<f64> {
    let n = dags.len();
    let mut scores = vec![0.0; n];
    let mut delta = vec![0.0f64; n];
    for (s, dag) in dags.iter().enumerate() {
        delta.iter_mut().for_each(|d| *d = 0.0);
        for &w in dag.order.iter().rev() {
            for &v in &dag.preds[w] {
                delta[v] += dag.sigma[v] as f64 / dag.sigma[w] as f64 * (1.0 + delta[w]);
            }
            if w != s {
                scores[w] += delta[w];
            }
        }
    }
    scores
}

/// `(n - 1) / sum of outward hop distances`. Strongly connected graphs only.
pub fn closeness_centrality(g: &DirectedGraph) -> Result<CentralityVector> {
    if !is_strongly_connected(g) {
        return Err(CentralityError::NotStronglyConnected);
    }
    let n = g.node_count();
    let adj: Vec<Vec<usize>> = (0..n).map(|v| g.out_neighbors(v).to_vec()).collect();
    let scores = (0..n)
        .map(|i| {
            let total: usize = bfs_distances(&adj, i).into_iter().map(|d| d.expect("strongly connected")).sum();
            if total == 0 {
                0.0
            } else {
                (n - 1) as f64 / total as f64
            }
        })
        .collect();
    Ok(CentralityVector { measure: CentralityMeasure::Closeness, scores })
}

/// Left Perron eigenvector of the adjacency matrix (`v^T M = lambda v^T`).
///
/// Iterates on `M + I`, which has the same eigenvectors and is aperiodic on
/// strongly connected graphs, so the iteration cannot oscillate.
pub fn eigenvector_centrality(g: &DirectedGraph, tol: f64, max_iters: usize) -> Result<CentralityVector> {
    if !is_strongly_connected(g) {
        return Err(CentralityError::NotStronglyConnected);
    }
    let n = g.node_count();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        // (v^T (M + I))_j = v_j + sum over edges (i, j) of v_i
        next.copy_from_slice(&v);
        for (i, &vi) in v.iter().enumerate() {
            for &j in g.out_neighbors(i) {
                next[j] += vi;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        change = v.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut next);
        if change < tol {
            return Ok(CentralityVector { measure: CentralityMeasure::Eigenvector, scores: v });
        }
    }
    Err(CentralityError::NoConvergence { iters: max_iters, change })
}

/// Any measure with default eigenvector parameters.
pub fn compute(g: &DirectedGraph, measure: CentralityMeasure) -> Result<CentralityVector> {
    match measure {
        CentralityMeasure::InDegree => Ok(degree_centrality(g, DegreeDirection::In)),
        CentralityMeasure::OutDegree => Ok(degree_centrality(g, DegreeDirection::Out)),
        CentralityMeasure::Betweenness => Ok(betweenness_centrality(g)),
        CentralityMeasure::Closeness => closeness_centrality(g),
        CentralityMeasure::Eigenvector => eigenvector_centrality(g, DEFAULT_EIGEN_TOL, DEFAULT_EIGEN_MAX_ITERS),
    }
}

/// The `k` highest-scoring nodes in rank order; ties go to the lower id.
pub fn top_k_nodes(c: &CentralityVector, k: usize) -> Result<Vec<usize>> {
    let n = c.scores.len();
    if k < 1 || k > n {
        return Err(CentralityError::InvalidK { k, n });
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.sort_by(|&a, &b| c.scores[b].total_cmp(&c.scores[a]).then(a.cmp(&b)));
    ids.truncate(k);
    Ok(ids)
}

/// Mean pairwise overlap of equal-size node sets: 1 when all sets coincide,
/// 0 when they are pairwise disjoint.
pub fn similarity_score(sets: &[BTreeSet<usize>]) -> Result<f64> {
    if sets.len() < 2 {
        return Err(CentralityError::TooFewSets);
    }
    let size = sets[0].len();
    if size == 0 || sets.iter().any(|s| s.len() != size) {
        return Err(CentralityError::CardinalityMismatch);
    }
    // Every pair shares the denominator 2 * size, so sum integer overlaps and
    // divide once.
    let mut overlap = 0u64;
    let mut pairs = 0u64;
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            overlap += (2 * size - a.symmetric_difference(b).count()) as u64;
            pairs += 1;
        }
    }
    Ok(overlap as f64 / (2 * size as u64 * pairs) as f64)
}

/// Number of adversaries for a fraction of `n`, at least one.
pub fn fraction_to_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Similarity of the five measures' top sets at each adversarial fraction.
pub fn similarity_curve(g: &DirectedGraph, fractions: &[f64]) -> Result<Vec<(f64, f64)>> {
    let vectors = CentralityMeasure::ALL
        .iter()
        .map(|&m| compute(g, m))
        .collect::<Result<Vec<_>>>()?;
    let n = g.node_count();
    fractions
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CentralityError::InvalidFraction(f));
            }
            let k = fraction_to_count(f, n);
            let sets = vectors
                .iter()
                .map(|c| top_k_nodes(c, k).map(|v| v.into_iter().collect()))
                .collect::<Result<Vec<BTreeSet<usize>>>>()?;
            Ok((f, similarity_score(&sets)?))
        })
        .collect()
}
