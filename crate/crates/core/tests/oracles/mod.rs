//! Independent reference implementations used as test oracles.
//!
//! Everything here works from a plain `n x n` boolean adjacency matrix and
//! exhaustive definitions, sharing no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_rational::Ratio;

pub type Adj = Vec<Vec<bool>>;

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Adj {
    let mut a = vec![vec![false; n]; n];
    for &(s, t) in edges {
        a[s][t] = true;
    }
    a
}

/// Edge list of the graph whose edges are the set bits of `mask` over all
/// ordered pairs `(s, t)`, `s != t`, in row-major order.
pub fn edges_from_mask(n: usize, mask: u64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut bit = 0;
    for s in 0..n {
        for t in 0..n {
            if s != t {
                if mask >> bit & 1 == 1 {
                    out.push((s, t));
                }
                bit += 1;
            }
        }
    }
    out
}

/// All-pairs hop distances by Floyd-Warshall; `None` when unreachable.
pub fn floyd_warshall(a: &Adj) -> Vec<Vec<Option<u64>>> {
    let n = a.len();
    let mut d: Vec<Vec<Option<u64>>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Some(0) } else if a[i][j] { Some(1) } else { None }).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

pub fn strongly_connected(a: &Adj) -> bool {
    floyd_warshall(a).iter().all(|row| row.iter().all(Option::is_some))
}

/// Lists every shortest `s -> t` path explicitly.
fn shortest_paths(a: &Adj, d: &[Vec<Option<u64>>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn walk(a: &Adj, d: &[Vec<Option<u64>>], u: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if u == t {
            out.push(path.clone());
            return;
        }
        let rest = d[u][t].unwrap();
        for w in 0..a.len() {
            if a[u][w] && d[w][t] == Some(rest - 1) {
                path.push(w);
                walk(a, d, w, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if d[s][t].is_some() {
        walk(a, d, s, t, &mut vec![s], &mut out);
    }
    out
}

/// Betweenness as exact rationals by enumerating every shortest path.
pub fn betweenness(a: &Adj) -> Vec<Ratio<i64>> {
    let n = a.len();
    let d = floyd_warshall(a);
    let mut score = vec![Ratio::from_integer(0); n];
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let paths = shortest_paths(a, &d, s, t);
            if paths.is_empty() {
                continue;
            }
            let total = paths.len() as i64;
            for (v, sc) in score.iter_mut().enumerate() {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as i64;
                *sc += Ratio::new(through, total);
            }
        }
    }
    score
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn closeness(a: &Adj) -> Vec<Ratio<i64>> {
    let n = a.len();
    let d = floyd_warshall(a);
    (0..n)
        .map(|i| {
            let total: u64 = (0..n).map(|j| d[i][j].expect("strongly connected")).sum();
            Ratio::new(n as i64 - 1, total as i64)
        })
        .collect()
}

pub fn in_degree(a: &Adj) -> Vec<f64> {
    let n = a.len();
    (0..n).map(|j| (0..n).filter(|&i| a[i][j]).count() as f64).collect()
}

pub fn out_degree(a: &Adj) -> Vec<f64> {
    a.iter().map(|row| row.iter().filter(|&&b| b).count() as f64).collect()
}

/// Left Perron vector of the adjacency matrix from a dense solve: the
/// spectral radius from the full eigenvalue set, then the null vector of
/// `M^T - lambda I` from its SVD. Positive, L2-normalized.
pub fn eigenvector(a: &Adj) -> Vec<f64> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| if a[i][j] { 1.0 } else { 0.0 });
    let mt = m.transpose();
    // Eigenvalues of M^T + I: the shift separates +lambda from -lambda, which
    // otherwise stalls the QR iteration on bipartite graphs.
    let lifted = &mt + DMatrix::identity(n, n);
    let lambda = lifted
        .clone()
        .try_schur(1e-15, 100_000)
        .expect("Schur decomposition converges")
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max)
        - 1.0;
    let shifted = &mt - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap()
        .0;
    let v_t = svd.v_t.unwrap();
    let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x *= sign / norm);
    let residual = (&mt * DMatrix::from_column_slice(n, 1, &v) - DMatrix::from_column_slice(n, 1, &v) * lambda).norm();
    assert!(residual < 1e-10, "dense eigenvector residual {residual:e}");
    v
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Top `k` ids by score, ties (within `tie_tol`) to the lower id, by
/// repeated selection.
pub fn top_k(scores: &[f64], k: usize, tie_tol: f64) -> BTreeSet<usize> {
    let mut chosen = BTreeSet::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if chosen.contains(&i) {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if scores[i] > scores[b] + tie_tol => best = Some(i),
                _ => {}
            }
        }
        chosen.insert(best.unwrap());
    }
    chosen
}

/// Mean over unordered pairs of `1 - |S1 xor S2| / (|S1| + |S2|)`, in
/// rationals.
pub fn similarity(sets: &[BTreeSet<usize>]) -> Ratio<i64> {
    let mut total = Ratio::from_integer(0);
    let mut pairs = 0;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let (a, b) = (&sets[i], &sets[j]);
            let xor = a.difference(b).count() + b.difference(a).count();
            total += Ratio::from_integer(1) - Ratio::new(xor as i64, (a.len() + b.len()) as i64);
            pairs += 1;
        }
    }
    total / Ratio::from_integer(pairs)
}

/// Similarity of the five measures' top-`k` sets.
pub fn similarity_at(a: &Adj, k: usize) -> Ratio<i64> {
    let to_f = |v: Vec<Ratio<i64>>| v.into_iter().map(ratio_to_f64).collect::<Vec<_>>();
    let vectors = [
        in_degree(a),
        out_degree(a),
        to_f(betweenness(a)),
        to_f(closeness(a)),
        eigenvector(a),
    ];
    let sets: Vec<BTreeSet<usize>> = vectors.iter().map(|v| top_k(v, k, 1e-9)).collect();
    similarity(&sets)
}

/// Symmetrized average pairwise hop distance of a node set.
pub fn d_avg(a: &Adj, set: &[usize]) -> f64 {
    let d = floyd_warshall(a);
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let (x, y) = (set[i], set[j]);
            total += (d[x][y].unwrap() + d[y][x].unwrap()) as f64 / 2.0;
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Every `k`-subset of `0..n` containing `fixed`.
pub fn subsets_with(n: usize, k: usize, fixed: usize) -> Vec<Vec<usize>> {
    let others: Vec<usize> = (0..n).filter(|&v| v != fixed).collect();
    let mut out = Vec::new();
    let mut cur = vec![fixed];
    fn rec(others: &[usize], start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..others.len() {
            cur.push(others[i]);
            rec(others, i + 1, k, cur, out);
            cur.pop();
        }
    }
    rec(&others, 0, k, &mut cur, &mut out);
    out
}
