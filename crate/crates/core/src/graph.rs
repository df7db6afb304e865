//! Directed communication topologies.
//!
//! Graphs are stored as sorted out-adjacency lists with no self-loops and no
//! duplicate edges. Every iteration order in the crate derives from that
//! ordering, which is what makes runs bit-reproducible.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{substream, Stream};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("edge list parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge list contains no edges")]
    EmptyGraph,
    #[error("no strongly connected draw after {attempts} attempts (first seed {seed})")]
    ConnectivityFailure { attempts: usize, seed: u64 },
    #[error("edge ({0}, {1}) is out of range or a self-loop")]
    InvalidEdge(usize, usize),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Directed graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    out: Vec<Vec<usize>>,
}

impl DirectedGraph {
    /// Builds a graph from an edge iterator. Duplicate edges collapse; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out = vec![Vec::new(); n];
        for (s, t) in edges {
            if s >= n || t >= n || s == t {
                return Err(GraphError::InvalidEdge(s, t));
            }
            out[s].push(t);
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, out })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, out: vec![Vec::new(); n] }
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Self {
        if n < 2 {
            return Self::empty(n);
        }
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle edges are valid")
    }

    /// Complete directed graph (every ordered pair).
    pub fn complete(n: usize) -> Self {
        let out = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self { n, out }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.out.get(s).is_some_and(|l| l.binary_search(&t).is_ok())
    }

    /// All edges in (source, target) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(s, l)| l.iter().map(move |&t| (s, t)))
    }

    /// Sorted in-neighbor lists.
    pub fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let mut inn = vec![Vec::new(); self.n];
        for (s, t) in self.edges() {
            inn[t].push(s);
        }
        inn
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.out.iter().map(Vec::len).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for (_, t) in self.edges() {
            d[t] += 1;
        }
        d
    }

    /// Same graph with every edge reversed.
    pub fn reversed(&self) -> Self {
        Self { n: self.n, out: self.in_adjacency() }
    }
}

/// Which way a traversal follows edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Out,
    In,
    Undirected,
}

impl DirectedGraph {
    /// Neighbor lists as seen by a traversal in `dir`, each sorted ascending.
    pub fn neighbor_lists(&self, dir: Direction) -> Vec<Vec<usize>> {
        match dir {
            Direction::Out => self.out.clone(),
            Direction::In => self.in_adjacency(),
            Direction::Undirected => {
                let inn = self.in_adjacency();
                self.out
                    .iter()
                    .zip(inn)
                    .map(|(o, i)| {
                        let mut l: Vec<usize> = o.iter().copied().chain(i).collect();
                        l.sort_unstable();
                        l.dedup();
                        l
                    })
                    .collect()
            }
        }
    }
}

/// A graph family together with its parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    ErdosRenyi { n: usize, p_edge: f64, seed: u64 },
    PreferentialAttachment { n: usize, m_attach: usize, seed: u64 },
    DirectedGeometric { n: usize, radius: f64, seed: u64 },
    KOut { n: usize, k: usize, seed: u64 },
    EdgeList { path: PathBuf },
}

impl GraphSpec {
    pub fn seed(&self) -> Option<u64> {
        match *self {
            GraphSpec::ErdosRenyi { seed, .. }
            | GraphSpec::PreferentialAttachment { seed, .. }
            | GraphSpec::DirectedGeometric { seed, .. }
            | GraphSpec::KOut { seed, .. } => Some(seed),
            GraphSpec::EdgeList { .. } => None,
        }
    }

    /// Copy of the spec with a different seed; edge lists are returned unchanged.
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut s = self.clone();
        match &mut s {
            GraphSpec::ErdosRenyi { seed, .. }
            | GraphSpec::PreferentialAttachment { seed, .. }
            | GraphSpec::DirectedGeometric { seed, .. }
            | GraphSpec::KOut { seed, .. } => *seed = new_seed,
            GraphSpec::EdgeList { .. } => {}
        }
        s
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            GraphSpec::ErdosRenyi { .. } => "erdos_renyi",
            GraphSpec::PreferentialAttachment { .. } => "preferential_attachment",
            GraphSpec::DirectedGeometric { .. } => "directed_geometric",
            GraphSpec::KOut { .. } => "k_out",
            GraphSpec::EdgeList { .. } => "edge_list",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GraphError::InvalidSpec(m));
        let check_n = |n: usize| if n == 0 { bad("n must be at least 1".into()) } else { Ok(()) };
        match *self {
            GraphSpec::ErdosRenyi { n, p_edge, .. } => {
                check_n(n)?;
                if !(0.0..=1.0).contains(&p_edge) {
                    return bad(format!("p_edge = {p_edge} outside [0, 1]"));
                }
            }
            GraphSpec::PreferentialAttachment { n, m_attach, .. } => {
                check_n(n)?;
                if m_attach < 1 || m_attach >= n {
                    return bad(format!("m_attach = {m_attach} must satisfy 1 <= m_attach < n = {n}"));
                }
            }
            GraphSpec::DirectedGeometric { n, radius, .. } => {
                check_n(n)?;
                if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
                    return bad(format!("radius = {radius} outside (0, sqrt(2)]"));
                }
            }
            GraphSpec::KOut { n, k, .. } => {
                check_n(n)?;
                if k < 1 || k >= n {
                    return bad(format!("k = {k} must satisfy 1 <= k < n = {n}"));
                }
            }
            GraphSpec::EdgeList { .. } => {}
        }
        Ok(())
    }
}

/// Draws a graph from `spec`. Same spec (including seed) gives the same graph.
pub fn generate(spec: &GraphSpec) -> Result<DirectedGraph> {
    spec.validate()?;
    match *spec {
        GraphSpec::ErdosRenyi { n, p_edge, seed } => Ok(erdos_renyi(n, p_edge, seed)),
        GraphSpec::PreferentialAttachment { n, m_attach, seed } => {
            Ok(preferential_attachment(n, m_attach, seed))
        }
        GraphSpec::DirectedGeometric { n, radius, seed } => Ok(directed_geometric(n, radius, seed).0),
        GraphSpec::KOut { n, k, seed } => Ok(k_out(n, k, seed)),
        GraphSpec::EdgeList { ref path } => Ok(load_edge_list(path)?.0),
    }
}

fn erdos_renyi(n: usize, p: f64, seed: u64) -> DirectedGraph {
    let mut rng = substream(seed, Stream::Graph, 0);
    let mut out = vec![Vec::new(); n];
    for (i, list) in out.iter_mut().enumerate() {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                list.push(j);
            }
        }
    }
    DirectedGraph { n, out }
}

fn k_out(n: usize, k: usize, seed: u64) -> DirectedGraph {
    let mut rng = substream(seed, Stream::Graph, 0);
    let out = (0..n)
        .map(|i| {
            let mut l: Vec<usize> = index::sample(&mut rng, n - 1, k)
                .into_iter()
                .map(|j| if j >= i { j + 1 } else { j })
                .collect();
            l.sort_unstable();
            l
        })
        .collect();
    DirectedGraph { n, out }
}

/// Geometric graph in the unit square with reciprocal edges for every pair
/// within `radius`. Also returns the sampled points.
pub fn directed_geometric(n: usize, radius: f64, seed: u64) -> (DirectedGraph, Vec<[f64; 2]>) {
    let mut rng = substream(seed, Stream::Graph, 0);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let out = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && point_distance(points[i], points[j]) <= radius)
                .collect()
        })
        .collect();
    (DirectedGraph { n, out }, points)
}

pub fn point_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn preferential_attachment(n: usize, m: usize, seed: u64) -> DirectedGraph {
    let mut rng = substream(seed, Stream::Graph, 0);
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut degree = vec![0usize; n];
    let core = (m + 1).min(n);
    for i in 0..core {
        for j in 0..core {
            if i != j {
                out[i].push(j);
                degree[i] += 1;
            }
        }
    }
    for v in core..n {
        // sequential weighted sampling without replacement, weight = deg + 1
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        for _ in 0..m {
            let total: usize = (0..v).filter(|u| !chosen.contains(u)).map(|u| degree[u] + 1).sum();
            let mut ticket = rng.random_range(0..total);
            let pick = (0..v)
                .filter(|u| !chosen.contains(u))
                .find(|&u| {
                    let w = degree[u] + 1;
                    if ticket < w {
                        true
                    } else {
                        ticket -= w;
                        false
                    }
                })
                .expect("ticket falls inside total weight");
            chosen.push(pick);
        }
        for &t in &chosen {
            out[v].push(t);
            out[t].push(v);
            degree[v] += 2;
            degree[t] += 2;
        }
    }
    for l in &mut out {
        l.sort_unstable();
    }
    DirectedGraph { n, out }
}

/// Counts of lines dropped while loading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Reads a whitespace-separated `src dst` edge list.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<(DirectedGraph, LoadReport)> {
    let file = std::fs::File::open(path)?;
    parse_edge_list(std::io::BufReader::new(file))
}

/// Parses edge-list text. If the ids used are exactly `0..n` they are kept;
/// otherwise they are remapped densely in order of first appearance.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<(DirectedGraph, LoadReport)> {
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let mut next = |what: &str| -> Result<u64> {
            let tok = toks.next().ok_or_else(|| GraphError::Parse {
                line: lineno + 1,
                msg: format!("missing {what} id"),
            })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                msg: format!("non-integer token `{tok}`"),
            })
        };
        let s = next("source")?;
        let t = next("target")?;
        if let Some(extra) = toks.next() {
            return Err(GraphError::Parse { line: lineno + 1, msg: format!("unexpected token `{extra}`") });
        }
        raw.push((s, t));
    }

    let mut order: Vec<u64> = Vec::new();
    let mut ids: HashMap<u64, usize> = HashMap::new();
    for &(s, t) in &raw {
        for v in [s, t] {
            ids.entry(v).or_insert_with(|| {
                order.push(v);
                order.len() - 1
            });
        }
    }
    let n = order.len();
    let already_dense = order.iter().all(|&v| (v as usize) < n);
    let map = |v: u64| if already_dense { v as usize } else { ids[&v] };

    let mut report = LoadReport::default();
    let mut out = vec![Vec::new(); n];
    for &(s, t) in &raw {
        let (s, t) = (map(s), map(t));
        if s == t {
            report.self_loops_dropped += 1;
        } else {
            out[s].push(t);
        }
    }
    for l in &mut out {
        let before = l.len();
        l.sort_unstable();
        l.dedup();
        report.duplicates_dropped += before - l.len();
    }
    let g = DirectedGraph { n, out };
    if g.edge_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    Ok((g, report))
}

/// Writes `src dst` lines with LF endings.
pub fn write_edge_list<W: Write>(g: &DirectedGraph, mut w: W) -> std::io::Result<()> {
    for (s, t) in g.edges() {
        writeln!(w, "{s} {t}")?;
    }
    Ok(())
}

/// Nodes reachable from `start` following `adj`.
fn reach_count(adj: &[Vec<usize>], start: usize) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count
}

/// True iff every node reaches every other node.
pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    if g.n <= 1 {
        return true;
    }
    reach_count(&g.out, 0) == g.n && reach_count(&g.in_adjacency(), 0) == g.n
}

/// Retries `generate` with `seed, seed + 1, ...` until the draw is strongly
/// connected. Returns the graph and the seed that produced it.
pub fn generate_strongly_connected(spec: &GraphSpec, max_attempts: usize) -> Result<(DirectedGraph, u64)> {
    let first = spec
        .seed()
        .ok_or_else(|| GraphError::InvalidSpec("edge lists cannot be regenerated".into()))?;
    spec.validate()?;
    for attempt in 0..max_attempts as u64 {
        let seed = first.wrapping_add(attempt);
        let g = generate(&spec.with_seed(seed))?;
        if is_strongly_connected(&g) {
            return Ok((g, seed));
        }
    }
    Err(GraphError::ConnectivityFailure { attempts: max_attempts, seed: first })
}

/// Shortest hop count, or the unreachable marker.
///
/// Deliberately has no arithmetic impls: callers must unwrap a finite value
/// before adding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HopDistance {
    Finite(usize),
    Unreachable,
}

impl HopDistance {
    pub fn finite(self) -> Option<usize> {
        match self {
            HopDistance::Finite(d) => Some(d),
            HopDistance::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, HopDistance::Finite(_))
    }
}

impl fmt::Display for HopDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HopDistance::Finite(d) => write!(f, "{d}"),
            HopDistance::Unreachable => f.write_str("inf"),
        }
    }
}

/// BFS hop distances from `source` along out-edges.
pub fn hop_distances(g: &DirectedGraph, source: usize) -> Result<Vec<HopDistance>> {
    if source >= g.n {
        return Err(GraphError::NodeOutOfRange(source));
    }
    Ok(bfs_distances(&g.out, source)
        .into_iter()
        .map(|d| d.map_or(HopDistance::Unreachable, HopDistance::Finite))
        .collect())
}

pub(crate) fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have distances");
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
