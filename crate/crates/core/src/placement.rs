//! Adversary placement: random, centrality top-k, and MaxSpAN-FL.
//!
//! MaxSpAN-FL grows a fixed-size BFS influence region around every node and
//! then greedily adds the honest node whose region overlaps least with the
//! union of the regions already claimed by adversaries. The first adversary
//! is uniformly random.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{self, CentralityError, CentralityMeasure};
use crate::graph::{hop_distances, is_strongly_connected, Direction, DirectedGraph};
use crate::rng::{substream, Stream};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("invalid adversary count {n_advs} for {n} nodes")]
    InvalidCount { n_advs: usize, n: usize },
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("average distance needs at least two adversaries")]
    TooFewAdversaries,
    #[error("unknown placement strategy `{0}`")]
    UnknownStrategy(String),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
}

pub type Result<T> = std::result::Result<T, PlacementError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    Random,
    CentralityBased(CentralityMeasure),
    MaxSpan,
}

impl StrategyKind {
    pub fn label(self) -> String {
        match self {
            StrategyKind::Random => "random".into(),
            StrategyKind::CentralityBased(m) => m.name().into(),
            StrategyKind::MaxSpan => "maxspan".into(),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = PlacementError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "maxspan" => Ok(StrategyKind::MaxSpan),
            other => other
                .parse::<CentralityMeasure>()
                .map(StrategyKind::CentralityBased)
                .map_err(|_| PlacementError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacementStrategy {
    pub kind: StrategyKind,
    pub n_advs: usize,
    /// Edge direction MaxSpAN-FL grows influence regions along.
    pub bfs_direction: Direction,
}

impl PlacementStrategy {
    pub fn new(kind: StrategyKind, n_advs: usize) -> Self {
        Self { kind, n_advs, bfs_direction: Direction::Out }
    }
}

/// BFS-grown neighborhood used by MaxSpAN-FL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceRegion {
    pub root: usize,
    /// Members in BFS visit order, root first.
    pub members: Vec<usize>,
}

/// Selects the adversary set. The result is sorted ascending.
pub fn place(strategy: PlacementStrategy, g: &DirectedGraph, seed: u64) -> Result<Vec<usize>> {
    let n = g.node_count();
    if strategy.n_advs == 0 || strategy.n_advs >= n {
        return Err(PlacementError::InvalidCount { n_advs: strategy.n_advs, n });
    }
    if !is_strongly_connected(g) {
        return Err(PlacementError::NotStronglyConnected);
    }
    let mut chosen = match strategy.kind {
        StrategyKind::Random => {
            let mut rng = substream(seed, Stream::Placement, 0);
            index::sample(&mut rng, n, strategy.n_advs).into_vec()
        }
        StrategyKind::CentralityBased(m) => {
            centrality::top_k_nodes(&centrality::compute(g, m)?, strategy.n_advs)?
        }
        StrategyKind::MaxSpan => maxspan_place_along(g, strategy.n_advs, n, seed, strategy.bfs_direction)?,
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// BFS from `root`, neighbors in ascending id order, cut at exactly
/// `s_cluster` members (or the whole reachable set if smaller).
pub fn bfs_cluster(g: &DirectedGraph, root: usize, s_cluster: usize) -> InfluenceRegion {
    bfs_cluster_in(&g.neighbor_lists(Direction::Out), root, s_cluster)
}

fn bfs_cluster_in(adj: &[Vec<usize>], root: usize, s_cluster: usize) -> InfluenceRegion {
    let limit = s_cluster.max(1);
    let mut seen = vec![false; adj.len()];
    let mut members = vec![root];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    'outer: while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if members.len() >= limit {
                break 'outer;
            }
            if !seen[v] {
                seen[v] = true;
                members.push(v);
                queue.push_back(v);
            }
        }
    }
    members.truncate(limit);
    InfluenceRegion { root, members }
}

/// MaxSpAN-FL with the default outward BFS. Returns adversaries in pick order.
pub fn maxspan_place(g: &DirectedGraph, n_advs: usize, n_clients: usize, seed: u64) -> Result<Vec<usize>> {
    maxspan_place_along(g, n_advs, n_clients, seed, Direction::Out)
}

/// MaxSpAN-FL with regions grown along `direction`.
pub fn maxspan_place_along(
    g: &DirectedGraph,
    n_advs: usize,
    n_clients: usize,
    seed: u64,
    direction: Direction,
) -> Result<Vec<usize>> {
    let n = g.node_count();
    if n_advs == 0 || n_advs > n {
        return Err(PlacementError::InvalidCount { n_advs, n });
    }
    let mut rng = substream(seed, Stream::Placement, 1);
    let first = rng.random_range(0..n);
    maxspan_from(g, n_advs, n_clients, first, direction)
}

/// MaxSpAN-FL greedy phase with a fixed first adversary.
pub fn maxspan_from(
    g: &DirectedGraph,
    n_advs: usize,
    n_clients: usize,
    first: usize,
    direction: Direction,
) -> Result<Vec<usize>> {
    let n = g.node_count();
    if n_advs == 0 || n_advs > n || n_clients == 0 {
        return Err(PlacementError::InvalidCount { n_advs, n });
    }
    if first >= n {
        return Err(PlacementError::NodeOutOfRange(first));
    }
    let s_cluster = n_clients / n_advs;
    let adj = g.neighbor_lists(direction);
    let regions: Vec<Vec<usize>> = (0..n).map(|v| bfs_cluster_in(&adj, v, s_cluster).members).collect();

    let mut is_adv = vec![false; n];
    let mut covered = vec![false; n];
    let mut chosen = Vec::with_capacity(n_advs);
    let claim = |a: usize, is_adv: &mut [bool], covered: &mut [bool], chosen: &mut Vec<usize>| {
        is_adv[a] = true;
        chosen.push(a);
        for &m in &regions[a] {
            covered[m] = true;
        }
    };
    claim(first, &mut is_adv, &mut covered, &mut chosen);

    while chosen.len() < n_advs {
        let mut best: Option<(usize, usize)> = None;
        for g_node in (0..n).filter(|&v| !is_adv[v]) {
            let o = regions[g_node].iter().filter(|&&m| covered[m]).count();
            if best.is_none_or(|(o_min, _)| o < o_min) {
                best = Some((o, g_node));
            }
        }
        let (_, a_best) = best.expect("n_advs <= n leaves a candidate");
        claim(a_best, &mut is_adv, &mut covered, &mut chosen);
    }
    Ok(chosen)
}

/// Mean over unordered adversary pairs of the symmetrized hop distance
/// `(hop(i -> j) + hop(j -> i)) / 2`.
pub fn avg_adversarial_distance(g: &DirectedGraph, adversaries: &[usize]) -> Result<f64> {
    if adversaries.len() < 2 {
        return Err(PlacementError::TooFewAdversaries);
    }
    if !is_strongly_connected(g) {
        return Err(PlacementError::NotStronglyConnected);
    }
    let dists = adversaries
        .iter()
        .map(|&a| hop_distances(g, a).map_err(|_| PlacementError::NodeOutOfRange(a)))
        .collect::<Result<Vec<_>>>()?;
    let hop = |i: usize, j: usize| dists[i][adversaries[j]].finite().expect("strongly connected") as f64;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..adversaries.len() {
        for j in i + 1..adversaries.len() {
            total += (hop(i, j) + hop(j, i)) / 2.0;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Header for placement CSV exports.
pub const PLACEMENT_CSV_HEADER: &str = "strategy,seed,adversaries";

/// One `strategy,seed,adversaries` row; ids ascending, `;`-joined.
pub fn write_placement_row<W: Write>(mut w: W, kind: StrategyKind, seed: u64, adversaries: &[usize]) -> std::io::Result<()> {
    let ids: BTreeSet<usize> = adversaries.iter().copied().collect();
    let joined = ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
    writeln!(w, "{},{seed},{joined}", kind.label())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reciprocal_star() -> DirectedGraph {
        DirectedGraph::from_edges(4, [(1, 0), (2, 0), (3, 0), (0, 1), (0, 2), (0, 3)]).unwrap()
    }

    #[test]
    fn centrality_placement_examples() {
        let s = PlacementStrategy::new(StrategyKind::CentralityBased(CentralityMeasure::InDegree), 1);
        assert_eq!(place(s, &reciprocal_star(), 0).unwrap(), vec![0]);
        let s = PlacementStrategy::new(StrategyKind::CentralityBased(CentralityMeasure::Eigenvector), 2);
        assert_eq!(place(s, &DirectedGraph::complete(5), 0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn random_placement_is_deterministic() {
        let g = DirectedGraph::complete(20);
        let s = PlacementStrategy::new(StrategyKind::Random, 4);
        let a = place(s, &g, 17).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, place(s, &g, 17).unwrap());
        let distinct: BTreeSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn placement_rejects_bad_counts() {
        let g = DirectedGraph::complete(4);
        for n_advs in [0, 4] {
            let s = PlacementStrategy::new(StrategyKind::Random, n_advs);
            assert!(matches!(place(s, &g, 0), Err(PlacementError::InvalidCount { .. })));
        }
        assert!(maxspan_place(&g, 0, 4, 0).is_err());
        assert!(maxspan_place(&g, 5, 4, 0).is_err());
    }

    #[test]
    fn bfs_cluster_examples() {
        assert_eq!(bfs_cluster(&DirectedGraph::cycle(3), 0, 2).members, vec![0, 1]);
        assert_eq!(bfs_cluster(&DirectedGraph::complete(5), 2, 3).members, vec![2, 0, 1]);
        let path = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(bfs_cluster(&path, 1, 5).members, vec![1, 2]);
    }

    #[test]
    fn maxspan_on_six_cycle_picks_antipode() {
        let g = DirectedGraph::cycle(6);
        assert_eq!(maxspan_from(&g, 2, 6, 0, Direction::Out).unwrap(), vec![0, 3]);
    }

    #[test]
    fn maxspan_on_complete_graph() {
        // regions: {0,1}, {1,0}, {2,0}, {3,0}; candidates 2 and 3 tie at overlap 1
        let g = DirectedGraph::complete(4);
        assert_eq!(maxspan_from(&g, 2, 4, 0, Direction::Out).unwrap(), vec![0, 2]);
    }

    #[test]
    fn maxspan_single_adversary_is_the_random_first_pick() {
        let g = DirectedGraph::cycle(7);
        let mut rng = substream(5, Stream::Placement, 1);
        let expected = rng.random_range(0..7);
        assert_eq!(maxspan_place(&g, 1, 7, 5).unwrap(), vec![expected]);
    }

    #[test]
    fn cluster_direction_switch() {
        let g = DirectedGraph::cycle(6);
        assert_eq!(maxspan_from(&g, 2, 6, 0, Direction::In).unwrap(), vec![0, 3]);
        let undirected = bfs_cluster_in(&g.neighbor_lists(Direction::Undirected), 0, 3).members;
        assert_eq!(undirected, vec![0, 1, 5]);
    }

    #[test]
    fn avg_distance_examples() {
        assert_eq!(avg_adversarial_distance(&DirectedGraph::complete(5), &[0, 2, 4]).unwrap(), 1.0);
        assert_eq!(avg_adversarial_distance(&DirectedGraph::cycle(6), &[0, 3]).unwrap(), 3.0);
        assert_eq!(avg_adversarial_distance(&DirectedGraph::cycle(6), &[0, 2]).unwrap(), 3.0);
        assert!(matches!(
            avg_adversarial_distance(&DirectedGraph::cycle(6), &[0]),
            Err(PlacementError::TooFewAdversaries)
        ));
    }

    #[test]
    fn placement_csv_row() {
        let mut buf = Vec::new();
        write_placement_row(&mut buf, StrategyKind::MaxSpan, 3, &[3, 0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "maxspan,3,0;3\n");
    }

    #[test]
    fn strategy_labels_round_trip() {
        for k in [
            StrategyKind::Random,
            StrategyKind::MaxSpan,
            StrategyKind::CentralityBased(CentralityMeasure::Eigenvector),
            StrategyKind::CentralityBased(CentralityMeasure::Closeness),
        ] {
            assert_eq!(k.label().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("nope".parse::<StrategyKind>().is_err());
    }
}
