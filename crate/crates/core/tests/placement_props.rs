mod oracles;

use std::collections::BTreeSet;

use maxspan_core::graph::{generate, generate_strongly_connected, Direction, DirectedGraph, GraphSpec};
use maxspan_core::placement::{
    avg_adversarial_distance, bfs_cluster, maxspan_from, maxspan_place, place, PlacementStrategy, StrategyKind,
};
use maxspan_core::CentralityMeasure;
use proptest::prelude::*;

fn strategies() -> Vec<StrategyKind> {
    let mut v = vec![StrategyKind::Random, StrategyKind::MaxSpan];
    v.extend(CentralityMeasure::ALL.map(StrategyKind::CentralityBased));
    v
}

#[test]
fn cycles_reach_brute_force_maximum_spread() {
    for n in [6usize, 8, 12] {
        let g = DirectedGraph::cycle(n);
        let a = oracles::adjacency(n, &g.edges().collect::<Vec<_>>());
        for n_advs in [2usize, 3] {
            for first in 0..n {
                let picked = maxspan_from(&g, n_advs, n, first, Direction::Out).unwrap();
                assert_eq!(picked[0], first);
                let best = oracles::subsets_with(n, n_advs, first)
                    .iter()
                    .map(|s| oracles::d_avg(&a, s))
                    .fold(f64::NEG_INFINITY, f64::max);
                let got = avg_adversarial_distance(&g, &picked).unwrap();
                assert_eq!(got, best, "n={n} n_advs={n_advs} first={first}");
            }
        }
    }
}

#[test]
fn six_cycle_second_pick_is_antipodal() {
    let seed = (0u64..).find(|&s| maxspan_place(&DirectedGraph::cycle(6), 2, 6, s).unwrap()[0] == 0).unwrap();
    assert_eq!(maxspan_place(&DirectedGraph::cycle(6), 2, 6, seed).unwrap(), vec![0, 3]);
}

#[test]
fn spread_beats_random_on_geometric_graphs() {
    let (mut maxspan, mut random) = (0.0, 0.0);
    let seeds = 50u64;
    for s in 0..seeds {
        let spec = GraphSpec::DirectedGeometric { n: 25, radius: 0.2, seed: s << 32 };
        let (g, _) = generate_strongly_connected(&spec, 200_000).unwrap();
        let m = place(PlacementStrategy::new(StrategyKind::MaxSpan, 5), &g, s).unwrap();
        let r = place(PlacementStrategy::new(StrategyKind::Random, 5), &g, s).unwrap();
        maxspan += avg_adversarial_distance(&g, &m).unwrap();
        random += avg_adversarial_distance(&g, &r).unwrap();
    }
    let (maxspan, random) = (maxspan / seeds as f64, random / seeds as f64);
    assert!(maxspan - random >= 0.2, "maxspan {maxspan} random {random}");
}

#[test]
fn single_adversary_maxspan_is_random_first_pick() {
    let g = DirectedGraph::complete(10);
    let picks: BTreeSet<usize> = (0..200).map(|s| maxspan_place(&g, 1, 10, s).unwrap()[0]).collect();
    assert_eq!(picks.len(), 10);
}

#[test]
fn overlap_is_monotone_across_iterations() {
    for seed in 0..20 {
        let (g, _) = generate_strongly_connected(&GraphSpec::ErdosRenyi { n: 20, p_edge: 0.15, seed }, 1000).unwrap();
        let n_advs = 5;
        let s_cluster = 20 / n_advs;
        let order = maxspan_place(&g, n_advs, 20, seed).unwrap();
        let regions: Vec<BTreeSet<usize>> =
            (0..20).map(|v| bfs_cluster(&g, v, s_cluster).members.into_iter().collect()).collect();
        let mut covered = BTreeSet::new();
        let mut prev = [0usize; 20];
        for &a in &order {
            covered.extend(regions[a].iter().copied());
            for v in 0..20 {
                let o = regions[v].intersection(&covered).count();
                assert!(o >= prev[v]);
                prev[v] = o;
            }
        }
    }
}

#[test]
fn greedy_pick_minimizes_overlap_with_lowest_id_ties() {
    for seed in 0..20 {
        let g = generate(&GraphSpec::KOut { n: 16, k: 2, seed }).unwrap();
        let Ok(order) = maxspan_place(&g, 4, 16, seed) else { continue };
        let regions: Vec<BTreeSet<usize>> = (0..16).map(|v| bfs_cluster(&g, v, 4).members.into_iter().collect()).collect();
        for step in 1..order.len() {
            let covered: BTreeSet<usize> = order[..step].iter().flat_map(|&a| regions[a].iter().copied()).collect();
            let chosen: BTreeSet<usize> = order[..step].iter().copied().collect();
            let expected = (0..16)
                .filter(|v| !chosen.contains(v))
                .min_by_key(|&v| (regions[v].intersection(&covered).count(), v))
                .unwrap();
            assert_eq!(order[step], expected);
        }
    }
}

proptest! {
    #[test]
    fn every_strategy_returns_distinct_valid_deterministic_sets(seed in any::<u64>(), n_advs in 1usize..8) {
        let (g, _) = generate_strongly_connected(&GraphSpec::ErdosRenyi { n: 12, p_edge: 0.3, seed }, 1000).unwrap();
        for kind in strategies() {
            let s = PlacementStrategy::new(kind, n_advs);
            let a = place(s, &g, seed).unwrap();
            prop_assert_eq!(a.len(), n_advs);
            prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(a.iter().all(|&v| v < 12));
            prop_assert_eq!(place(s, &g, seed).unwrap(), a);
        }
    }

    #[test]
    fn maxspan_never_repeats_a_node(seed in any::<u64>(), n_advs in 1usize..12, dir in 0usize..3) {
        let (g, _) = generate_strongly_connected(&GraphSpec::KOut { n: 12, k: 2, seed }, 1000).unwrap();
        let direction = [Direction::Out, Direction::In, Direction::Undirected][dir];
        let order = maxspan_from(&g, n_advs, 12, (seed % 12) as usize, direction).unwrap();
        let unique: BTreeSet<_> = order.iter().collect();
        prop_assert_eq!(unique.len(), n_advs);
    }
}
