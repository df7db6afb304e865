//! Simulation library for adversarial node placement in decentralized
//! federated learning over directed graphs.
//!
//! - [`graph`]: topologies, generators, connectivity and hop distances.
//! - [`centrality`]: the five centrality measures and the similarity score.
//! - [`placement`]: random, centrality-based, and MaxSpAN-FL adversary placement.
//! - [`fedsim`]: S-AB gradient-tracking training with FGSM-poisoning adversaries.
//! - [`metrics`]: attack accuracy loss, attack advantage, aggregation.

pub mod centrality;
pub mod fedsim;
pub mod graph;
pub mod metrics;
pub mod placement;
pub mod rng;

pub use centrality::{CentralityMeasure, CentralityVector};
pub use graph::{DirectedGraph, GraphSpec, HopDistance};
pub use metrics::{PairedRun, RunRecord};
pub use placement::{PlacementStrategy, StrategyKind};
