//! Synchronous S-AB rounds.
//!
//! Honest node `i` mixes models with row-stochastic weights `1 / d_i^in` over
//! its in-neighbors plus itself, and mixes trackers with column-stochastic
//! weights `1 / d_j^out` chosen by each sender. Every update in epoch `t`
//! reads the epoch-`t` snapshot only.

use serde::{Deserialize, Serialize};

use super::task::{Batch, Partition, Task};
use super::{Result, SimError};
use crate::graph::{is_strongly_connected, DirectedGraph};
use crate::metrics::{RunRecord, SeriesKind};
use crate::rng::{node_epoch_index, substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Honest,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Gradient added to `y` at the previous step, subtracted at the next.
    pub last_grad: Vec<f64>,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub partition: Partition,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { alpha: 0.05, batch_size: 32, n_epochs: 100, partition: Partition::Iid, seed: 0 }
    }
}

/// What an attacking node broadcasts as its tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerMode {
    /// `y = g(x, poisoned batch)`.
    #[default]
    PoisonedGradient,
    /// The honest tracker recursion, fed poisoned gradients.
    Recursion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub t_attack: usize,
    #[serde(default)]
    pub tracker: TrackerMode,
}

/// An attack bound to concrete adversary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Attack {
    pub config: AttackConfig,
    pub adversaries: Vec<usize>,
}

pub struct Simulation<'a> {
    graph: &'a DirectedGraph,
    task: &'a Task,
    sim: SimConfig,
    attack: Option<&'a AttackConfig>,
    in_nbrs: Vec<Vec<usize>>,
    /// `|out-neighbors ∪ {j}|`
    d_out: Vec<usize>,
    states: Vec<NodeState>,
    epoch: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(graph: &'a DirectedGraph, task: &'a Task, sim: SimConfig, attack: Option<&'a Attack>) -> Result<Self> {
        let n = graph.node_count();
        if task.node_count() != n {
            return Err(SimError::NodeCountMismatch { task: task.node_count(), graph: n });
        }
        if !is_strongly_connected(graph) {
            return Err(SimError::NotStronglyConnected);
        }
        if sim.alpha <= 0.0 || !sim.alpha.is_finite() {
            return Err(SimError::InvalidConfig(format!("alpha = {} must be positive", sim.alpha)));
        }
        if sim.batch_size == 0 {
            return Err(SimError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if let Task::Softmax(_) = task {
            let smallest = (0..n).map(|i| task.shard_size(i)).min().unwrap_or(0);
            if sim.batch_size > smallest {
                return Err(SimError::InvalidConfig(format!(
                    "batch_size {} exceeds the smallest shard ({smallest})",
                    sim.batch_size
                )));
            }
        }
        let mut roles = vec![Role::Honest; n];
        if let Some(a) = attack {
            if a.config.epsilon < 0.0 || !a.config.epsilon.is_finite() {
                return Err(SimError::InvalidConfig(format!("epsilon = {} must be >= 0", a.config.epsilon)));
            }
            for &v in &a.adversaries {
                if v >= n {
                    return Err(SimError::InvalidConfig(format!("adversary {v} out of range")));
                }
                roles[v] = Role::Adversarial;
            }
        }
        let in_nbrs = graph.in_adjacency();
        let d_out = graph.out_degrees().into_iter().map(|d| d + 1).collect();
        let states = (0..n)
            .map(|i| {
                let mut rng = substream(sim.seed, Stream::Init, i as u64);
                let x = task.init_model(&mut rng);
                let g = task.gradient(i, &x, &batch_for(task, sim, i, 0));
                NodeState { x, y: g.clone(), last_grad: g, role: roles[i] }
            })
            .collect();
        Ok(Self {
            graph,
            task,
            sim,
            attack: attack.map(|a| &a.config),
            in_nbrs,
            d_out,
            states,
            epoch: 0,
        })
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn graph(&self) -> &DirectedGraph {
        self.graph
    }

    fn attacking(&self, i: usize) -> Option<&AttackConfig> {
        self.attack
            .filter(|a| self.states[i].role == Role::Adversarial && self.epoch >= a.t_attack)
    }

    /// S-AB update of node `i` from the current snapshot.
    pub fn honest_step(&self, i: usize) -> NodeState {
        let t = self.epoch;
        let p = self.task.model_dim();
        let nbrs = &self.in_nbrs[i];
        let d_in = (nbrs.len() + 1) as f64;
        let me = &self.states[i];

        let mut x = me.x.clone();
        for &j in nbrs {
            add_into(&mut x, &self.states[j].x);
        }
        for (xk, yk) in x.iter_mut().zip(&me.y) {
            *xk = *xk / d_in - self.sim.alpha * yk;
        }

        let grad = self.task.gradient(i, &x, &batch_for(self.task, self.sim, i, t + 1));
        let mut y = vec![0.0; p];
        self.mix_trackers(i, &mut y);
        for ((yk, gk), lk) in y.iter_mut().zip(&grad).zip(&me.last_grad) {
            *yk += gk - lk;
        }
        NodeState { x, y, last_grad: grad, role: me.role }
    }

    /// Adversary update: honest before the attack time, then local descent on
    /// poisoned data that ignores every in-neighbor model.
    pub fn adversary_step(&self, i: usize) -> NodeState {
        let Some(atk) = self.attacking(i) else {
            return self.honest_step(i);
        };
        let t = self.epoch;
        let me = &self.states[i];
        let eps = atk.epsilon;

        let g_now = self.task.poisoned_gradient(i, &me.x, &batch_for(self.task, self.sim, i, t), eps);
        let x: Vec<f64> = me.x.iter().zip(&g_now).map(|(a, g)| a - self.sim.alpha * g).collect();
        let g_next = self.task.poisoned_gradient(i, &x, &batch_for(self.task, self.sim, i, t + 1), eps);
        let y = match atk.tracker {
            TrackerMode::PoisonedGradient => g_next.clone(),
            TrackerMode::Recursion => {
                let mut y = vec![0.0; x.len()];
                self.mix_trackers(i, &mut y);
                for ((yk, gk), lk) in y.iter_mut().zip(&g_next).zip(&me.last_grad) {
                    *yk += gk - lk;
                }
                y
            }
        };
        NodeState { x, y, last_grad: g_next, role: me.role }
    }

    fn mix_trackers(&self, i: usize, y: &mut [f64]) {
        let mut add = |j: usize| {
            let w = 1.0 / self.d_out[j] as f64;
            for (a, b) in y.iter_mut().zip(&self.states[j].y) {
                *a += w * b;
            }
        };
        // sum in ascending sender id, self included
        let nbrs = &self.in_nbrs[i];
        let pos = nbrs.partition_point(|&j| j < i);
        nbrs[..pos].iter().for_each(|&j| add(j));
        add(i);
        nbrs[pos..].iter().for_each(|&j| add(j));
    }

    pub fn node_step(&self, i: usize) -> NodeState {
        match self.states[i].role {
            Role::Honest => self.honest_step(i),
            Role::Adversarial => self.adversary_step(i),
        }
    }

    /// One synchronous round.
    pub fn step(&mut self) {
        let order: Vec<usize> = (0..self.states.len()).collect();
        self.step_in_order(&order);
    }

    /// One synchronous round computing nodes in `order`; every node reads the
    /// same snapshot, so the order cannot affect the result.
    pub fn step_in_order(&mut self, order: &[usize]) {
        let mut next: Vec<Option<NodeState>> = vec![None; self.states.len()];
        for &i in order {
            next[i] = Some(self.node_step(i));
        }
        self.states = next.into_iter().map(|s| s.expect("order covers every node")).collect();
        self.epoch += 1;
    }

    /// Nodes whose models count toward the honest mean at `epoch`. Before the
    /// attack starts every node behaves honestly and all are counted.
    pub fn counted_nodes(&self, epoch: usize) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| {
                self.states[i].role == Role::Honest || self.attack.is_none_or(|a| epoch < a.t_attack)
            })
            .collect()
    }

    /// `(primary metric, loss)` averaged over `nodes` for the current models.
    pub fn evaluate(&self, nodes: &[usize]) -> (f64, f64) {
        let k = nodes.len() as f64;
        match self.task {
            Task::Softmax(s) => {
                let (acc, loss) = nodes
                    .iter()
                    .map(|&i| s.evaluate(&self.states[i].x))
                    .fold((0.0, 0.0), |(a, l), (a2, l2)| (a + a2, l + l2));
                (acc / k, loss / k)
            }
            Task::Quadratic(q) => {
                let opt = q.optimum(nodes);
                let mut dist = 0.0;
                let mut loss = 0.0;
                for &i in nodes {
                    let x = &self.states[i].x;
                    dist += x.iter().zip(&opt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    loss += nodes
                        .iter()
                        .map(|&j| 0.5 * x.iter().zip(&q.targets[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                        .sum::<f64>()
                        / k;
                }
                (dist / k, loss / k)
            }
        }
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// The batch node `i` uses at epoch `t`; a pure function of the seed.
fn batch_for(task: &Task, sim: SimConfig, i: usize, t: usize) -> Batch {
    let mut rng = substream(sim.seed, Stream::Batch, node_epoch_index(i, t));
    task.draw_batch(i, sim.batch_size, &mut rng)
}

/// Runs `sim.n_epochs` rounds and records the honest-mean metric after each.
pub fn run_simulation(
    graph: &DirectedGraph,
    task: &Task,
    sim: SimConfig,
    attack: Option<&Attack>,
) -> Result<RunRecord> {
    let mut s = Simulation::new(graph, task, sim, attack)?;
    let kind = match task {
        Task::Softmax(_) => SeriesKind::Accuracy,
        Task::Quadratic(_) => SeriesKind::DistToOpt,
    };
    let mut values = Vec::with_capacity(sim.n_epochs);
    let mut loss = Vec::with_capacity(sim.n_epochs);
    for t in 0..sim.n_epochs {
        s.step();
        let (v, l) = s.evaluate(&s.counted_nodes(t));
        values.push(v);
        loss.push(l);
    }
    let mut adversaries = attack.map(|a| a.adversaries.clone()).unwrap_or_default();
    adversaries.sort_unstable();
    Ok(RunRecord {
        fingerprint: String::new(),
        seed: sim.seed,
        kind,
        values,
        loss,
        adversaries,
        d_avg: None,
    })
}
