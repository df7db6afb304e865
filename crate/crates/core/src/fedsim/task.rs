//! Local learning tasks: a quadratic consensus problem with a closed-form
//! optimum, and multinomial logistic regression on Gaussian class blobs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::rng::{substream, Stream};

/// Labeled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Shard {
    pub fn empty(dim: usize) -> Self {
        Self { dim, features: Vec::new(), labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn push(&mut self, row: &[f64], label: usize) {
        self.features.extend_from_slice(row);
        self.labels.push(label);
    }

    fn subset(&self, idx: &[usize]) -> Shard {
        let mut s = Shard::empty(self.dim);
        for &i in idx {
            s.push(self.row(i), self.labels[i]);
        }
        s
    }

    pub fn label_set(&self) -> std::collections::BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    pub features: usize,
    pub classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Standard deviation of the class means around the origin.
    pub class_sep: f64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        Self { features: 16, classes: 10, train_samples: 4000, test_samples: 2000, class_sep: 1.0 }
    }
}

/// Linear softmax classifier; the model is a `classes x (features + 1)`
/// row-major matrix whose last column is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxTask {
    pub params: SoftmaxParams,
    /// Full training pool before partitioning.
    pub train: Shard,
    pub test: Shard,
    /// One shard per node once partitioned.
    pub shards: Vec<Shard>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    /// Per-node targets `b_i`; `f_i(x) = 0.5 * |x - b_i|^2`.
    pub targets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Quadratic(QuadraticTask),
    Softmax(SoftmaxTask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Iid,
    NonIid { classes_per_node: usize },
}

/// Sample indices of a minibatch; empty for the quadratic task.
pub type Batch = Vec<usize>;

/// Data an adversary trains on after poisoning its own copy.
#[derive(Debug, Clone, PartialEq)]
pub enum PoisonedData {
    Target(Vec<f64>),
    Samples(Shard),
}

impl QuadraticTask {
    /// Targets drawn i.i.d. standard normal per coordinate.
    pub fn generate(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::TaskData, 0);
        let targets = (0..n)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Self { targets }
    }

    /// Mean of the targets of `nodes`: the minimizer of their summed losses.
    pub fn optimum(&self, nodes: &[usize]) -> Vec<f64> {
        let dim = self.targets[0].len();
        let mut m = vec![0.0; dim];
        for &i in nodes {
            for (a, b) in m.iter_mut().zip(&self.targets[i]) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= nodes.len() as f64);
        m
    }
}

impl SoftmaxTask {
    pub fn generate(params: SoftmaxParams, seed: u64) -> Self {
        let mut rng = substream(seed, Stream::TaskData, 0);
        let means: Vec<Vec<f64>> = (0..params.classes)
            .map(|_| {
                (0..params.features)
                    .map(|_| params.class_sep * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        let draw = |count: usize, stream: u64| {
            let mut rng = substream(seed, Stream::TaskData, stream);
            let mut s = Shard::empty(params.features);
            let mut row = vec![0.0; params.features];
            for i in 0..count {
                let y = i % params.classes;
                for (r, m) in row.iter_mut().zip(&means[y]) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *r = m + z;
                }
                s.push(&row, y);
            }
            s
        };
        let train = draw(params.train_samples, 1);
        let test = draw(params.test_samples, 2);
        Self { params, train, test, shards: Vec::new() }
    }

    pub fn model_dim(&self) -> usize {
        self.params.classes * (self.params.features + 1)
    }

    /// Splits the training pool into `n` shards.
    ///
    /// IID: shuffled equal shares, remainder to the lowest ids. Non-IID: each
    /// node takes `classes_per_node` classes round-robin over a shuffled class
    /// order, and each class's samples are split evenly among its holders.
    pub fn partition(&mut self, n: usize, partition: Partition, batch_size: usize, seed: u64) -> Result<()> {
        if n == 0 || self.train.len() < n * batch_size.max(1) {
            return Err(SimError::InsufficientData(format!(
                "{} training samples cannot fill {n} shards of at least {batch_size}",
                self.train.len()
            )));
        }
        let mut rng = substream(seed, Stream::Partition, 0);
        let classes = self.params.classes;
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n];
        match partition {
            Partition::Iid => {
                let mut idx: Vec<usize> = (0..self.train.len()).collect();
                idx.shuffle(&mut rng);
                split_evenly(&idx, &mut assigned, &(0..n).collect::<Vec<_>>());
            }
            Partition::NonIid { classes_per_node } => {
                if classes_per_node == 0 || classes_per_node > classes {
                    return Err(SimError::InvalidConfig(format!(
                        "classes_per_node = {classes_per_node} must be in 1..={classes}"
                    )));
                }
                let mut perm: Vec<usize> = (0..classes).collect();
                perm.shuffle(&mut rng);
                let mut holders: Vec<Vec<usize>> = vec![Vec::new(); classes];
                for node in 0..n {
                    for j in 0..classes_per_node {
                        holders[perm[(node * classes_per_node + j) % classes]].push(node);
                    }
                }
                for (c, owners) in holders.iter().enumerate() {
                    if owners.is_empty() {
                        continue;
                    }
                    let mut idx: Vec<usize> = (0..self.train.len()).filter(|&i| self.train.labels[i] == c).collect();
                    idx.shuffle(&mut rng);
                    split_evenly(&idx, &mut assigned, owners);
                }
            }
        }
        self.shards = assigned.iter().map(|idx| self.train.subset(idx)).collect();
        Ok(())
    }

    /// Mean cross-entropy gradient w.r.t. the model over `samples` rows of `data`.
    pub fn gradient(&self, data: &Shard, samples: &[usize], x: &[f64]) -> Vec<f64> {
        let d = self.params.features;
        let mut grad = vec![0.0; x.len()];
        let mut probs = vec![0.0; self.params.classes];
        for &s in samples {
            let z = data.row(s);
            self.probabilities(x, z, &mut probs);
            probs[data.labels[s]] -= 1.0;
            for (c, &r) in probs.iter().enumerate() {
                let row = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                for (g, zk) in row[..d].iter_mut().zip(z) {
                    *g += r * zk;
                }
                row[d] += r;
            }
        }
        let scale = 1.0 / samples.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        grad
    }

    /// Gradient of one sample's loss w.r.t. its feature vector.
    pub fn input_gradient(&self, x: &[f64], z: &[f64], label: usize) -> Vec<f64> {
        let d = self.params.features;
        let mut probs = vec![0.0; self.params.classes];
        self.probabilities(x, z, &mut probs);
        probs[label] -= 1.0;
        let mut g = vec![0.0; d];
        for (c, &r) in probs.iter().enumerate() {
            for (gk, w) in g.iter_mut().zip(&x[c * (d + 1)..c * (d + 1) + d]) {
                *gk += r * w;
            }
        }
        g
    }

    /// Mean cross-entropy of `x` over all rows of `data`.
    pub fn loss(&self, data: &Shard, x: &[f64]) -> f64 {
        let mut probs = vec![0.0; self.params.classes];
        let total: f64 = (0..data.len())
            .map(|i| {
                self.probabilities(x, data.row(i), &mut probs);
                -probs[data.labels[i]].max(f64::MIN_POSITIVE).ln()
            })
            .sum();
        total / data.len() as f64
    }

    /// `(accuracy, mean cross-entropy)` on the held-out test set.
    pub fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let mut probs = vec![0.0; self.params.classes];
        let mut correct = 0usize;
        let mut loss = 0.0;
        for i in 0..self.test.len() {
            self.probabilities(x, self.test.row(i), &mut probs);
            let y = self.test.labels[i];
            let argmax = probs
                .iter()
                .enumerate()
                .fold(0, |best, (c, &p)| if p > probs[best] { c } else { best });
            if argmax == y {
                correct += 1;
            }
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
        }
        let m = self.test.len() as f64;
        (correct as f64 / m, loss / m)
    }

    /// Copy of `shard` with every feature vector moved by
    /// `epsilon * sign(d loss / d z)` at model `x`. Labels are kept.
    pub fn fgsm_poison(&self, shard: &Shard, x: &[f64], epsilon: f64) -> Shard {
        let mut out = shard.clone();
        if epsilon == 0.0 {
            return out;
        }
        for i in 0..shard.len() {
            let g = self.input_gradient(x, shard.row(i), shard.labels[i]);
            let row = &mut out.features[i * shard.dim..(i + 1) * shard.dim];
            for (r, gk) in row.iter_mut().zip(g) {
                *r += epsilon * sign(gk);
            }
        }
        out
    }

    fn probabilities(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let d = self.params.features;
        for (c, o) in out.iter_mut().enumerate() {
            let w = &x[c * (d + 1)..(c + 1) * (d + 1)];
            *o = w[..d].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + w[d];
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Deals `idx` to `owners` in contiguous blocks, earlier owners taking the remainder.
fn split_evenly(idx: &[usize], assigned: &mut [Vec<usize>], owners: &[usize]) {
    let k = owners.len();
    let base = idx.len() / k;
    let extra = idx.len() % k;
    let mut start = 0;
    for (pos, &owner) in owners.iter().enumerate() {
        let take = base + usize::from(pos < extra);
        assigned[owner].extend_from_slice(&idx[start..start + take]);
        start += take;
    }
}

impl Task {
    pub fn model_dim(&self) -> usize {
        match self {
            Task::Quadratic(q) => q.targets.first().map_or(0, Vec::len),
            Task::Softmax(s) => s.model_dim(),
        }
    }

    /// Number of nodes the task has data for.
    pub fn node_count(&self) -> usize {
        match self {
            Task::Quadratic(q) => q.targets.len(),
            Task::Softmax(s) => s.shards.len(),
        }
    }

    pub fn shard_size(&self, node: usize) -> usize {
        match self {
            Task::Quadratic(_) => 1,
            Task::Softmax(s) => s.shards[node].len(),
        }
    }

    /// Assigns shards; a no-op for the quadratic task.
    pub fn partition_data(&mut self, n: usize, partition: Partition, batch_size: usize, seed: u64) -> Result<()> {
        match self {
            Task::Quadratic(q) if q.targets.len() == n => Ok(()),
            Task::Quadratic(q) => Err(SimError::InvalidConfig(format!(
                "quadratic task has {} targets for {n} nodes",
                q.targets.len()
            ))),
            Task::Softmax(s) => s.partition(n, partition, batch_size, seed),
        }
    }

    /// Random initial model.
    pub fn init_model<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let scale = match self {
            Task::Quadratic(_) => 1.0,
            Task::Softmax(_) => 0.01,
        };
        (0..self.model_dim())
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect()
    }

    /// Uniform minibatch without replacement; the whole shard, in order, when
    /// `batch_size` covers it.
    pub fn draw_batch<R: Rng>(&self, node: usize, batch_size: usize, rng: &mut R) -> Batch {
        match self {
            Task::Quadratic(_) => Vec::new(),
            Task::Softmax(s) => {
                let len = s.shards[node].len();
                if batch_size >= len {
                    (0..len).collect()
                } else {
                    rand::seq::index::sample(rng, len, batch_size).into_vec()
                }
            }
        }
    }

    /// Stochastic gradient of `f_node` at `x` on `batch`.
    pub fn gradient(&self, node: usize, x: &[f64], batch: &Batch) -> Vec<f64> {
        match self {
            Task::Quadratic(q) => x.iter().zip(&q.targets[node]).map(|(a, b)| a - b).collect(),
            Task::Softmax(s) => s.gradient(&s.shards[node], batch, x),
        }
    }

    /// `local_gradient` with the batch drawn from `batch_seed`.
    pub fn local_gradient(&self, node: usize, x: &[f64], batch_size: usize, batch_seed: u64) -> Vec<f64> {
        let mut rng = substream(batch_seed, Stream::Batch, node as u64);
        let batch = self.draw_batch(node, batch_size, &mut rng);
        self.gradient(node, x, &batch)
    }

    /// FGSM-poisoned copy of `node`'s data at model `x`. The task is untouched.
    pub fn fgsm_poison(&self, node: usize, x: &[f64], epsilon: f64) -> PoisonedData {
        match self {
            Task::Quadratic(q) => PoisonedData::Target(
                q.targets[node]
                    .iter()
                    .zip(x)
                    .map(|(b, xi)| b + epsilon * sign(b - xi))
                    .collect(),
            ),
            Task::Softmax(s) => PoisonedData::Samples(s.fgsm_poison(&s.shards[node], x, epsilon)),
        }
    }

    /// Gradient at `x` on `batch` after poisoning those samples at `x`.
    pub fn poisoned_gradient(&self, node: usize, x: &[f64], batch: &Batch, epsilon: f64) -> Vec<f64> {
        match self {
            Task::Quadratic(q) => x
                .iter()
                .zip(&q.targets[node])
                .map(|(xi, b)| xi - (b + epsilon * sign(b - xi)))
                .collect(),
            Task::Softmax(s) => {
                let view = s.shards[node].subset(batch);
                let poisoned = s.fgsm_poison(&view, x, epsilon);
                let all: Vec<usize> = (0..poisoned.len()).collect();
                s.gradient(&poisoned, &all, x)
            }
        }
    }
}
