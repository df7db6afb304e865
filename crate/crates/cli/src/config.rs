//! Experiment configuration: strict TOML parsing, default expansion and
//! validation with key paths.
//!
//! Every table rejects unknown keys. Graph and task parameters that do not
//! belong to the selected `family` or `kind` are rejected as well.

use std::path::{Path, PathBuf};

use maxspan_core::fedsim::{Partition, SoftmaxParams, TrackerMode};
use maxspan_core::graph::{load_edge_list, Direction, GraphSpec};
use maxspan_core::placement::StrategyKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_N: usize = 25;
pub const DEFAULT_P_EDGE: f64 = 0.5;
pub const DEFAULT_M_ATTACH: usize = 2;
pub const DEFAULT_RADIUS: f64 = 0.2;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
pub const DEFAULT_QUADRATIC_DIM: usize = 4;
pub const DEFAULT_EPSILON: f64 = 1.3;
pub const DEFAULT_T_ATTACK: usize = 25;
pub const DEFAULT_ADVERSARY_FRACTION: f64 = 0.2;
pub const DEFAULT_STRATEGIES: [&str; 3] = ["random", "eigenvector", "maxspan"];
pub const DEFAULT_N_SEEDS: usize = 20;
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value at `{key}`: {msg}")]
    Validation { key: String, msg: String },
}

impl ConfigError {
    fn at(key: impl Into<String>, msg: impl Into<String>) -> Self {
        ConfigError::Validation { key: key.into(), msg: msg.into() }
    }

    /// Key path of a validation error.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } => Some(key),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub graph: RawGraph,
    pub task: RawTask,
    #[serde(default)]
    pub sim: RawSim,
    #[serde(default)]
    pub attack: RawAttack,
    pub n_seeds: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGraph {
    pub family: String,
    pub n: Option<usize>,
    pub p_edge: Option<f64>,
    pub m_attach: Option<usize>,
    pub radius: Option<f64>,
    pub k: Option<usize>,
    pub path: Option<PathBuf>,
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTask {
    pub kind: String,
    pub dim: Option<usize>,
    pub features: Option<usize>,
    pub classes: Option<usize>,
    pub train_samples: Option<usize>,
    pub test_samples: Option<usize>,
    pub class_sep: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    pub alpha: Option<f64>,
    pub batch_size: Option<usize>,
    pub n_epochs: Option<usize>,
    pub partition: Option<String>,
    pub classes_per_node: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAttack {
    pub epsilon: Option<f64>,
    pub t_attack: Option<usize>,
    pub adversary_fraction: Option<f64>,
    pub n_advs: Option<usize>,
    pub strategies: Option<Vec<String>>,
    pub tracker: Option<String>,
    pub bfs_direction: Option<String>,
}

/// Graph family and parameters; the spec's seed is replaced per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub spec: GraphSpec,
    pub n: usize,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    Quadratic { dim: usize },
    Softmax(SoftmaxParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub alpha: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSettings {
    pub epsilon: f64,
    pub t_attack: usize,
    /// Adversary count after resolving `adversary_fraction` against `n`.
    pub n_advs: usize,
    #[serde(with = "strategy_labels")]
    pub strategies: Vec<StrategyKind>,
    pub tracker: TrackerMode,
    pub bfs_direction: Direction,
}

mod strategy_labels {
    use maxspan_core::placement::StrategyKind;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(kinds: &[StrategyKind], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(kinds.iter().map(|k| k.label()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<StrategyKind>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|l| l.parse().map_err(D::Error::custom)).collect()
    }
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub task: TaskConfig,
    pub sim: SimSettings,
    pub attack: AttackSettings,
    pub n_seeds: usize,
    pub output_dir: PathBuf,
}

/// The part of a config that determines run contents.
#[derive(Serialize)]
struct Fingerprinted<'a> {
    graph: &'a GraphConfig,
    task: &'a TaskConfig,
    sim: &'a SimSettings,
    attack: &'a AttackSettings,
}

impl ExperimentConfig {
    /// Hex prefix of the SHA-256 of the canonical JSON of everything except
    /// `n_seeds` and `output_dir`, which do not change any single run.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(&Fingerprinted {
            graph: &self.graph,
            task: &self.task,
            sim: &self.sim,
            attack: &self.attack,
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(&canonical))[..16].to_string()
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text; relative edge-list paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw, base)
}

fn reject_extra(section: &str, owner: &str, fields: &[(&str, bool)]) -> Result<()> {
    match fields.iter().find(|(_, present)| *present) {
        Some((name, _)) => Err(ConfigError::at(format!("{section}.{name}"), format!("not used by {owner}"))),
        None => Ok(()),
    }
}

pub fn resolve_graph(raw: &RawGraph, base: &Path) -> Result<GraphConfig> {
    let family = raw.family.as_str();
    let owner = format!("family `{family}`");
    let max_attempts = raw.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS);
    if max_attempts == 0 {
        return Err(ConfigError::at("graph.max_attempts", "must be at least 1"));
    }
    let n = raw.n.unwrap_or(DEFAULT_N);
    if family != "edge_list" && n < 2 {
        return Err(ConfigError::at("graph.n", format!("{n} nodes; need at least 2")));
    }
    let extra = |names: &[&str]| {
        let all = [
            ("p_edge", raw.p_edge.is_some()),
            ("m_attach", raw.m_attach.is_some()),
            ("radius", raw.radius.is_some()),
            ("k", raw.k.is_some()),
            ("path", raw.path.is_some()),
        ];
        let others: Vec<(&str, bool)> = all.into_iter().filter(|(k, _)| !names.contains(k)).collect();
        reject_extra("graph", &owner, &others)
    };
    let spec = match family {
        "erdos_renyi" => {
            extra(&["p_edge"])?;
            let p_edge = raw.p_edge.unwrap_or(DEFAULT_P_EDGE);
            if !(0.0..=1.0).contains(&p_edge) {
                return Err(ConfigError::at("graph.p_edge", format!("{p_edge} outside [0, 1]")));
            }
            GraphSpec::ErdosRenyi { n, p_edge, seed: 0 }
        }
        "preferential_attachment" => {
            extra(&["m_attach"])?;
            let m_attach = raw.m_attach.unwrap_or(DEFAULT_M_ATTACH);
            if m_attach < 1 || m_attach >= n {
                return Err(ConfigError::at("graph.m_attach", format!("{m_attach} must satisfy 1 <= m_attach < n = {n}")));
            }
            GraphSpec::PreferentialAttachment { n, m_attach, seed: 0 }
        }
        "directed_geometric" => {
            extra(&["radius"])?;
            let radius = raw.radius.unwrap_or(DEFAULT_RADIUS);
            if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
                return Err(ConfigError::at("graph.radius", format!("{radius} outside (0, sqrt(2)]")));
            }
            GraphSpec::DirectedGeometric { n, radius, seed: 0 }
        }
        "k_out" => {
            extra(&["k"])?;
            let k = raw.k.unwrap_or(DEFAULT_K);
            if k < 1 || k >= n {
                return Err(ConfigError::at("graph.k", format!("{k} must satisfy 1 <= k < n = {n}")));
            }
            GraphSpec::KOut { n, k, seed: 0 }
        }
        "edge_list" => {
            extra(&["path"])?;
            if raw.n.is_some() {
                return Err(ConfigError::at("graph.n", "taken from the edge list file"));
            }
            let path = raw.path.clone().ok_or_else(|| ConfigError::at("graph.path", "required for family `edge_list`"))?;
            let path = if path.is_absolute() { path } else { base.join(path) };
            let (g, _) = load_edge_list(&path).map_err(|e| ConfigError::at("graph.path", e.to_string()))?;
            return Ok(GraphConfig { n: g.node_count(), spec: GraphSpec::EdgeList { path }, max_attempts });
        }
        other => {
            return Err(ConfigError::at(
                "graph.family",
                format!(
                    "unknown family `{other}`; expected erdos_renyi, preferential_attachment, directed_geometric, k_out or edge_list"
                ),
            ))
        }
    };
    Ok(GraphConfig { spec, n, max_attempts })
}

fn resolve_task(raw: &RawTask) -> Result<TaskConfig> {
    let owner = format!("task kind `{}`", raw.kind);
    match raw.kind.as_str() {
        "quadratic" => {
            reject_extra(
                "task",
                &owner,
                &[
                    ("features", raw.features.is_some()),
                    ("classes", raw.classes.is_some()),
                    ("train_samples", raw.train_samples.is_some()),
                    ("test_samples", raw.test_samples.is_some()),
                    ("class_sep", raw.class_sep.is_some()),
                ],
            )?;
            let dim = raw.dim.unwrap_or(DEFAULT_QUADRATIC_DIM);
            if dim == 0 {
                return Err(ConfigError::at("task.dim", "must be at least 1"));
            }
            Ok(TaskConfig::Quadratic { dim })
        }
        "softmax" => {
            reject_extra("task", &owner, &[("dim", raw.dim.is_some())])?;
            let d = SoftmaxParams::default();
            let p = SoftmaxParams {
                features: raw.features.unwrap_or(d.features),
                classes: raw.classes.unwrap_or(d.classes),
                train_samples: raw.train_samples.unwrap_or(d.train_samples),
                test_samples: raw.test_samples.unwrap_or(d.test_samples),
                class_sep: raw.class_sep.unwrap_or(d.class_sep),
            };
            if p.features == 0 {
                return Err(ConfigError::at("task.features", "must be at least 1"));
            }
            if p.classes < 2 {
                return Err(ConfigError::at("task.classes", "must be at least 2"));
            }
            if p.test_samples == 0 {
                return Err(ConfigError::at("task.test_samples", "must be at least 1"));
            }
            if !(p.class_sep >= 0.0 && p.class_sep.is_finite()) {
                return Err(ConfigError::at("task.class_sep", format!("{} must be finite and >= 0", p.class_sep)));
            }
            Ok(TaskConfig::Softmax(p))
        }
        other => Err(ConfigError::at("task.kind", format!("unknown kind `{other}`; expected quadratic or softmax"))),
    }
}

fn resolve_sim(raw: &RawSim, task: &TaskConfig, n: usize) -> Result<SimSettings> {
    let alpha = raw.alpha.unwrap_or(0.05);
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ConfigError::at("sim.alpha", format!("{alpha} must be positive")));
    }
    let batch_size = raw.batch_size.unwrap_or(32);
    if batch_size == 0 {
        return Err(ConfigError::at("sim.batch_size", "must be at least 1"));
    }
    let n_epochs = raw.n_epochs.unwrap_or(100);
    if n_epochs == 0 {
        return Err(ConfigError::at("sim.n_epochs", "must be at least 1"));
    }
    let partition = match raw.partition.as_deref().unwrap_or("iid") {
        "iid" => {
            if raw.classes_per_node.is_some() {
                return Err(ConfigError::at("sim.classes_per_node", "only used with partition = \"non_iid\""));
            }
            Partition::Iid
        }
        "non_iid" => {
            let classes_per_node = raw.classes_per_node.unwrap_or(3);
            let classes = match task {
                TaskConfig::Softmax(p) => p.classes,
                TaskConfig::Quadratic { .. } => {
                    return Err(ConfigError::at("sim.partition", "non_iid needs the softmax task"));
                }
            };
            if classes_per_node == 0 || classes_per_node > classes {
                return Err(ConfigError::at(
                    "sim.classes_per_node",
                    format!("{classes_per_node} must be in 1..={classes}"),
                ));
            }
            Partition::NonIid { classes_per_node }
        }
        other => return Err(ConfigError::at("sim.partition", format!("unknown partition `{other}`; expected iid or non_iid"))),
    };
    if let TaskConfig::Softmax(p) = task {
        // Shards must be able to hold one batch each; non-IID shards are
        // checked again when the data is actually split.
        if p.train_samples < n * batch_size {
            return Err(ConfigError::at(
                "task.train_samples",
                format!("{} samples cannot give {n} nodes a batch of {batch_size} each", p.train_samples),
            ));
        }
    }
    Ok(SimSettings { alpha, batch_size, n_epochs, partition })
}

fn resolve_attack(raw: &RawAttack, n: usize, n_epochs: usize) -> Result<AttackSettings> {
    let epsilon = raw.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(ConfigError::at("attack.epsilon", format!("{epsilon} must be finite and >= 0")));
    }
    let t_attack = raw.t_attack.unwrap_or(DEFAULT_T_ATTACK);
    if t_attack >= n_epochs {
        return Err(ConfigError::at("attack.t_attack", format!("{t_attack} must be below sim.n_epochs = {n_epochs}")));
    }
    let n_advs = match (raw.n_advs, raw.adversary_fraction) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::at("attack.n_advs", "give either n_advs or adversary_fraction, not both"));
        }
        (Some(k), None) => {
            if k == 0 || k >= n {
                return Err(ConfigError::at("attack.n_advs", format!("{k} must satisfy 1 <= n_advs < n = {n}")));
            }
            k
        }
        (None, f) => {
            let f = f.unwrap_or(DEFAULT_ADVERSARY_FRACTION);
            if !(f > 0.0 && f < 1.0) {
                return Err(ConfigError::at("attack.adversary_fraction", format!("{f} outside (0, 1)")));
            }
            let k = ((f * n as f64).round() as usize).max(1);
            if k >= n {
                return Err(ConfigError::at("attack.adversary_fraction", format!("{f} of {n} nodes leaves no honest node")));
            }
            k
        }
    };
    let names: Vec<String> = match &raw.strategies {
        Some(v) => v.clone(),
        None => DEFAULT_STRATEGIES.iter().map(|s| s.to_string()).collect(),
    };
    if names.is_empty() {
        return Err(ConfigError::at("attack.strategies", "must list at least one strategy"));
    }
    let mut strategies = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let kind: StrategyKind = name
            .parse()
            .map_err(|_| ConfigError::at(format!("attack.strategies[{i}]"), format!("unknown strategy `{name}`")))?;
        if strategies.contains(&kind) {
            return Err(ConfigError::at(format!("attack.strategies[{i}]"), format!("`{name}` listed twice")));
        }
        strategies.push(kind);
    }
    let tracker = match raw.tracker.as_deref().unwrap_or("poisoned_gradient") {
        "poisoned_gradient" => TrackerMode::PoisonedGradient,
        "recursion" => TrackerMode::Recursion,
        other => {
            return Err(ConfigError::at("attack.tracker", format!("unknown tracker `{other}`; expected poisoned_gradient or recursion")))
        }
    };
    let bfs_direction = match raw.bfs_direction.as_deref().unwrap_or("out") {
        "out" => Direction::Out,
        "in" => Direction::In,
        "undirected" => Direction::Undirected,
        other => {
            return Err(ConfigError::at("attack.bfs_direction", format!("unknown direction `{other}`; expected out, in or undirected")))
        }
    };
    Ok(AttackSettings { epsilon, t_attack, n_advs, strategies, tracker, bfs_direction })
}

pub fn resolve(raw: RawConfig, base: &Path) -> Result<ExperimentConfig> {
    let graph = resolve_graph(&raw.graph, base)?;
    let task = resolve_task(&raw.task)?;
    let sim = resolve_sim(&raw.sim, &task, graph.n)?;
    let attack = resolve_attack(&raw.attack, graph.n, sim.n_epochs)?;
    let n_seeds = raw.n_seeds.unwrap_or(DEFAULT_N_SEEDS);
    if n_seeds == 0 {
        return Err(ConfigError::at("n_seeds", "must be at least 1"));
    }
    let output_dir = raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    Ok(ExperimentConfig { graph, task, sim, attack, n_seeds, output_dir })
}
