//! Multi-seed experiment runner and report regeneration.
//!
//! Output layout under `<output_dir>/<config_hash>/`:
//!
//! ```text
//! manifest.json
//! placements.csv
//! summary.csv                      (n_seeds >= 2)
//! aggregate/<strategy>.csv         (n_seeds >= 2)
//! <seed>/clean.csv  <seed>/clean.json
//! <seed>/<strategy>.csv  <seed>/<strategy>.json
//! ```
//!
//! Every file except `manifest.json` is a pure function of the resolved
//! config and the tool version.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use maxspan_core::fedsim::{run_simulation, Attack, AttackConfig, QuadraticTask, SimConfig, SoftmaxTask, Task};
use maxspan_core::graph::{generate_strongly_connected, is_strongly_connected, load_edge_list, DirectedGraph, GraphSpec};
use maxspan_core::metrics::{aggregate, aggregate_aal, summarize, write_summary_csv, PairedRun, RunRecord};
use maxspan_core::placement::{
    avg_adversarial_distance, place, write_placement_row, PlacementStrategy, StrategyKind, PLACEMENT_CSV_HEADER,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TaskConfig};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub seed: u64,
    /// Seed of the accepted graph draw; `None` for edge-list graphs.
    pub graph_seed: Option<u64>,
    pub graph_attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedEntry>,
    pub created_unix_secs: u64,
    pub status: RunStatus,
    pub note: Option<String>,
}

/// Per-run sidecar stored next to each run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub graph_seed: Option<u64>,
    pub strategy: String,
    pub adversaries: Vec<usize>,
    pub d_avg: Option<f64>,
}

/// All runs for one seed: the clean baseline and one attacked run per strategy.
#[derive(Debug, Clone)]
pub struct SeedRuns {
    pub entry: SeedEntry,
    pub clean: RunRecord,
    pub attacked: Vec<(StrategyKind, RunRecord)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub runs: Vec<SeedRuns>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn csv_bytes(record: &RunRecord) -> Vec<u8> {
    let mut buf = Vec::new();
    record.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("serializable");
    buf.push(b'\n');
    buf
}

/// Graph seed for experiment seed `s`; keeps graph draws apart from the
/// task and placement streams, which use `s` directly.
pub fn graph_seed_for(seed: u64) -> u64 {
    seed << 32
}

/// Builds the graph for one seed, drawing until strongly connected.
pub fn build_graph(cfg: &ExperimentConfig, seed: u64) -> Result<(DirectedGraph, SeedEntry)> {
    if let GraphSpec::EdgeList { path } = &cfg.graph.spec {
        let (g, _) = load_edge_list(path).with_context(|| format!("loading {}", path.display()))?;
        if !is_strongly_connected(&g) {
            bail!("edge list {} is not strongly connected", path.display());
        }
        return Ok((g, SeedEntry { seed, graph_seed: None, graph_attempts: 1 }));
    }
    let start = graph_seed_for(seed);
    let (g, used) = generate_strongly_connected(&cfg.graph.spec.with_seed(start), cfg.graph.max_attempts)
        .with_context(|| format!("seed {seed}"))?;
    Ok((g, SeedEntry { seed, graph_seed: Some(used), graph_attempts: used - start + 1 }))
}

/// Generates and partitions the task data for one seed.
pub fn build_task(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Task> {
    let mut task = match &cfg.task {
        TaskConfig::Quadratic { dim } => Task::Quadratic(QuadraticTask::generate(n, *dim, seed)),
        TaskConfig::Softmax(p) => Task::Softmax(SoftmaxTask::generate(*p, seed)),
    };
    task.partition_data(n, cfg.sim.partition, cfg.sim.batch_size, seed)
        .with_context(|| format!("partitioning data for seed {seed}"))?;
    Ok(task)
}

pub fn sim_config(cfg: &ExperimentConfig, seed: u64) -> SimConfig {
    SimConfig {
        alpha: cfg.sim.alpha,
        batch_size: cfg.sim.batch_size,
        n_epochs: cfg.sim.n_epochs,
        partition: cfg.sim.partition,
        seed,
    }
}

/// Runs the clean baseline and every configured strategy for one seed.
pub fn run_seed(cfg: &ExperimentConfig, hash: &str, seed: u64) -> Result<SeedRuns> {
    let (g, entry) = build_graph(cfg, seed)?;
    let task = build_task(cfg, g.node_count(), seed)?;
    let sim = sim_config(cfg, seed);
    let mut clean = run_simulation(&g, &task, sim, None).with_context(|| format!("clean run, seed {seed}"))?;
    clean.fingerprint = hash.to_string();
    let mut attacked = Vec::with_capacity(cfg.attack.strategies.len());
    for &kind in &cfg.attack.strategies {
        let strategy = PlacementStrategy { kind, n_advs: cfg.attack.n_advs, bfs_direction: cfg.attack.bfs_direction };
        let adversaries = place(strategy, &g, seed).with_context(|| format!("placing {kind}, seed {seed}"))?;
        let d_avg = if adversaries.len() >= 2 { Some(avg_adversarial_distance(&g, &adversaries)?) } else { None };
        let attack = Attack {
            config: AttackConfig { epsilon: cfg.attack.epsilon, t_attack: cfg.attack.t_attack, tracker: cfg.attack.tracker },
            adversaries,
        };
        let mut record =
            run_simulation(&g, &task, sim, Some(&attack)).with_context(|| format!("{kind} run, seed {seed}"))?;
        record.fingerprint = hash.to_string();
        record.d_avg = d_avg;
        attacked.push((kind, record));
    }
    Ok(SeedRuns { entry, clean, attacked })
}

fn write_seed(dir: &Path, hash: &str, runs: &SeedRuns) -> Result<()> {
    let seed_dir = dir.join(runs.entry.seed.to_string());
    let meta = |strategy: String, r: &RunRecord| RunMeta {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: hash.to_string(),
        seed: runs.entry.seed,
        graph_seed: runs.entry.graph_seed,
        strategy,
        adversaries: r.adversaries.clone(),
        d_avg: r.d_avg,
    };
    write_atomic(&seed_dir.join("clean.csv"), &csv_bytes(&runs.clean))?;
    write_atomic(&seed_dir.join("clean.json"), &json_bytes(&meta("clean".into(), &runs.clean)))?;
    for (kind, r) in &runs.attacked {
        let label = kind.label();
        write_atomic(&seed_dir.join(format!("{label}.csv")), &csv_bytes(r))?;
        write_atomic(&seed_dir.join(format!("{label}.json")), &json_bytes(&meta(label, r)))?;
    }
    Ok(())
}

/// Writes `aggregate/<strategy>.csv` and `summary.csv` from per-seed records.
/// Needs at least two seeds; with fewer, nothing is written.
pub fn write_reports(out: &Path, cfg: &ExperimentConfig, runs: &[SeedRuns]) -> Result<()> {
    if runs.len() < 2 {
        return Ok(());
    }
    let mut entries = Vec::new();
    for (i, &kind) in cfg.attack.strategies.iter().enumerate() {
        let label = kind.label();
        let records: Vec<RunRecord> = runs.iter().map(|r| r.attacked[i].1.clone()).collect();
        let mut buf = Vec::new();
        aggregate(&records)?.write_csv(&mut buf)?;
        write_atomic(&out.join("aggregate").join(format!("{label}.csv")), &buf)?;
        let pairs: Vec<PairedRun> =
            runs.iter().map(|r| PairedRun { attacked: r.attacked[i].1.clone(), clean: r.clean.clone() }).collect();
        let (stats, _) = aggregate_aal(&pairs, cfg.attack.t_attack)?;
        entries.push((label, stats));
    }
    let mut buf = Vec::new();
    write_summary_csv(&summarize(&entries), &mut buf)?;
    write_atomic(&out.join("summary.csv"), &buf)
}

fn write_placements(dir: &Path, runs: &[SeedRuns]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{PLACEMENT_CSV_HEADER}")?;
    for r in runs {
        for (kind, rec) in &r.attacked {
            write_placement_row(&mut buf, *kind, r.entry.seed, &rec.adversaries)?;
        }
    }
    write_atomic(&dir.join("placements.csv"), &buf)
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs seeds `0..cfg.n_seeds` on `jobs` worker threads (all cores when
/// `None`) and writes every output file. On failure the manifest is still
/// written, marked failed, and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    let hash = cfg.config_hash();
    let dir = cfg.output_dir.join(&hash);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let results: Vec<Result<SeedRuns>> = pool.install(|| {
        (0..cfg.n_seeds as u64)
            .into_par_iter()
            .map(|seed| {
                let runs = run_seed(cfg, &hash, seed)?;
                write_seed(&dir, &hash, &runs)?;
                Ok(runs)
            })
            .collect()
    });
    let mut manifest = Manifest {
        tool: TOOL_NAME.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_hash: hash.clone(),
        config: cfg.clone(),
        seeds: Vec::new(),
        created_unix_secs: now_unix(),
        status: RunStatus::Complete,
        note: None,
    };
    let mut runs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => runs.push(s),
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    manifest.seeds = runs.iter().map(|r| r.entry.clone()).collect();
    let finished = (|| -> Result<()> {
        if !failures.is_empty() {
            bail!("{} of {} seeds failed: {}", failures.len(), cfg.n_seeds, failures.join("; "));
        }
        write_placements(&dir, &runs)?;
        write_reports(&dir, cfg, &runs)
    })();
    if let Err(e) = &finished {
        manifest.status = RunStatus::Failed;
        manifest.note = Some(format!("{e:#}"));
    }
    write_atomic(&dir.join("manifest.json"), &json_bytes(&manifest))?;
    finished?;
    Ok(ExperimentOutput { dir, manifest, runs })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_run(dir: &Path, hash: &str, seed: u64, label: &str) -> Result<RunRecord> {
    let base = dir.join(seed.to_string());
    let csv = base.join(format!("{label}.csv"));
    let file = std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
    let mut record = RunRecord::read_csv(std::io::BufReader::new(file), hash, seed)
        .with_context(|| format!("parsing {}", csv.display()))?;
    let meta_path = base.join(format!("{label}.json"));
    let meta: RunMeta = serde_json::from_str(
        &std::fs::read_to_string(&meta_path).with_context(|| format!("reading {}", meta_path.display()))?,
    )
    .with_context(|| format!("parsing {}", meta_path.display()))?;
    if meta.config_hash != hash {
        bail!("{} belongs to config {}, expected {hash}", meta_path.display(), meta.config_hash);
    }
    record.adversaries = meta.adversaries;
    record.d_avg = meta.d_avg;
    Ok(record)
}

/// Reloads every per-seed run under an experiment directory.
pub fn load_runs(dir: &Path) -> Result<(Manifest, Vec<SeedRuns>)> {
    let manifest = read_manifest(dir)?;
    let hash = &manifest.config_hash;
    let mut runs = Vec::with_capacity(manifest.seeds.len());
    for entry in &manifest.seeds {
        let clean = read_run(dir, hash, entry.seed, "clean")?;
        let attacked = manifest
            .config
            .attack
            .strategies
            .iter()
            .map(|&k| Ok((k, read_run(dir, hash, entry.seed, &k.label())?)))
            .collect::<Result<Vec<_>>>()?;
        runs.push(SeedRuns { entry: entry.clone(), clean, attacked });
    }
    Ok((manifest, runs))
}

/// Recomputes aggregates and the summary from the per-seed CSVs in `dir`,
/// writing them under `out` (defaults to `dir`).
pub fn report(dir: &Path, out: Option<&Path>) -> Result<()> {
    let (manifest, runs) = load_runs(dir)?;
    if runs.len() < 2 {
        bail!("{} has {} seed(s); aggregation needs at least 2", dir.display(), runs.len());
    }
    write_reports(out.unwrap_or(dir), &manifest.config, &runs)
}
