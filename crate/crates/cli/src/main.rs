use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use maxspan_core::centrality::{compute, similarity_curve};
use maxspan_core::graph::{generate, generate_strongly_connected, load_edge_list, write_edge_list, Direction, DirectedGraph};
use maxspan_core::placement::{place, write_placement_row, PlacementStrategy, StrategyKind, PLACEMENT_CSV_HEADER};
use maxspan_core::CentralityMeasure;
use maxspan_sim::config::{parse_config, resolve_graph, RawGraph};
use maxspan_sim::experiment::{report, run_experiment, write_atomic};

#[derive(Parser)]
#[command(name = "maxspan-sim", version, about = "Adversary placement experiments on decentralized learning graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as an edge list.
    GenGraph {
        /// erdos_renyi, preferential_attachment, directed_geometric or k_out.
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p_edge: Option<f64>,
        #[arg(long)]
        m_attach: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Redraw with successive seeds until the graph is strongly connected.
        #[arg(long)]
        strongly_connected: bool,
        #[arg(long)]
        max_attempts: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every node of an edge-list graph (`node,score` CSV).
    Centrality {
        #[arg(long)]
        graph: PathBuf,
        /// in_degree, out_degree, betweenness, closeness or eigenvector.
        #[arg(long)]
        measure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise similarity of top-k sets across measures (`fraction,score` CSV).
    Similarity {
        #[arg(long)]
        graph: PathBuf,
        /// Comma-separated fractions; defaults to 0.05, 0.10, ..., 1.00.
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose adversary nodes with one strategy.
    Place {
        #[arg(long)]
        graph: PathBuf,
        /// random, maxspan or a centrality measure name.
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        n_advs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// out, in or undirected (MaxSpAN-FL only).
        #[arg(long, default_value = "out")]
        bfs_direction: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full multi-seed experiment from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `n_seeds`.
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker threads; all cores when unset.
        #[arg(long, env = "MAXSPAN_SIM_JOBS")]
        jobs: Option<usize>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute aggregates and the summary from an experiment directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        /// Destination; the experiment directory when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn load_graph(path: &Path) -> Result<DirectedGraph> {
    let (g, report) = load_edge_list(path).with_context(|| format!("loading {}", path.display()))?;
    if report.self_loops_dropped + report.duplicates_dropped > 0 {
        eprintln!(
            "note: dropped {} self-loop(s) and {} duplicate edge(s)",
            report.self_loops_dropped, report.duplicates_dropped
        );
    }
    Ok(g)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph { family, n, p_edge, m_attach, radius, k, seed, strongly_connected, max_attempts, out } => {
            if family == "edge_list" {
                anyhow::bail!("gen-graph cannot generate family `edge_list`");
            }
            let raw = RawGraph { family, n, p_edge, m_attach, radius, k, path: None, max_attempts };
            let cfg = resolve_graph(&raw, Path::new("."))?;
            let spec = cfg.spec.with_seed(seed);
            let g = if strongly_connected {
                let (g, used) = generate_strongly_connected(&spec, cfg.max_attempts)?;
                if used != seed {
                    eprintln!("note: strongly connected draw found at seed {used}");
                }
                g
            } else {
                generate(&spec)?
            };
            let mut buf = Vec::new();
            write_edge_list(&g, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Centrality { graph, measure, out } => {
            let g = load_graph(&graph)?;
            let m: CentralityMeasure = measure.parse()?;
            let mut buf = Vec::new();
            compute(&g, m)?.write_csv(&mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Similarity { graph, fractions, out } => {
            let g = load_graph(&graph)?;
            let fractions = fractions.unwrap_or_else(|| (1..=20).map(|i| i as f64 / 20.0).collect());
            let mut buf = Vec::new();
            writeln!(buf, "fraction,score")?;
            for (f, s) in similarity_curve(&g, &fractions)? {
                writeln!(buf, "{f},{s}")?;
            }
            emit(out.as_deref(), &buf)
        }
        Command::Place { graph, strategy, n_advs, seed, bfs_direction, out } => {
            let g = load_graph(&graph)?;
            let kind: StrategyKind = strategy.parse()?;
            let bfs_direction = match bfs_direction.as_str() {
                "out" => Direction::Out,
                "in" => Direction::In,
                "undirected" => Direction::Undirected,
                other => anyhow::bail!("unknown direction `{other}`; expected out, in or undirected"),
            };
            let advs = place(PlacementStrategy { kind, n_advs, bfs_direction }, &g, seed)?;
            let mut buf = Vec::new();
            writeln!(buf, "{PLACEMENT_CSV_HEADER}")?;
            write_placement_row(&mut buf, kind, seed, &advs)?;
            emit(out.as_deref(), &buf)
        }
        Command::Simulate { config, seeds, jobs, out } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seeds {
                anyhow::ensure!(s >= 1, "--seeds must be at least 1");
                cfg.n_seeds = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let result = run_experiment(&cfg, jobs)?;
            println!("{}", result.dir.display());
            Ok(())
        }
        Command::Report { dir, out } => report(&dir, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
