//! Command-line front end.
//!
//! Scenario files are TOML with the fields of `Scenario`:
//!
//! ```toml
//! num_nodes = 3
//! library_size = 8
//! cache_size = 2
//! file_size = 2e9
//! positions = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]
//! rates = [100.0, 80.0, 120.0]
//! gamma_d = 20.0
//! gamma_l = 0.0          # optional
//! zipf_z = 0.6
//! seed = 7
//! cluster_size_cap = 5   # optional
//! locality = 0.3         # optional
//! ```
//!
//! `generate` takes a template with the `ScenarioTemplate` fields (all
//! optional) and draws positions and rates from `--seed`. `sweep` takes the
//! experiment config documented in `coopcache::experiment`.
//!
//! Output goes to stdout unless `--output DIR` is given, in which case each
//! subcommand writes fixed file names into that directory. Exit codes: 0 on
//! success, 1 for invalid input, 2 for runtime failures.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use coopcache::clustering::{solve_clustering_on, ClusterSelector};
use coopcache::error::{Error, Result};
use coopcache::eval::{exact_placement_oracle, offloaded_traffic, DEFAULT_ORACLE_BUDGET};
use coopcache::experiment::{run_scheme, run_sweep, ExperimentSpec, Scheme};
use coopcache::graph::DEFAULT_ORACLE_LIMIT;
use coopcache::model::{build_node_graph, NodeGraph, Scenario, ScenarioTemplate};
use coopcache::placement::{Placement, PlacementOptions};
use coopcache::workload::{scenario_popularity, PopularityModel};

#[derive(Parser)]
#[command(
    name = "coopcache",
    version,
    about = "Graph-based cooperative edge caching"
)]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for output files instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a seeded scenario from a template.
    Generate {
        /// Template TOML; defaults are used when omitted.
        template: Option<PathBuf>,
    },
    /// Select clusters and print the clustering as JSON.
    Cluster {
        #[command(flatten)]
        input: Input,
        /// Also write the node graph as adjacency-list text.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
    /// Compute a placement (sparse node_id,file_id CSV).
    Place {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        /// Take the most popular candidates instead of seeded random picks.
        #[arg(long)]
        ordered: bool,
    },
    /// Report offloaded traffic as JSON.
    Evaluate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        /// Evaluate this placement CSV instead of running the scheme.
        #[arg(long)]
        placement: Option<PathBuf>,
        /// With --placement: serve requests from own storage only.
        #[arg(long)]
        no_cooperation: bool,
        #[arg(long)]
        ordered: bool,
    },
    /// Run a parameter sweep from an experiment config.
    Sweep { config: PathBuf },
    /// Compare heuristics with exhaustive oracles on a small scenario.
    Oracle {
        #[command(flatten)]
        input: Input,
        /// Maximum number of placements the placement oracle may visit.
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: u128,
        /// Maximum candidate count for the exact cluster selection.
        #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
        limit: usize,
    },
}

#[derive(Args)]
struct Input {
    /// Scenario TOML.
    scenario: PathBuf,
    /// Local popularity CSV (one row per node) instead of the synthetic model.
    #[arg(long)]
    popularity: Option<PathBuf>,
}

struct Loaded {
    scenario: Scenario,
    pop: PopularityModel,
    graph: NodeGraph,
}

impl Input {
    fn load(&self, seed: Option<u64>) -> Result<Loaded> {
        let text = fs::read_to_string(&self.scenario)?;
        let mut scenario: Scenario =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(seed) = seed {
            scenario.seed = seed;
        }
        let scenario = scenario.validate()?;
        let pop = match &self.popularity {
            Some(path) => {
                let pop = PopularityModel::read_csv_path(path, &scenario.rates)?;
                pop.check_shape(&scenario)?;
                pop
            }
            None => scenario_popularity(&scenario)?,
        };
        let graph = build_node_graph(&scenario);
        Ok(Loaded {
            scenario,
            pop,
            graph,
        })
    }
}

/// Where results go: stdout, or named files under `--output`.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    /// Writes `bytes` to `name` under the output directory, or to stdout.
    fn emit(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(d) => fs::write(d.join(name), bytes)?,
            None => io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }

    /// Secondary artifacts are only written when an output directory exists.
    fn emit_file_only(&self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(d) = &self.dir {
            fs::write(d.join(name), bytes)?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn options(ordered: bool) -> PlacementOptions {
    PlacementOptions {
        random_selection: !ordered,
    }
}

#[derive(Serialize)]
struct PlacementSummary {
    scheme: Scheme,
    num_nodes: usize,
    library_size: usize,
    cache_size: usize,
    cooperation: bool,
    cached_files: usize,
    num_clusters: usize,
    total: f64,
}

#[derive(Serialize)]
struct SchemeGap {
    scheme: Scheme,
    total: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct OracleReport {
    optimum: Option<f64>,
    placement_oracle_error: Option<String>,
    schemes: Vec<SchemeGap>,
    greedy_objective: f64,
    exact_objective: Option<f64>,
    cluster_oracle_error: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    let sink = Sink::new(cli.output.clone())?;
    match cli.command {
        Command::Generate { template } => {
            let template: ScenarioTemplate = match template {
                Some(path) => toml::from_str(&fs::read_to_string(path)?)
                    .map_err(|e| Error::Config(e.to_string()))?,
                None => ScenarioTemplate::default(),
            };
            let scenario = template.instantiate(cli.seed.unwrap_or(0))?;
            let text = toml::to_string(&scenario).map_err(|e| Error::Config(e.to_string()))?;
            sink.emit("scenario.toml", text.as_bytes())
        }
        Command::Cluster { input, dump_graph } => {
            let l = input.load(cli.seed)?;
            let r =
                solve_clustering_on(&l.scenario, &l.pop, &l.graph, ClusterSelector::MultiStart)?;
            if let Some(path) = dump_graph {
                fs::write(path, l.graph.to_adjacency_text())?;
            }
            sink.emit("clustering.json", &to_json(&r)?)
        }
        Command::Place {
            input,
            scheme,
            ordered,
        } => {
            let l = input.load(cli.seed)?;
            let run = run_scheme(scheme, &l.scenario, &l.pop, &l.graph, options(ordered))?;
            let mut csv = Vec::new();
            run.placement.write_csv(&mut csv)?;
            sink.emit("placement.csv", &csv)?;
            let summary = PlacementSummary {
                scheme,
                num_nodes: l.scenario.num_nodes,
                library_size: l.scenario.library_size,
                cache_size: l.scenario.cache_size,
                cooperation: run.placement.cooperation,
                cached_files: (0..l.scenario.num_nodes)
                    .map(|m| run.placement.count(m))
                    .sum(),
                num_clusters: run.num_clusters(),
                total: run.report.total,
            };
            sink.emit_file_only("placement.json", &to_json(&summary)?)
        }
        Command::Evaluate {
            input,
            scheme,
            placement,
            no_cooperation,
            ordered,
        } => {
            let l = input.load(cli.seed)?;
            let report = match placement {
                Some(path) => {
                    let p = Placement::read_csv(
                        fs::File::open(path)?,
                        l.scenario.num_nodes,
                        l.scenario.library_size,
                        !no_cooperation,
                    )?;
                    offloaded_traffic(&p, &l.scenario, &l.pop, &l.graph, None, "custom")?
                }
                None => run_scheme(scheme, &l.scenario, &l.pop, &l.graph, options(ordered))?.report,
            };
            sink.emit("report.json", &to_json(&report)?)
        }
        Command::Sweep { config } => {
            let spec = ExperimentSpec::from_toml(&fs::read_to_string(config)?)?;
            let table = run_sweep(&spec, cli.threads)?;
            let dir = cli
                .output
                .or(spec.output.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            write_sweep(&dir, &table)
        }
        Command::Oracle {
            input,
            budget,
            limit,
        } => {
            let l = input.load(cli.seed)?;
            let (s, pop, g) = (&l.scenario, &l.pop, &l.graph);
            let (optimum, placement_oracle_error) = match exact_placement_oracle(s, pop, g, budget)
            {
                Ok((_, t)) => (Some(t), None),
                Err(e @ Error::OracleLimit { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let schemes = Scheme::ALL
                .iter()
                .map(|&scheme| {
                    let total = run_scheme(scheme, s, pop, g, PlacementOptions::default())?
                        .report
                        .total;
                    let ratio = optimum.map_or(f64::NAN, |t| total / t);
                    Ok(SchemeGap {
                        scheme,
                        total,
                        ratio,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let greedy = solve_clustering_on(s, pop, g, ClusterSelector::MultiStart)?;
            let (exact_objective, cluster_oracle_error) =
                match solve_clustering_on(s, pop, g, ClusterSelector::Exact(limit)) {
                    Ok(r) => (Some(r.objective), None),
                    Err(e @ Error::OracleLimit { .. }) => (None, Some(e.to_string())),
                    Err(e) => return Err(e),
                };
            let report = OracleReport {
                optimum,
                placement_oracle_error,
                schemes,
                greedy_objective: greedy.objective,
                exact_objective,
                cluster_oracle_error,
            };
            sink.emit("oracle.json", &to_json(&report)?)
        }
    }
}

fn write_sweep(dir: &Path, table: &coopcache::experiment::SweepTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    table.write_rows(fs::File::create(dir.join("rows.csv"))?, true)?;
    table.write_summary(fs::File::create(dir.join("summary.csv"))?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
