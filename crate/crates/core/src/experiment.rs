//! Scheme pipelines and parameter sweeps.
//!
//! A sweep runs every (value, seed) grid point on its own scenario, evaluates
//! each requested scheme, and emits one row per (value, seed, scheme) plus a
//! mean-over-seeds summary. Rows come out in grid order regardless of how many
//! worker threads ran them.
//!
//! Experiment config (TOML):
//!
//! ```toml
//! seeds = [0, 1, 2]
//! schemes = ["proposed", "lpc", "gpc"]   # optional, default all three
//! output = "results"                     # optional
//!
//! [sweep]
//! param = "K"                            # one of K, z, F, gamma_d
//! values = [10, 25, 50, 100]
//!
//! [base]                                 # optional; every field defaults
//! num_nodes = 10
//! library_size = 500
//! cache_size = 25
//! file_size = 2e9
//! gamma_d = 20.0
//! gamma_l = 0.0
//! zipf_z = 0.6
//! cluster_size_cap = 5
//! locality = 0.3
//! area_side = 50.0
//! rate_min = 50.0
//! rate_max = 150.0
//!
//! [placement]                            # optional
//! random_selection = true
//! ```

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{solve_clustering_on, ClusterSelector, ClusteringResult};
use crate::error::{Error, Result};
use crate::eval::{offloaded_traffic, TrafficReport};
use crate::model::{build_node_graph, NodeGraph, Scenario, ScenarioTemplate};
use crate::placement::{
    baseline_gpc, baseline_lpc, proposed_placement, Placement, PlacementOptions,
};
use crate::workload::{scenario_popularity, PopularityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Lpc,
    Gpc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Lpc, Scheme::Gpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Lpc => "lpc",
            Scheme::Gpc => "gpc",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "lpc" => Ok(Scheme::Lpc),
            "gpc" => Ok(Scheme::Gpc),
            other => Err(Error::Experiment(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Placement, clustering and report of one scheme on one scenario.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub placement: Placement,
    pub clustering: Option<ClusteringResult>,
    pub report: TrafficReport,
}

impl SchemeRun {
    pub fn num_clusters(&self) -> usize {
        self.clustering.as_ref().map_or(0, |r| r.clusters.len())
    }
}

/// Runs one scheme end to end.
pub fn run_scheme(
    scheme: Scheme,
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    options: PlacementOptions,
) -> Result<SchemeRun> {
    let (placement, clustering) = match scheme {
        Scheme::Proposed => {
            let r = solve_clustering_on(s, pop, g, ClusterSelector::MultiStart)?;
            let out = proposed_placement(s, pop, g, &r, options);
            (out.enhancement.placement, Some(r))
        }
        Scheme::Lpc => (baseline_lpc(s, pop, g), None),
        Scheme::Gpc => (baseline_gpc(s, pop), None),
    };
    let report = offloaded_traffic(&placement, s, pop, g, clustering.as_ref(), scheme.as_str())?;
    Ok(SchemeRun {
        scheme,
        placement,
        clustering,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    K,
    #[serde(rename = "z")]
    Z,
    F,
    #[serde(rename = "gamma_d")]
    GammaD,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::K => "K",
            SweepParam::Z => "z",
            SweepParam::F => "F",
            SweepParam::GammaD => "gamma_d",
        }
    }

    /// The template with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioTemplate, value: f64) -> Result<ScenarioTemplate> {
        let mut t = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Experiment(format!(
                    "{} must be a positive integer, got {value}",
                    self.as_str()
                )))
            }
        };
        match self {
            SweepParam::K => t.cache_size = count()?,
            SweepParam::F => t.library_size = count()?,
            SweepParam::Z => {
                if value.is_nan() || value < 0.0 {
                    return Err(Error::Experiment(format!("z must be >= 0, got {value}")));
                }
                t.zipf_z = value
            }
            SweepParam::GammaD => {
                if value.is_nan() || value < 0.0 {
                    return Err(Error::Experiment(format!(
                        "gamma_d must be >= 0, got {value}"
                    )));
                }
                t.gamma_d = value
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: ScenarioTemplate,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub placement: PlacementOptions,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

impl ExperimentSpec {
    pub fn new(
        base: ScenarioTemplate,
        param: SweepParam,
        values: Vec<f64>,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            base,
            sweep: Sweep { param, values },
            seeds,
            schemes: all_schemes(),
            output: None,
            placement: PlacementOptions::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Experiment("seeds must be nonempty".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Experiment("sweep values must be nonempty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Experiment("schemes must be nonempty".into()));
        }
        for &v in &self.sweep.values {
            // validating one instance per value catches K > F and friends
            self.sweep
                .param
                .apply(&self.base, v)?
                .instantiate(self.seeds[0])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_param: &'static str,
    pub value: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub total: f64,
    pub cluster_term: f64,
    pub cooperator_term: f64,
    pub duplicate_term: f64,
    pub n_clusters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_param: &'static str,
    pub value: f64,
    pub scheme: Scheme,
    pub seeds: usize,
    pub mean_total: f64,
    pub mean_cluster_term: f64,
    pub mean_cooperator_term: f64,
    pub mean_duplicate_term: f64,
    pub mean_clusters: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

pub const ROW_HEADER: [&str; 10] = [
    "sweep_param",
    "value",
    "seed",
    "scheme",
    "T",
    "T_c",
    "T_n",
    "T_d",
    "n_clusters",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "sweep_param",
    "value",
    "scheme",
    "seeds",
    "mean_T",
    "mean_T_c",
    "mean_T_n",
    "mean_T_d",
    "mean_clusters",
];

impl SweepTable {
    /// Per-run rows. `wall_ms` is the only nondeterministic column; leave it
    /// out to get reproducible bytes.
    pub fn write_rows<W: Write>(&self, writer: W, with_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let width = if with_timing { 10 } else { 9 };
        w.write_record(&ROW_HEADER[..width])?;
        for r in &self.rows {
            let mut rec = vec![
                r.sweep_param.to_string(),
                r.value.to_string(),
                r.seed.to_string(),
                r.scheme.to_string(),
                r.total.to_string(),
                r.cluster_term.to_string(),
                r.cooperator_term.to_string(),
                r.duplicate_term.to_string(),
                r.n_clusters.to_string(),
            ];
            if with_timing {
                rec.push(format!("{:.3}", r.wall_ms));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_HEADER)?;
        for r in &self.summary {
            w.write_record([
                r.sweep_param.to_string(),
                r.value.to_string(),
                r.scheme.to_string(),
                r.seeds.to_string(),
                r.mean_total.to_string(),
                r.mean_cluster_term.to_string(),
                r.mean_cooperator_term.to_string(),
                r.mean_duplicate_term.to_string(),
                r.mean_clusters.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean total traffic for a (value, scheme) pair.
    pub fn mean_total(&self, value: f64, scheme: Scheme) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.value == value && r.scheme == scheme)
            .map(|r| r.mean_total)
    }
}

/// Runs one grid point: every scheme on the scenario for (value, seed).
fn run_point(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let s = spec
        .sweep
        .param
        .apply(&spec.base, value)?
        .instantiate(seed)?;
    let pop = scenario_popularity(&s)?;
    let g = build_node_graph(&s);
    spec.schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let run = run_scheme(scheme, &s, &pop, &g, spec.placement)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(SweepRow {
                sweep_param: spec.sweep.param.as_str(),
                value,
                seed,
                scheme,
                total: run.report.total,
                cluster_term: run.report.cluster_term,
                cooperator_term: run.report.cooperator_term,
                duplicate_term: run.report.duplicate_term,
                n_clusters: run.num_clusters(),
                wall_ms,
            })
        })
        .collect()
}

/// Runs the whole grid on `threads` workers (0 = rayon default).
pub fn run_sweep(spec: &ExperimentSpec, threads: usize) -> Result<SweepTable> {
    spec.validate()?;
    let grid: Vec<(f64, u64)> = spec
        .sweep
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Experiment(e.to_string()))?;
    let chunks: Vec<Vec<SweepRow>> = pool.install(|| {
        grid.par_iter()
            .map(|&(v, seed)| run_point(spec, v, seed))
            .collect::<Result<_>>()
    })?;
    let rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    let summary = summarize(spec, &rows);
    Ok(SweepTable { rows, summary })
}

fn summarize(spec: &ExperimentSpec, rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &value in &spec.sweep.values {
        for &scheme in &spec.schemes {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.value == value && r.scheme == scheme)
                .collect();
            let n = group.len() as f64;
            let mean = |f: fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            out.push(SummaryRow {
                sweep_param: spec.sweep.param.as_str(),
                value,
                scheme,
                seeds: group.len(),
                mean_total: mean(|r| r.total),
                mean_cluster_term: mean(|r| r.cluster_term),
                mean_cooperator_term: mean(|r| r.cooperator_term),
                mean_duplicate_term: mean(|r| r.duplicate_term),
                mean_clusters: mean(|r| r.n_clusters as f64),
            });
        }
    }
    out
}
