//! Core domain types: scenarios, the cooperation predicate and the node graph.
//!
//! Node ids are `0..M` and file ids are `0..F` throughout the crate. File id 0
//! is the most popular file under the global Zipf ranking.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationError};

pub type NodeId = usize;
pub type FileId = usize;

pub const DEFAULT_AREA_SIDE: f64 = 50.0;
pub const DEFAULT_RATE_RANGE: (f64, f64) = (50.0, 150.0);
pub const DEFAULT_LOCALITY: f64 = 0.3;
pub const DEFAULT_CLUSTER_CAP: usize = 5;

/// Independent random streams derived from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Geometry = 1,
    Popularity = 2,
    Separation = 3,
    Enhancement = 4,
}

/// Deterministic generator for one purpose of one seed.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Number of cache nodes (M).
    pub num_nodes: usize,
    /// Library size in files (F).
    pub library_size: usize,
    /// Per-node storage in files (K).
    pub cache_size: usize,
    /// File size in bits (L).
    pub file_size: f64,
    /// Node coordinates in meters.
    pub positions: Vec<[f64; 2]>,
    /// Aggregate request arrival rate per node, requests/s.
    pub rates: Vec<f64>,
    /// Distance threshold, meters.
    pub gamma_d: f64,
    /// Load-difference threshold, requests/s.
    #[serde(default)]
    pub gamma_l: f64,
    pub zipf_z: f64,
    pub seed: u64,
    #[serde(default = "default_cluster_cap")]
    pub cluster_size_cap: usize,
    /// Strength of the per-node popularity reshuffle, in `[0, 1]`.
    #[serde(default = "default_locality")]
    pub locality: f64,
}

fn default_cluster_cap() -> usize {
    DEFAULT_CLUSTER_CAP
}

fn default_locality() -> f64 {
    DEFAULT_LOCALITY
}

impl Scenario {
    /// Checks every invariant and returns the scenario unchanged.
    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        validate_scenario(&self)?;
        Ok(self)
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let [ax, ay] = self.positions[a];
        let [bx, by] = self.positions[b];
        (ax - bx).hypot(ay - by)
    }

    pub fn load_difference(&self, a: NodeId, b: NodeId) -> f64 {
        (self.rates[a] - self.rates[b]).abs()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    fn check_node(&self, id: NodeId) -> Result<()> {
        if id >= self.num_nodes {
            return Err(Error::NodeOutOfRange {
                id,
                count: self.num_nodes,
            });
        }
        Ok(())
    }
}

/// Returns the first violated invariant, if any.
pub fn validate_scenario(s: &Scenario) -> std::result::Result<(), ValidationError> {
    use ValidationError::*;
    if s.num_nodes == 0 {
        return Err(NoNodes);
    }
    if s.library_size == 0 {
        return Err(EmptyLibrary);
    }
    if s.cache_size == 0 {
        return Err(ZeroCache);
    }
    if s.cache_size > s.library_size {
        return Err(CacheExceedsLibrary);
    }
    if !(s.file_size > 0.0 && s.file_size.is_finite()) {
        return Err(NonPositiveFileSize);
    }
    if s.positions.len() != s.num_nodes {
        return Err(PositionsLength {
            expected: s.num_nodes,
            got: s.positions.len(),
        });
    }
    if s.rates.len() != s.num_nodes {
        return Err(RatesLength {
            expected: s.num_nodes,
            got: s.rates.len(),
        });
    }
    if let Some(node) = s.rates.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(NonPositiveRate { node });
    }
    if let Some(node) = s
        .positions
        .iter()
        .position(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(NonFinitePosition { node });
    }
    if s.gamma_d.is_nan() || s.gamma_d < 0.0 {
        return Err(NegativeDistanceThreshold);
    }
    if s.gamma_l.is_nan() || s.gamma_l < 0.0 {
        return Err(NegativeLoadThreshold);
    }
    if !(s.zipf_z >= 0.0 && s.zipf_z.is_finite()) {
        return Err(NegativeSkewness);
    }
    if s.cluster_size_cap < 2 {
        return Err(ClusterCapTooSmall);
    }
    if !(0.0..=1.0).contains(&s.locality) {
        return Err(LocalityOutOfRange);
    }
    Ok(())
}

/// Whether two distinct nodes satisfy both the distance and the load-difference
/// thresholds.
pub fn can_cooperate(s: &Scenario, m: NodeId, other: NodeId) -> Result<bool> {
    s.check_node(m)?;
    s.check_node(other)?;
    if m == other {
        return Err(Error::SelfPair(m));
    }
    Ok(cooperates(s, m, other))
}

#[inline]
fn cooperates(s: &Scenario, m: NodeId, other: NodeId) -> bool {
    s.distance(m, other) <= s.gamma_d && s.load_difference(m, other) >= s.gamma_l
}

/// Undirected cooperation graph over the cache nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGraph {
    adjacency: Vec<Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl NodeGraph {
    /// Builds a graph from an edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(num_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(a, b) in edges {
            for id in [a, b] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        id,
                        count: num_nodes,
                    });
                }
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(adjacency: Vec<Vec<NodeId>>) -> Self {
        let edges = adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect();
        Self { adjacency, edges }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Cooperator set of `m`, sorted ascending.
    pub fn neighbors(&self, m: NodeId) -> &[NodeId] {
        &self.adjacency[m]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn degree(&self, m: NodeId) -> usize {
        self.adjacency[m].len()
    }

    /// The same vertices with no edges; used when cooperation is disabled.
    pub fn empty(num_nodes: usize) -> Self {
        Self::from_adjacency(vec![Vec::new(); num_nodes])
    }

    /// Adjacency-list text dump, one vertex per line: `id: n1 n2 ...`.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = String::new();
        for (m, list) in self.adjacency.iter().enumerate() {
            out.push_str(&m.to_string());
            out.push(':');
            for n in list {
                out.push(' ');
                out.push_str(&n.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Connects every cooperating pair of the scenario.
pub fn build_node_graph(s: &Scenario) -> NodeGraph {
    let m = s.num_nodes;
    let mut adjacency = vec![Vec::new(); m];
    for a in 0..m {
        for b in (a + 1)..m {
            if cooperates(s, a, b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    NodeGraph::from_adjacency(adjacency)
}

/// Template from which seeded scenarios are drawn: node positions uniform in a
/// square, rates uniform in an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioTemplate {
    pub num_nodes: usize,
    pub library_size: usize,
    pub cache_size: usize,
    pub file_size: f64,
    pub gamma_d: f64,
    pub gamma_l: f64,
    pub zipf_z: f64,
    pub cluster_size_cap: usize,
    pub locality: f64,
    /// Side of the square deployment area, meters.
    pub area_side: f64,
    pub rate_min: f64,
    pub rate_max: f64,
}

impl Default for ScenarioTemplate {
    /// Desk-scale defaults: the reference setup with F and K scaled down by 10.
    fn default() -> Self {
        Self {
            num_nodes: 10,
            library_size: 500,
            cache_size: 25,
            file_size: 2e9,
            gamma_d: 20.0,
            gamma_l: 0.0,
            zipf_z: 0.6,
            cluster_size_cap: DEFAULT_CLUSTER_CAP,
            locality: DEFAULT_LOCALITY,
            area_side: DEFAULT_AREA_SIDE,
            rate_min: DEFAULT_RATE_RANGE.0,
            rate_max: DEFAULT_RATE_RANGE.1,
        }
    }
}

impl ScenarioTemplate {
    /// Draws geometry and rates from `seed` and validates the result.
    pub fn instantiate(&self, seed: u64) -> Result<Scenario> {
        if self.area_side.is_nan()
            || self.area_side < 0.0
            || self.rate_min.is_nan()
            || self.rate_min <= 0.0
            || self.rate_max < self.rate_min
        {
            return Err(Error::Experiment(
                "template needs area_side >= 0 and 0 < rate_min <= rate_max".into(),
            ));
        }
        let mut rng = stream_rng(seed, Stream::Geometry);
        let positions: Vec<[f64; 2]> = (0..self.num_nodes)
            .map(|_| {
                [
                    rng.gen::<f64>() * self.area_side,
                    rng.gen::<f64>() * self.area_side,
                ]
            })
            .collect();
        let span = self.rate_max - self.rate_min;
        let rates = (0..self.num_nodes)
            .map(|_| self.rate_min + rng.gen::<f64>() * span)
            .collect();
        let s = Scenario {
            num_nodes: self.num_nodes,
            library_size: self.library_size,
            cache_size: self.cache_size,
            file_size: self.file_size,
            positions,
            rates,
            gamma_d: self.gamma_d,
            gamma_l: self.gamma_l,
            zipf_z: self.zipf_z,
            seed,
            cluster_size_cap: self.cluster_size_cap,
            locality: self.locality,
        };
        Ok(s.validate()?)
    }
}
