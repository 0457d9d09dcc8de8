//! Content placement on top of a clustering.
//!
//! The redundancy graph keeps the cooperation edges that cross cluster
//! boundaries. Each such edge carries the popular files both endpoints would
//! otherwise cache. Separation narrows those duplicate sets to the files that
//! actually waste storage, and the enhancement pass then decides, per node and
//! file, whether the node must cache (`+1`), must not cache (`-1`), or is still
//! free (`0`). Remaining storage is filled by popularity.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{ClusteringResult, PopularSets};
use crate::error::{Error, Result};
use crate::graph::ordered_tables;
use crate::model::{stream_rng, FileId, NodeGraph, NodeId, Scenario, Stream};
use crate::workload::{rank_descending, top_k, PopularityModel};

/// Binary caching matrix plus the cooperation mode it is evaluated under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    x: Vec<Vec<bool>>,
    /// When false, nodes are served only from their own storage.
    pub cooperation: bool,
}

impl Placement {
    pub fn empty(num_nodes: usize, library_size: usize, cooperation: bool) -> Self {
        Self {
            x: vec![vec![false; library_size]; num_nodes],
            cooperation,
        }
    }

    /// From per-node cached file lists.
    pub fn from_lists(
        library_size: usize,
        lists: &[Vec<FileId>],
        cooperation: bool,
    ) -> Result<Self> {
        let mut p = Self::empty(lists.len(), library_size, cooperation);
        for (m, files) in lists.iter().enumerate() {
            for &f in files {
                if f >= library_size {
                    return Err(Error::LengthMismatch {
                        what: "file id vs F",
                        expected: library_size,
                        got: f + 1,
                    });
                }
                p.x[m][f] = true;
            }
        }
        Ok(p)
    }

    pub fn num_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn library_size(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn get(&self, m: NodeId, f: FileId) -> bool {
        self.x[m][f]
    }

    pub fn set(&mut self, m: NodeId, f: FileId, cached: bool) {
        self.x[m][f] = cached;
    }

    pub fn row(&self, m: NodeId) -> &[bool] {
        &self.x[m]
    }

    pub fn cached(&self, m: NodeId) -> Vec<FileId> {
        (0..self.library_size()).filter(|&f| self.x[m][f]).collect()
    }

    pub fn count(&self, m: NodeId) -> usize {
        self.x[m].iter().filter(|&&c| c).count()
    }

    /// Whether any member of the set caches `f`.
    pub fn cluster_has(&self, members: &[NodeId], f: FileId) -> bool {
        members.iter().any(|&m| self.x[m][f])
    }

    /// Whether `f` is available at `m` or at one of its cooperators.
    pub fn local_state(&self, g: &NodeGraph, m: NodeId, f: FileId) -> bool {
        self.x[m][f] || (self.cooperation && g.neighbors(m).iter().any(|&o| self.x[o][f]))
    }

    pub fn respects_capacity(&self, k: usize) -> bool {
        (0..self.num_nodes()).all(|m| self.count(m) <= k)
    }

    pub fn check_shape(&self, s: &Scenario) -> Result<()> {
        if self.num_nodes() != s.num_nodes || self.library_size() != s.library_size {
            return Err(Error::LengthMismatch {
                what: "placement shape vs scenario (M*F)",
                expected: s.num_nodes * s.library_size,
                got: self.num_nodes() * self.library_size(),
            });
        }
        Ok(())
    }

    /// Sparse `node_id,file_id` rows, node-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node_id", "file_id"])?;
        for m in 0..self.num_nodes() {
            for f in self.cached(m) {
                w.write_record([m.to_string(), f.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(
        reader: R,
        num_nodes: usize,
        library_size: usize,
        cooperation: bool,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            node_id: usize,
            file_id: usize,
        }
        let mut p = Self::empty(num_nodes, library_size, cooperation);
        for row in csv::Reader::from_reader(reader).deserialize() {
            let Row { node_id, file_id } = row?;
            if node_id >= num_nodes {
                return Err(Error::NodeOutOfRange {
                    id: node_id,
                    count: num_nodes,
                });
            }
            if file_id >= library_size {
                return Err(Error::LengthMismatch {
                    what: "file id vs F",
                    expected: library_size,
                    got: file_id + 1,
                });
            }
            p.x[node_id][file_id] = true;
        }
        Ok(p)
    }
}

/// How "random" file choices are made.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum FileSelector {
    /// Uniform sampling from a seeded stream.
    Seeded(ChaCha8Rng),
    /// Take candidates in the caller's preference order.
    Ordered,
}

impl FileSelector {
    /// Picks `count` files from `candidates`, which are given in preference
    /// order.
    pub fn pick(&mut self, candidates: &[FileId], count: usize) -> Vec<FileId> {
        let count = count.min(candidates.len());
        match self {
            FileSelector::Seeded(rng) => {
                let mut idx = sample(rng, candidates.len(), count).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| candidates[i]).collect()
            }
            FileSelector::Ordered => candidates[..count].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Seeded random choice where the procedure picks files at random; when
    /// false, the most popular candidates are taken instead.
    pub random_selection: bool,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            random_selection: true,
        }
    }
}

impl PlacementOptions {
    fn selector(&self, seed: u64, stream: Stream) -> FileSelector {
        if self.random_selection {
            FileSelector::Seeded(stream_rng(seed, stream))
        } else {
            FileSelector::Ordered
        }
    }
}

/// Cooperation edges that cross cluster boundaries, with per-edge file sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RedundancyGraph {
    #[serde(skip)]
    graph: NodeGraph,
    /// Popular files shared by both endpoints, one set per edge.
    pub dup_sets: Vec<BTreeSet<FileId>>,
    /// Files whose duplication is to be resolved, one set per edge.
    pub redundancy_sets: Vec<BTreeSet<FileId>>,
    /// Storage bookkeeping used by separation, in files.
    pub remaining_capacity: Vec<usize>,
}

impl RedundancyGraph {
    /// Builds a graph directly from edges and duplicate sets (`dup_sets`
    /// aligned with the sorted edge list).
    pub fn from_parts(
        num_nodes: usize,
        edges: &[(NodeId, NodeId)],
        dup_sets: Vec<BTreeSet<FileId>>,
        capacity: usize,
    ) -> Result<Self> {
        let graph = NodeGraph::from_edges(num_nodes, edges)?;
        if graph.edges().len() != dup_sets.len() {
            return Err(Error::LengthMismatch {
                what: "redundancy edges vs duplicate sets",
                expected: graph.edges().len(),
                got: dup_sets.len(),
            });
        }
        let n_edges = dup_sets.len();
        Ok(Self {
            graph,
            dup_sets,
            redundancy_sets: vec![BTreeSet::new(); n_edges],
            remaining_capacity: vec![capacity; num_nodes],
        })
    }

    pub fn graph(&self) -> &NodeGraph {
        &self.graph
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        self.graph.edges()
    }

    pub fn edge_index(&self, a: NodeId, b: NodeId) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.graph.edges().binary_search(&key).ok()
    }

    fn incident(&self, m: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.graph
            .neighbors(m)
            .iter()
            .map(move |&o| self.edge_index(m, o).expect("adjacent pair has an edge"))
    }
}

/// Drops intra-cluster edges and fills duplicate sets from the popular sets.
pub fn build_redundancy_graph(
    g: &NodeGraph,
    r: &ClusteringResult,
    sets: &PopularSets,
    s: &Scenario,
) -> RedundancyGraph {
    let edges: Vec<(NodeId, NodeId)> = g
        .edges()
        .iter()
        .copied()
        .filter(
            |&(a, b)| !matches!((r.assignment[a], r.assignment[b]), (Some(x), Some(y)) if x == y),
        )
        .collect();
    let dup_sets = edges
        .iter()
        .map(|&(a, b)| {
            let sa: BTreeSet<FileId> = sets.for_node(r, a).iter().copied().collect();
            sets.for_node(r, b)
                .iter()
                .copied()
                .filter(|f| sa.contains(f))
                .collect()
        })
        .collect();
    RedundancyGraph::from_parts(g.num_nodes(), &edges, dup_sets, s.cache_size)
        .expect("edges come from a valid node graph")
}

/// Fixes each edge's redundancy set.
///
/// Tables are visited largest first. For owner `m` the files duplicated on all
/// of its table edges are handled first; the rest of each edge's share comes
/// from that edge's own duplicates. Fixing an edge charges its size to the
/// other endpoint and removes its files from that endpoint's other edges.
pub fn separate_duplicates(
    mut rg: RedundancyGraph,
    selector: &mut FileSelector,
) -> RedundancyGraph {
    for table in ordered_tables(&rg.graph) {
        let m = table.owner;
        let edges: Vec<(NodeId, usize)> = table
            .others()
            .iter()
            .map(|&o| (o, rg.edge_index(m, o).expect("table edge")))
            .collect();
        let mut common: BTreeSet<FileId> = rg.dup_sets[edges[0].1].clone();
        for &(_, e) in &edges[1..] {
            common.retain(|f| rg.dup_sets[e].contains(f));
        }
        let budget = rg.remaining_capacity[m];
        let shared: Vec<FileId> = common.iter().copied().collect();
        let saturated = shared.len() >= budget;
        let shared_pick: BTreeSet<FileId> = if saturated {
            selector.pick(&shared, budget).into_iter().collect()
        } else {
            common.clone()
        };
        let per_edge = if saturated {
            0
        } else {
            (budget - shared.len()) / edges.len()
        };
        for &(other, e) in &edges {
            let mut chosen = shared_pick.clone();
            if per_edge > 0 {
                let rest: Vec<FileId> = rg.dup_sets[e]
                    .iter()
                    .copied()
                    .filter(|f| !common.contains(f))
                    .collect();
                chosen.extend(selector.pick(&rest, per_edge));
            }
            rg.remaining_capacity[other] =
                rg.remaining_capacity[other].saturating_sub(chosen.len());
            let touching: Vec<usize> = rg.incident(other).filter(|&e2| e2 != e).collect();
            for e2 in touching {
                rg.dup_sets[e2].retain(|f| !chosen.contains(f));
            }
            rg.redundancy_sets[e] = chosen;
        }
    }
    rg
}

/// Per-node, per-file enhancement indicators and the working bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnhancementState {
    delta: Vec<Vec<i8>>,
    pub remaining_capacity: Vec<usize>,
    /// Unplaced files of each cluster's popular set, in rank order.
    pub remaining_cluster_files: Vec<Vec<FileId>>,
    /// Which member holds each file placed in a cluster.
    holders: Vec<HashMap<FileId, NodeId>>,
    writes: usize,
}

impl EnhancementState {
    fn new(s: &Scenario, r: &ClusteringResult, sets: &PopularSets) -> Self {
        Self {
            delta: vec![vec![0; s.library_size]; s.num_nodes],
            remaining_capacity: vec![s.cache_size; s.num_nodes],
            remaining_cluster_files: sets.cluster.clone(),
            holders: vec![HashMap::new(); r.clusters.len()],
            writes: 0,
        }
    }

    pub fn delta(&self, m: NodeId, f: FileId) -> i8 {
        self.delta[m][f]
    }

    /// Number of cells written; each cell is written at most once.
    pub fn writes(&self) -> usize {
        self.writes
    }

    pub fn nonzero_cells(&self) -> usize {
        self.delta.iter().flatten().filter(|&&d| d != 0).count()
    }

    fn forbid(&mut self, m: NodeId, f: FileId) -> bool {
        self.write(m, f, -1)
    }

    fn write(&mut self, m: NodeId, f: FileId, value: i8) -> bool {
        if self.delta[m][f] != 0 {
            return false;
        }
        self.delta[m][f] = value;
        self.writes += 1;
        true
    }

    /// Marks `f` for caching at `m`, charging capacity and cluster bookkeeping.
    fn place(&mut self, r: &ClusteringResult, m: NodeId, f: FileId) -> bool {
        if self.remaining_capacity[m] == 0 || self.held_elsewhere(r, m, f) || !self.write(m, f, 1) {
            return false;
        }
        self.remaining_capacity[m] -= 1;
        if let Some(c) = r.assignment[m] {
            self.holders[c].insert(f, m);
            self.remaining_cluster_files[c].retain(|&x| x != f);
        }
        true
    }

    fn held_elsewhere(&self, r: &ClusteringResult, m: NodeId, f: FileId) -> bool {
        r.assignment[m]
            .and_then(|c| self.holders[c].get(&f))
            .is_some_and(|&h| h != m)
    }

    fn placed_near(&self, g: &NodeGraph, m: NodeId, f: FileId) -> bool {
        self.delta[m][f] == 1 || g.neighbors(m).iter().any(|&o| self.delta[o][f] == 1)
    }
}

/// Result of the enhancement pass.
#[derive(Debug, Clone)]
pub struct Enhancement {
    pub placement: Placement,
    pub state: EnhancementState,
    /// Per redundancy edge, the files it ended up resolving: at least one
    /// endpoint is barred from caching each of them.
    pub resolved: Vec<BTreeSet<FileId>>,
    /// Files of a redundancy set that were already placed at both endpoints.
    pub conflicts: usize,
}

/// Runs the four enhancement phases and derives the final placement.
pub fn enhance_decisions(
    rg: &RedundancyGraph,
    r: &ClusteringResult,
    sets: &PopularSets,
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    selector: &mut FileSelector,
) -> Enhancement {
    let mut st = EnhancementState::new(s, r, sets);
    let mut resolved = vec![BTreeSet::new(); rg.edges().len()];
    let mut conflicts = 0;

    // (i) resolve each redundancy edge
    for table in ordered_tables(rg.graph()) {
        let m = table.owner;
        for &other in table.others() {
            let e = rg.edge_index(m, other).expect("table edge");
            conflicts += resolve_edge(
                &mut st,
                &rg.redundancy_sets[e],
                &mut resolved[e],
                (m, other),
                r,
                s,
                pop,
                g,
            );
        }
    }

    // (ii) place the remaining cluster files
    for (c, cluster) in r.clusters.iter().enumerate() {
        let constrained: Vec<FileId> = st.remaining_cluster_files[c]
            .iter()
            .copied()
            .filter(|&f| cluster.members.iter().any(|&u| st.delta(u, f) == -1))
            .collect();
        for &m in &cluster.members {
            for &f in &constrained {
                if st.remaining_capacity[m] == 0 {
                    break;
                }
                if st.remaining_cluster_files[c].contains(&f) && st.delta(m, f) == 0 {
                    st.place(r, m, f);
                }
            }
        }
        for &m in &cluster.members {
            let free = st.remaining_capacity[m];
            if free == 0 {
                continue;
            }
            let open: Vec<FileId> = st.remaining_cluster_files[c]
                .iter()
                .copied()
                .filter(|&f| st.delta(m, f) == 0)
                .collect();
            for f in selector.pick(&open, free) {
                st.place(r, m, f);
            }
        }
        let ranking = rank_descending(&cluster.popularity);
        for &m in &cluster.members {
            fill_by_rank(&mut st, r, g, m, &ranking, true);
        }
    }

    // (iii) nonclustered nodes take their most popular files not yet placed
    // in their neighbourhood
    for &m in &r.nonclustered {
        let ranking = rank_descending(pop.row(m));
        fill_by_rank(&mut st, r, g, m, &ranking, true);
    }

    // leftover storage takes any remaining admissible file
    for m in 0..s.num_nodes {
        if st.remaining_capacity[m] == 0 {
            continue;
        }
        let ranking = match r.cluster_of(m) {
            Some(c) => rank_descending(&c.popularity),
            None => rank_descending(pop.row(m)),
        };
        fill_by_rank(&mut st, r, g, m, &ranking, false);
    }

    // (iv) final decisions
    let mut placement = Placement::empty(s.num_nodes, s.library_size, true);
    for m in 0..s.num_nodes {
        for f in 0..s.library_size {
            if st.delta(m, f) == 1 {
                placement.set(m, f, true);
            }
        }
    }
    Enhancement {
        placement,
        state: st,
        resolved,
        conflicts,
    }
}

fn fill_by_rank(
    st: &mut EnhancementState,
    r: &ClusteringResult,
    g: &NodeGraph,
    m: NodeId,
    ranking: &[FileId],
    skip_placed_nearby: bool,
) {
    for &f in ranking {
        if st.remaining_capacity[m] == 0 {
            return;
        }
        if st.delta(m, f) != 0 || (skip_placed_nearby && st.placed_near(g, m, f)) {
            continue;
        }
        st.place(r, m, f);
    }
}

/// Weighted demand for `f` at `m` and its cooperators.
fn neighbourhood_demand(
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    m: NodeId,
    f: FileId,
) -> f64 {
    std::iter::once(m)
        .chain(g.neighbors(m).iter().copied())
        .map(|u| s.rates[u] * pop.p(u, f) * s.file_size)
        .sum()
}

/// Resolves one redundancy edge; returns the number of conflicting files.
#[allow(clippy::too_many_arguments)]
fn resolve_edge(
    st: &mut EnhancementState,
    redundancy: &BTreeSet<FileId>,
    resolved: &mut BTreeSet<FileId>,
    (m, other): (NodeId, NodeId),
    r: &ClusteringResult,
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
) -> usize {
    let mut conflicts = 0;
    let mut open = Vec::new();
    for &f in redundancy {
        // a file already held by a cluster mate cannot be cached here again
        for node in [m, other] {
            if st.held_elsewhere(r, node, f) {
                st.forbid(node, f);
            }
        }
        match (st.delta(m, f), st.delta(other, f)) {
            (1, 1) => {
                conflicts += 1;
                continue;
            }
            (1, 0) => {
                st.forbid(other, f);
            }
            (0, 1) => {
                st.forbid(m, f);
            }
            (-1, 0) => {
                st.place(r, other, f);
            }
            (0, -1) => {
                st.place(r, m, f);
            }
            (0, 0) => {
                open.push(f);
                continue;
            }
            _ => {}
        }
        resolved.insert(f);
    }
    if open.is_empty() {
        return conflicts;
    }

    let potential = |node: NodeId| -> f64 {
        open.iter()
            .map(|&f| neighbourhood_demand(s, pop, g, node, f))
            .sum()
    };
    let (winner, loser) = if potential(m) >= potential(other) {
        (m, other)
    } else {
        (other, m)
    };
    let mut ranked = open;
    let demand: HashMap<FileId, f64> = ranked
        .iter()
        .map(|&f| (f, neighbourhood_demand(s, pop, g, winner, f)))
        .collect();
    ranked.sort_by(|a, b| demand[b].total_cmp(&demand[a]).then(a.cmp(b)));
    for f in ranked {
        if st.place(r, winner, f) {
            st.forbid(loser, f);
        } else if st.place(r, loser, f) {
            st.forbid(winner, f);
        } else {
            // both endpoints are full: bar the loser so the pair never
            // duplicates it later
            st.forbid(loser, f);
        }
        resolved.insert(f);
    }
    conflicts
}

/// Everything produced by the proposed placement pipeline.
#[derive(Debug, Clone)]
pub struct ProposedPlacement {
    pub sets: PopularSets,
    pub redundancy: RedundancyGraph,
    pub enhancement: Enhancement,
}

impl ProposedPlacement {
    pub fn placement(&self) -> &Placement {
        &self.enhancement.placement
    }
}

/// Popular sets, redundancy graph, separation and enhancement in one call.
pub fn proposed_placement(
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    r: &ClusteringResult,
    options: PlacementOptions,
) -> ProposedPlacement {
    let sets = crate::clustering::popular_file_sets(r, pop, s);
    let rg = build_redundancy_graph(g, r, &sets, s);
    let rg = separate_duplicates(rg, &mut options.selector(s.seed, Stream::Separation));
    let enhancement = enhance_decisions(
        &rg,
        r,
        &sets,
        s,
        pop,
        g,
        &mut options.selector(s.seed, Stream::Enhancement),
    );
    ProposedPlacement {
        sets,
        redundancy: rg,
        enhancement,
    }
}

/// Placement induced by the popular sets alone: nonclustered nodes cache their
/// own top-K and each cluster deals its top files round-robin to its members.
pub fn pre_enhancement_placement(
    r: &ClusteringResult,
    sets: &PopularSets,
    s: &Scenario,
) -> Placement {
    let mut lists = vec![Vec::new(); s.num_nodes];
    for (c, cluster) in r.clusters.iter().enumerate() {
        for (rank, &f) in sets.cluster[c].iter().enumerate() {
            lists[cluster.members[rank % cluster.size()]].push(f);
        }
    }
    for &m in &r.nonclustered {
        lists[m] = sets.node[m].clone().unwrap_or_default();
    }
    Placement::from_lists(s.library_size, &lists, true).expect("popular sets are in range")
}

/// Every node caches its local top-K and cooperates with its neighbours.
pub fn baseline_lpc(s: &Scenario, pop: &PopularityModel, _g: &NodeGraph) -> Placement {
    let lists: Vec<Vec<FileId>> = (0..s.num_nodes)
        .map(|m| top_k(pop.row(m), s.cache_size))
        .collect();
    Placement::from_lists(s.library_size, &lists, true).expect("top-k ids are in range")
}

/// Every node caches the global top-K; no cooperation.
pub fn baseline_gpc(s: &Scenario, pop: &PopularityModel) -> Placement {
    let top = top_k(pop.global(), s.cache_size);
    Placement::from_lists(s.library_size, &vec![top; s.num_nodes], false)
        .expect("top-k ids are in range")
}
