//! Clique enumeration over the node graph and independent-set selection over
//! the candidate-cluster graph.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeGraph, NodeId};

pub const DEFAULT_ORACLE_LIMIT: usize = 20;

/// `{m} ∪ {m' > m : (m, m') ∈ E}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyTable {
    pub owner: NodeId,
    pub members: Vec<NodeId>,
}

impl AdjacencyTable {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Members other than the owner, ascending.
    pub fn others(&self) -> &[NodeId] {
        &self.members[1..]
    }
}

/// Forward adjacency tables of every vertex, in vertex order.
pub fn adjacency_tables(g: &NodeGraph) -> Vec<AdjacencyTable> {
    (0..g.num_nodes())
        .map(|m| {
            let mut members = vec![m];
            members.extend(g.neighbors(m).iter().copied().filter(|&n| n > m));
            AdjacencyTable { owner: m, members }
        })
        .collect()
}

/// Tables with at least one edge, largest first, ties by lower owner.
pub fn ordered_tables(g: &NodeGraph) -> Vec<AdjacencyTable> {
    let mut tables: Vec<_> = adjacency_tables(g)
        .into_iter()
        .filter(|t| t.size() > 1)
        .collect();
    tables.sort_by(|a, b| b.size().cmp(&a.size()).then(a.owner.cmp(&b.owner)));
    tables
}

/// All maximal cliques with at least two vertices, each sorted, the list
/// sorted lexicographically.
///
/// Bron–Kerbosch with Tomita pivoting over bitsets.
pub fn maximal_cliques(g: &NodeGraph) -> Vec<Vec<NodeId>> {
    let n = g.num_nodes();
    let adj: Vec<BitSet> = (0..n)
        .map(|m| BitSet::from_iter(n, g.neighbors(m).iter().copied()))
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::new();
    expand(
        &adj,
        &mut current,
        BitSet::full(n),
        BitSet::new(n),
        &mut out,
    );
    for c in &mut out {
        c.sort_unstable();
    }
    out.retain(|c| c.len() >= 2);
    out.sort();
    out
}

fn expand(
    adj: &[BitSet],
    current: &mut Vec<NodeId>,
    mut candidates: BitSet,
    mut excluded: BitSet,
    out: &mut Vec<Vec<NodeId>>,
) {
    if candidates.is_empty() {
        if excluded.is_empty() {
            out.push(current.clone());
        }
        return;
    }
    let pivot = candidates
        .iter()
        .chain(excluded.iter())
        .max_by_key(|&u| (candidates.intersection_count(&adj[u]), std::cmp::Reverse(u)))
        .expect("candidates nonempty");
    let branch: Vec<NodeId> = candidates.difference(&adj[pivot]).iter().collect();
    for v in branch {
        current.push(v);
        expand(
            adj,
            current,
            candidates.intersection(&adj[v]),
            excluded.intersection(&adj[v]),
            out,
        );
        current.pop();
        candidates.remove(v);
        excluded.insert(v);
    }
}

/// Every subset of size `2..=cap` of every input clique, deduplicated and
/// ordered by size, then lexicographically.
pub fn enumerate_complete_subgraphs(
    cliques: &[Vec<NodeId>],
    cap: usize,
) -> Result<Vec<Vec<NodeId>>> {
    if cap < 2 {
        return Err(Error::CapTooSmall(cap));
    }
    let mut seen: BTreeSet<(usize, Vec<NodeId>)> = BTreeSet::new();
    for clique in cliques {
        let mut sorted = clique.clone();
        sorted.sort_unstable();
        sorted.dedup();
        for size in 2..=cap.min(sorted.len()) {
            for_each_combination(sorted.len(), size, |idx| {
                let subset: Vec<NodeId> = idx.iter().map(|&i| sorted[i]).collect();
                seen.insert((size, subset));
            });
        }
    }
    Ok(seen.into_iter().map(|(_, s)| s).collect())
}

/// Calls `visit` with every `k`-combination of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Candidate clusters as vertices, joined when they share a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    vertices: Vec<Vec<NodeId>>,
    weights: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
}

impl WeightedGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec<NodeId>] {
        &self.vertices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, l)| l.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    /// Graph with explicit edges, for tests and hand-built instances.
    pub fn from_parts(weights: Vec<f64>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = weights.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::NodeOutOfRange {
                    id: a.max(b),
                    count: n,
                });
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for l in &mut adjacency {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self {
            vertices: (0..n).map(|v| vec![v]).collect(),
            weights,
            adjacency,
        })
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().all(|&a| {
            set.iter()
                .all(|&b| a == b || self.adjacency[a].binary_search(&b).is_err())
        })
    }

    pub fn set_weight(&self, set: &[usize]) -> f64 {
        set.iter().map(|&v| self.weights[v]).sum()
    }
}

/// Builds the overlap graph; candidates with weight `<= 0` are dropped first.
pub fn build_weighted_graph(candidates: &[Vec<NodeId>], weights: &[f64]) -> Result<WeightedGraph> {
    if candidates.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "candidates vs weights",
            expected: candidates.len(),
            got: weights.len(),
        });
    }
    let (vertices, weights): (Vec<_>, Vec<_>) = candidates
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| (c.clone(), w))
        .unzip();
    let num_nodes = vertices.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut by_node: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
    for (v, members) in vertices.iter().enumerate() {
        for &m in members {
            by_node[m].push(v);
        }
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for group in &by_node {
        for &a in group {
            adjacency[a].extend(group.iter().copied().filter(|&b| b != a));
        }
    }
    for l in &mut adjacency {
        l.sort_unstable();
        l.dedup();
    }
    Ok(WeightedGraph {
        vertices,
        weights,
        adjacency,
    })
}

/// Selected independent set with its total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub vertices: Vec<usize>,
    pub weight: f64,
}

impl Selection {
    fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            weight: 0.0,
        }
    }
}

/// Vertex order for greedy extension: weight descending, index ascending.
fn greedy_order(g: &WeightedGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g.weights[b].total_cmp(&g.weights[a]).then(a.cmp(&b)));
    order
}

/// One greedy pass seeded at `seed`: repeatedly take the heaviest remaining
/// vertex and discard its neighbors.
fn greedy_pass(g: &WeightedGraph, order: &[usize], seed: usize) -> Selection {
    let mut removed = vec![false; g.len()];
    let mut chosen = vec![seed];
    let mut weight = g.weights[seed];
    removed[seed] = true;
    for &u in &g.adjacency[seed] {
        removed[u] = true;
    }
    // removals only shrink the pool, so a single scan in weight order visits
    // the current maximum each time
    for &v in order {
        if removed[v] {
            continue;
        }
        chosen.push(v);
        weight += g.weights[v];
        removed[v] = true;
        for &u in &g.adjacency[v] {
            removed[u] = true;
        }
    }
    chosen.sort_unstable();
    Selection {
        vertices: chosen,
        weight,
    }
}

/// Multi-start greedy: one pass per seed vertex, keeping the heaviest result
/// (ties go to the earliest seed).
pub fn greedy_mwis(g: &WeightedGraph) -> Selection {
    let order = greedy_order(g);
    let passes: Vec<Selection> = (0..g.len())
        .into_par_iter()
        .map(|seed| greedy_pass(g, &order, seed))
        .collect();
    // sequential reduction keeps the earliest-seed tie-break
    let mut best = Selection::empty();
    for pass in passes {
        if best.weight < pass.weight {
            best = pass;
        }
    }
    best
}

/// Classic greedy seeded only at the heaviest vertex.
pub fn greedy_mwis_single_start(g: &WeightedGraph) -> Selection {
    let order = greedy_order(g);
    match order.first() {
        Some(&seed) => greedy_pass(g, &order, seed),
        None => Selection::empty(),
    }
}

/// Exact maximum-weight independent set by branch and bound.
///
/// Vertices are branched in index order, inclusion first; an optimum replaces
/// the incumbent only when strictly heavier, so among equal-weight optima the
/// one with the lexicographically greatest indicator vector wins.
pub fn exact_mwis(g: &WeightedGraph, limit: usize) -> Result<Selection> {
    if g.len() > limit {
        return Err(Error::OracleLimit {
            size: g.len() as u128,
            limit: limit as u128,
        });
    }
    let n = g.len();
    let mut suffix = vec![0.0; n + 1];
    for v in (0..n).rev() {
        suffix[v] = suffix[v + 1] + g.weights[v].max(0.0);
    }
    let mut state = ExactState {
        g,
        suffix,
        blocked: vec![0u32; n],
        current: Vec::new(),
        best: Selection {
            vertices: Vec::new(),
            weight: f64::NEG_INFINITY,
        },
    };
    state.branch(0, 0.0);
    if state.best.weight == f64::NEG_INFINITY {
        state.best = Selection::empty();
    }
    Ok(state.best)
}

struct ExactState<'a> {
    g: &'a WeightedGraph,
    suffix: Vec<f64>,
    blocked: Vec<u32>,
    current: Vec<usize>,
    best: Selection,
}

impl ExactState<'_> {
    fn branch(&mut self, v: usize, weight: f64) {
        if v == self.g.len() {
            if weight > self.best.weight {
                self.best = Selection {
                    vertices: self.current.clone(),
                    weight,
                };
            }
            return;
        }
        if weight + self.suffix[v] < self.best.weight {
            return;
        }
        if self.blocked[v] == 0 {
            self.current.push(v);
            for &u in &self.g.adjacency[v] {
                self.blocked[u] += 1;
            }
            self.branch(v + 1, weight + self.g.weights[v]);
            for &u in &self.g.adjacency[v] {
                self.blocked[u] -= 1;
            }
            self.current.pop();
        }
        self.branch(v + 1, weight);
    }
}

/// Fixed-width bitset over vertex ids.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    fn from_iter(len: usize, items: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in items {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn intersection(&self, other: &Self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
            len: self.len,
        }
    }

    fn difference(&self, other: &Self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
            len: self.len,
        }
    }

    fn intersection_count(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}
