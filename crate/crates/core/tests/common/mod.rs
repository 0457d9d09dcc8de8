//! Helpers shared by the integration tests. Evaluators here deliberately avoid
//! the library's own traffic code so they can serve as oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;

use coopcache::clustering::{CandidateCluster, ClusteringResult};
use coopcache::graph::WeightedGraph;
use coopcache::model::{NodeGraph, Scenario, ScenarioTemplate};
use coopcache::workload::{scenario_popularity, PopularityModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn template(m: usize, f: usize, k: usize) -> ScenarioTemplate {
    ScenarioTemplate {
        num_nodes: m,
        library_size: f,
        cache_size: k,
        ..ScenarioTemplate::default()
    }
}

pub fn instance(t: &ScenarioTemplate, seed: u64) -> (Scenario, PopularityModel) {
    let s = t.instantiate(seed).unwrap();
    let pop = scenario_popularity(&s).unwrap();
    (s, pop)
}

/// Erdős–Rényi graph on `n` vertices.
pub fn random_graph(n: usize, density: f64, rng: &mut impl Rng) -> NodeGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    NodeGraph::from_edges(n, &edges).unwrap()
}

/// Cooperation recomputed straight from coordinates and rates.
pub fn cooperators(s: &Scenario, m: usize) -> Vec<usize> {
    (0..s.num_nodes)
        .filter(|&o| {
            let dx = s.positions[m][0] - s.positions[o][0];
            let dy = s.positions[m][1] - s.positions[o][1];
            o != m
                && (dx * dx + dy * dy).sqrt() <= s.gamma_d
                && (s.rates[m] - s.rates[o]).abs() >= s.gamma_l
        })
        .collect()
}

/// Offloaded traffic summed request by request.
pub fn direct_traffic(x: &[Vec<bool>], s: &Scenario, rows: &[Vec<f64>], cooperation: bool) -> f64 {
    let mut total = 0.0;
    for m in 0..s.num_nodes {
        let helpers = if cooperation {
            cooperators(s, m)
        } else {
            Vec::new()
        };
        for f in 0..s.library_size {
            if x[m][f] || helpers.iter().any(|&o| x[o][f]) {
                total += s.rates[m] * rows[m][f] * s.file_size;
            }
        }
    }
    total
}

/// Indices sorted by value descending, ties by lower index.
pub fn sort_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx
}

pub fn prefix_sum(values: &[f64], k: usize) -> f64 {
    let idx = sort_desc(values);
    idx[..k.min(idx.len())].iter().map(|&i| values[i]).sum()
}

/// Random family of disjoint cliques of size 2..=cap grown greedily.
pub fn random_clustering(
    g: &NodeGraph,
    s: &Scenario,
    pop: &PopularityModel,
    cap: usize,
    rng: &mut impl Rng,
) -> ClusteringResult {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut used = vec![false; n];
    let mut clusters = Vec::new();
    for &m in &order {
        if used[m] || !rng.gen_bool(0.6) {
            continue;
        }
        let mut members = vec![m];
        let mut pool: Vec<usize> = g
            .neighbors(m)
            .iter()
            .copied()
            .filter(|&o| !used[o])
            .collect();
        pool.shuffle(rng);
        for o in pool {
            if members.len() < cap && members.iter().all(|&x| g.has_edge(x, o)) {
                members.push(o);
            }
        }
        if members.len() >= 2 {
            for &x in &members {
                used[x] = true;
            }
            clusters.push(CandidateCluster::new(members, s, pop).unwrap());
        }
    }
    ClusteringResult::from_clusters(clusters, g, 0).unwrap()
}

pub fn random_placement(m: usize, f: usize, density: f64, rng: &mut impl Rng) -> Vec<Vec<bool>> {
    (0..m)
        .map(|_| (0..f).map(|_| rng.gen_bool(density)).collect())
        .collect()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::EPSILON)
}

pub fn is_clique(g: &NodeGraph, mask: u32) -> bool {
    let vs: Vec<usize> = (0..g.num_nodes()).filter(|&v| mask >> v & 1 == 1).collect();
    vs.iter()
        .enumerate()
        .all(|(i, &a)| vs[i + 1..].iter().all(|&b| g.has_edge(a, b)))
}

pub fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&v| mask >> v & 1 == 1).collect()
}

/// Maximal cliques with at least two vertices by scanning every subset.
pub fn brute_maximal_cliques(g: &NodeGraph) -> BTreeSet<Vec<usize>> {
    let n = g.num_nodes();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 2 || !is_clique(g, mask) {
            continue;
        }
        let extendable = (0..n).any(|v| mask >> v & 1 == 0 && is_clique(g, mask | 1 << v));
        if !extendable {
            out.insert(members(mask));
        }
    }
    out
}

/// Best independent-set weight over all 2^n subsets.
pub fn brute_mwis(g: &WeightedGraph) -> f64 {
    let n = g.len();
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0, |a, &u| a | 1 << u))
        .collect();
    let mut weight = vec![0.0; 1 << n];
    let mut ok = vec![true; 1 << n];
    let mut best: f64 = 0.0;
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        ok[mask] = ok[rest] && adj[low] & rest as u32 == 0;
        weight[mask] = weight[rest] + g.weights()[low];
        if ok[mask] {
            best = best.max(weight[mask]);
        }
    }
    best
}

pub fn random_weighted_graph(n: usize, density: f64, r: &mut impl Rng) -> WeightedGraph {
    let weights: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..10.0)).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(density) {
                edges.push((a, b));
            }
        }
    }
    WeightedGraph::from_parts(weights, &edges).unwrap()
}
