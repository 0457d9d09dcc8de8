//! Offloaded-traffic evaluation.
//!
//! `T` is computed directly from each node's local state. The three-term
//! decomposition `T = T_c + T_n - T_d` is computed separately, term by term,
//! from the cooperator partition of a clustering, so the two routes can be
//! checked against each other.

use serde::Serialize;

use crate::clustering::ClusteringResult;
use crate::error::{Error, Result};
use crate::graph::for_each_combination;
use crate::model::{NodeGraph, NodeId, Scenario};
use crate::placement::Placement;
use crate::workload::PopularityModel;

/// Default cap on the number of placements the exhaustive oracle may visit.
pub const DEFAULT_ORACLE_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficReport {
    pub scheme: String,
    /// Total offloaded traffic, bits/s.
    pub total: f64,
    /// Served by the node itself or its cluster.
    pub cluster_term: f64,
    /// Served by inter-cluster and nonclustered cooperators.
    pub cooperator_term: f64,
    /// Double-counted: available both locally and at such cooperators.
    pub duplicate_term: f64,
    pub per_node: Vec<f64>,
}

impl TrafficReport {
    /// `|T - (T_c + T_n - T_d)| / max(T, eps)`.
    pub fn decomposition_residual(&self) -> f64 {
        let recomposed = self.cluster_term + self.cooperator_term - self.duplicate_term;
        (self.total - recomposed).abs() / self.total.max(f64::EPSILON)
    }
}

/// Evaluates a placement.
///
/// Cooperators come from `g`, or from nobody when the placement has
/// cooperation disabled. The decomposition uses `clustering` when given;
/// otherwise every node is treated as nonclustered.
pub fn offloaded_traffic(
    p: &Placement,
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    clustering: Option<&ClusteringResult>,
    scheme: &str,
) -> Result<TrafficReport> {
    p.check_shape(s)?;
    pop.check_shape(s)?;
    if g.num_nodes() != s.num_nodes {
        return Err(Error::LengthMismatch {
            what: "node graph vs M",
            expected: s.num_nodes,
            got: g.num_nodes(),
        });
    }
    let isolated;
    let graph = if p.cooperation {
        g
    } else {
        isolated = NodeGraph::empty(s.num_nodes);
        &isolated
    };
    let per_node: Vec<f64> = (0..s.num_nodes)
        .map(|m| {
            (0..s.library_size)
                .filter(|&f| p.local_state(graph, m, f))
                .map(|f| s.rates[m] * pop.p(m, f) * s.file_size)
                .sum()
        })
        .collect();
    let total = per_node.iter().sum();

    let fallback;
    let r = match clustering {
        Some(r) if p.cooperation => r,
        _ => {
            fallback = ClusteringResult::unclustered(graph);
            &fallback
        }
    };
    let (cluster_term, cooperator_term, duplicate_term) = decomposition_terms(p, s, pop, r);
    Ok(TrafficReport {
        scheme: scheme.to_string(),
        total,
        cluster_term,
        cooperator_term,
        duplicate_term,
        per_node,
    })
}

/// `1 - prod (1 - x)` over the given nodes.
fn any_cached(p: &Placement, nodes: impl Iterator<Item = NodeId>, f: usize) -> f64 {
    let miss: f64 = nodes
        .map(|o| 1.0 - f64::from(u8::from(p.get(o, f))))
        .product();
    1.0 - miss
}

fn x(p: &Placement, m: NodeId, f: usize) -> f64 {
    f64::from(u8::from(p.get(m, f)))
}

/// Cluster caching decision: `1 - prod_{m in cluster} (1 - x_mf)`.
fn cluster_x(p: &Placement, members: &[NodeId], f: usize) -> f64 {
    any_cached(p, members.iter().copied(), f)
}

/// `(T_c, T_n, T_d)` term by term.
pub fn decomposition_terms(
    p: &Placement,
    s: &Scenario,
    pop: &PopularityModel,
    r: &ClusteringResult,
) -> (f64, f64, f64) {
    let mut tc = 0.0;
    let mut tn = 0.0;
    let mut td = 0.0;
    // clustered nodes
    for cluster in &r.clusters {
        for &m in &cluster.members {
            let part = &r.partition[m];
            let outside = || part.inter.iter().chain(&part.nonclustered).copied();
            for f in 0..s.library_size {
                let demand = s.rates[m] * pop.p(m, f) * s.file_size;
                let xn = cluster_x(p, &cluster.members, f);
                let remote = any_cached(p, outside(), f);
                tc += demand * xn;
                tn += demand * remote;
                td += demand * xn * remote;
            }
        }
    }
    // nonclustered nodes
    for &m in &r.nonclustered {
        let inter = &r.partition[m].inter;
        for f in 0..s.library_size {
            let demand = s.rates[m] * pop.p(m, f) * s.file_size;
            let own = x(p, m, f);
            let remote = any_cached(p, inter.iter().copied(), f);
            tc += demand * own;
            tn += demand * remote;
            td += demand * own * remote;
        }
    }
    (tc, tn, td)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub passed: bool,
    /// Largest local-state mismatch between the partitioned and the direct form.
    pub max_state_residual: f64,
    /// Relative residual of `T = T_c + T_n - T_d`.
    pub traffic_residual: f64,
    /// Whether each node's cooperators split exactly into the three roles.
    pub partition_ok: bool,
}

/// Checks the partitioned local-state identity for every (node, file) and the
/// three-term traffic identity, for an arbitrary placement.
pub fn decomposition_audit(
    p: &Placement,
    r: &ClusteringResult,
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    tolerance: f64,
) -> Result<AuditReport> {
    let mut partition_ok = true;
    for m in 0..s.num_nodes {
        let part = &r.partition[m];
        let mut joined: Vec<NodeId> = part
            .intra
            .iter()
            .chain(&part.inter)
            .chain(&part.nonclustered)
            .copied()
            .collect();
        let total = joined.len();
        joined.sort_unstable();
        joined.dedup();
        partition_ok &= joined.len() == total && joined == g.neighbors(m);
        if r.assignment[m].is_none() {
            partition_ok &= part.intra.is_empty() && part.nonclustered.is_empty();
        }
    }

    let mut max_state_residual: f64 = 0.0;
    for m in 0..s.num_nodes {
        let part = &r.partition[m];
        for f in 0..s.library_size {
            let direct = f64::from(u8::from(p.local_state(g, m, f)));
            let split = match r.cluster_of(m) {
                Some(c) => {
                    let xn = cluster_x(p, &c.members, f);
                    let remote =
                        any_cached(p, part.inter.iter().chain(&part.nonclustered).copied(), f);
                    xn + (1.0 - xn) * remote
                }
                None => {
                    let own = x(p, m, f);
                    own + (1.0 - own) * any_cached(p, part.inter.iter().copied(), f)
                }
            };
            max_state_residual = max_state_residual.max((direct - split).abs());
        }
    }
    let report = offloaded_traffic(p, s, pop, g, Some(r), "audit")?;
    let traffic_residual = report.decomposition_residual();
    Ok(AuditReport {
        passed: partition_ok && max_state_residual <= tolerance && traffic_residual <= tolerance,
        max_state_residual,
        traffic_residual,
        partition_ok,
    })
}

/// Exhaustive maximiser of `T` over all placements with `min(K, F)` files per
/// node. Ties keep the first placement in lexicographic combination order.
pub fn exact_placement_oracle(
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    budget: u128,
) -> Result<(Placement, f64)> {
    pop.check_shape(s)?;
    let k = s.cache_size.min(s.library_size);
    let per_node = binomial(s.library_size, k);
    let total = per_node
        .checked_pow(s.num_nodes as u32)
        .unwrap_or(u128::MAX);
    if total > budget {
        return Err(Error::OracleLimit {
            size: total,
            limit: budget,
        });
    }
    let mut combos: Vec<Vec<usize>> = Vec::new();
    for_each_combination(s.library_size, k, |c| combos.push(c.to_vec()));

    let mut choice = vec![0usize; s.num_nodes];
    let mut p = Placement::empty(s.num_nodes, s.library_size, true);
    for m in 0..s.num_nodes {
        for &f in &combos[0] {
            p.set(m, f, true);
        }
    }
    let mut best = (p.clone(), f64::NEG_INFINITY);
    loop {
        let t = traffic_only(&p, s, pop, g);
        if t > best.1 {
            best = (p.clone(), t);
        }
        // odometer over nodes, last node fastest
        let mut m = s.num_nodes;
        loop {
            if m == 0 {
                return Ok(best);
            }
            m -= 1;
            for &f in &combos[choice[m]] {
                p.set(m, f, false);
            }
            choice[m] = (choice[m] + 1) % combos.len();
            for &f in &combos[choice[m]] {
                p.set(m, f, true);
            }
            if choice[m] != 0 {
                break;
            }
        }
    }
}

fn traffic_only(p: &Placement, s: &Scenario, pop: &PopularityModel, g: &NodeGraph) -> f64 {
    (0..s.num_nodes)
        .map(|m| {
            (0..s.library_size)
                .filter(|&f| p.local_state(g, m, f))
                .map(|f| s.rates[m] * pop.p(m, f) * s.file_size)
                .sum::<f64>()
        })
        .sum()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
