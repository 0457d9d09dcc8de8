//! Cluster selection: candidate weighting by incremental offloaded traffic,
//! disjoint cluster choice through the weighted overlap graph, and the popular
//! file sets that follow from a clustering.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    build_weighted_graph, enumerate_complete_subgraphs, exact_mwis, greedy_mwis,
    greedy_mwis_single_start, maximal_cliques,
};
use crate::model::{build_node_graph, FileId, NodeGraph, NodeId, Scenario};
use crate::workload::{top_k, top_k_sum, PopularityModel};

/// A complete subgraph considered (or chosen) as a cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCluster {
    pub members: Vec<NodeId>,
    /// Pooled storage `S_n * K`, in files. May exceed F.
    pub capacity: usize,
    #[serde(skip)]
    pub popularity: Vec<f64>,
    /// Incremental offloaded traffic, bits/s.
    pub weight: f64,
}

impl CandidateCluster {
    pub fn new(members: Vec<NodeId>, s: &Scenario, pop: &PopularityModel) -> Result<Self> {
        let popularity = cluster_popularity(&members, pop)?;
        let weight = incremental_traffic(&members, s, pop)?;
        Ok(Self {
            capacity: members.len() * s.cache_size,
            members,
            popularity,
            weight,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Rate-weighted mean of the members' popularity rows.
pub fn cluster_popularity(members: &[NodeId], pop: &PopularityModel) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let w = pop.weights();
    let total: f64 = members.iter().map(|&m| w[m]).sum();
    let mut out = vec![0.0; pop.library_size()];
    for &m in members {
        let share = w[m] / total;
        for (acc, p) in out.iter_mut().zip(pop.row(m)) {
            *acc += p * share;
        }
    }
    Ok(out)
}

/// Traffic the cluster offloads by pooling storage, beyond its members each
/// caching their own top-K.
///
/// Prefix sums are clamped at F when the pooled capacity exceeds the library.
pub fn incremental_traffic(members: &[NodeId], s: &Scenario, pop: &PopularityModel) -> Result<f64> {
    let own: Vec<f64> = members
        .iter()
        .map(|&m| top_k_sum(pop.row(m), s.cache_size))
        .collect();
    incremental_with_own(members, s, pop, &own)
}

fn incremental_with_own(
    members: &[NodeId],
    s: &Scenario,
    pop: &PopularityModel,
    own_top: &[f64],
) -> Result<f64> {
    let pooled = top_k_sum(
        &cluster_popularity(members, pop)?,
        members.len() * s.cache_size,
    );
    Ok(members
        .iter()
        .zip(own_top)
        .map(|(&m, own)| s.rates[m] * (pooled - own) * s.file_size)
        .sum())
}

/// How a node's cooperators split relative to the chosen clusters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CooperatorPartition {
    /// Cooperators in the node's own cluster.
    pub intra: Vec<NodeId>,
    /// Cooperators in other clusters. For a nonclustered node this holds all
    /// of its cooperators.
    pub inter: Vec<NodeId>,
    /// Nonclustered cooperators of a clustered node.
    pub nonclustered: Vec<NodeId>,
}

/// Chosen disjoint clusters and the induced node roles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub clusters: Vec<CandidateCluster>,
    pub nonclustered: Vec<NodeId>,
    pub partition: Vec<CooperatorPartition>,
    /// Cluster index of each node.
    pub assignment: Vec<Option<usize>>,
    /// Sum of the chosen clusters' incremental traffic, bits/s.
    pub objective: f64,
    /// Number of candidate complete subgraphs before pruning.
    pub num_candidates: usize,
}

impl ClusteringResult {
    /// Assembles a result from an explicit disjoint cluster family.
    ///
    /// Every cluster must be a clique of `g` with at least two members.
    pub fn from_clusters(
        clusters: Vec<CandidateCluster>,
        g: &NodeGraph,
        num_candidates: usize,
    ) -> Result<Self> {
        let n = g.num_nodes();
        let mut clusters = clusters;
        for c in &mut clusters {
            c.members.sort_unstable();
        }
        clusters.sort_by(|a, b| a.members.cmp(&b.members));
        let mut assignment = vec![None; n];
        for (ci, c) in clusters.iter().enumerate() {
            if c.members.len() < 2 {
                return Err(Error::Experiment(
                    "clusters need at least two members".into(),
                ));
            }
            for (i, &m) in c.members.iter().enumerate() {
                if m >= n {
                    return Err(Error::NodeOutOfRange { id: m, count: n });
                }
                if assignment[m].replace(ci).is_some() {
                    return Err(Error::Experiment(format!("node {m} is in two clusters")));
                }
                if c.members[..i].iter().any(|&o| !g.has_edge(o, m)) {
                    return Err(Error::Experiment(format!(
                        "cluster {:?} is not a clique",
                        c.members
                    )));
                }
            }
        }
        let nonclustered = (0..n).filter(|&m| assignment[m].is_none()).collect();
        let partition = (0..n)
            .map(|m| {
                let mut p = CooperatorPartition::default();
                for &o in g.neighbors(m) {
                    match (assignment[m], assignment[o]) {
                        (Some(a), Some(b)) if a == b => p.intra.push(o),
                        (Some(_), None) => p.nonclustered.push(o),
                        _ => p.inter.push(o),
                    }
                }
                p
            })
            .collect();
        let objective = clusters.iter().map(|c| c.weight).sum();
        Ok(Self {
            clusters,
            nonclustered,
            partition,
            assignment,
            objective,
            num_candidates,
        })
    }

    /// No clusters: every node is nonclustered.
    pub fn unclustered(g: &NodeGraph) -> Self {
        Self::from_clusters(Vec::new(), g, 0).expect("empty family is valid")
    }

    pub fn cluster_of(&self, m: NodeId) -> Option<&CandidateCluster> {
        self.assignment[m].map(|c| &self.clusters[c])
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }
}

/// Strategy for picking disjoint candidates from the weighted graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterSelector {
    /// Greedy with every vertex tried as the seed.
    #[default]
    MultiStart,
    /// Greedy seeded only at the heaviest candidate.
    SingleStart,
    /// Exhaustive search, bounded by the given candidate count.
    Exact(usize),
}

/// Runs the whole clustering pipeline on a freshly built node graph.
pub fn solve_clustering(s: &Scenario, pop: &PopularityModel) -> Result<ClusteringResult> {
    solve_clustering_on(s, pop, &build_node_graph(s), ClusterSelector::MultiStart)
}

/// Clustering over a given node graph with a chosen selector.
pub fn solve_clustering_on(
    s: &Scenario,
    pop: &PopularityModel,
    g: &NodeGraph,
    selector: ClusterSelector,
) -> Result<ClusteringResult> {
    pop.check_shape(s)?;
    let cliques = maximal_cliques(g);
    let candidates = enumerate_complete_subgraphs(&cliques, s.cluster_size_cap)?;
    let own_top: Vec<f64> = (0..s.num_nodes)
        .map(|m| top_k_sum(pop.row(m), s.cache_size))
        .collect();
    let weights = candidates
        .par_iter()
        .map(|c| {
            let own: Vec<f64> = c.iter().map(|&m| own_top[m]).collect();
            incremental_with_own(c, s, pop, &own)
        })
        .collect::<Result<Vec<f64>>>()?;
    let wg = build_weighted_graph(&candidates, &weights)?;
    let chosen = match selector {
        ClusterSelector::MultiStart => greedy_mwis(&wg),
        ClusterSelector::SingleStart => greedy_mwis_single_start(&wg),
        ClusterSelector::Exact(limit) => exact_mwis(&wg, limit)?,
    };
    let clusters = chosen
        .vertices
        .iter()
        .map(|&v| CandidateCluster::new(wg.vertices()[v].clone(), s, pop))
        .collect::<Result<Vec<_>>>()?;
    ClusteringResult::from_clusters(clusters, g, candidates.len())
}

/// Most popular files per cluster and per nonclustered node, in rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PopularSets {
    /// Top `min(K_n, F)` files of each chosen cluster.
    pub cluster: Vec<Vec<FileId>>,
    /// Top `min(K, F)` files of each nonclustered node; `None` for clustered
    /// nodes.
    pub node: Vec<Option<Vec<FileId>>>,
}

impl PopularSets {
    /// The popular set a node contributes to: its cluster's or its own.
    pub fn for_node(&self, r: &ClusteringResult, m: NodeId) -> &[FileId] {
        match r.assignment[m] {
            Some(c) => &self.cluster[c],
            None => self.node[m].as_deref().unwrap_or(&[]),
        }
    }
}

/// Top-`K_n` cluster files and top-`K` nonclustered-node files, ties to the
/// lower file id.
pub fn popular_file_sets(r: &ClusteringResult, pop: &PopularityModel, s: &Scenario) -> PopularSets {
    let cluster = r
        .clusters
        .iter()
        .map(|c| top_k(&c.popularity, c.capacity))
        .collect();
    let node = (0..r.num_nodes())
        .map(|m| {
            r.assignment[m]
                .is_none()
                .then(|| top_k(pop.row(m), s.cache_size))
        })
        .collect();
    PopularSets { cluster, node }
}

/// Closed form of the traffic served by each node's own storage or its
/// cluster when clusters cache their top files: the incremental traffic of
/// the clusters plus every node's top-K traffic.
pub fn cluster_traffic_closed_form(
    r: &ClusteringResult,
    s: &Scenario,
    pop: &PopularityModel,
) -> f64 {
    let own: f64 = (0..s.num_nodes)
        .map(|m| s.rates[m] * top_k_sum(pop.row(m), s.cache_size) * s.file_size)
        .sum();
    r.objective + own
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioTemplate;
    use crate::workload::scenario_popularity;

    fn line_scenario(rates: Vec<f64>, f: usize, k: usize, gamma_d: f64) -> Scenario {
        let m = rates.len();
        Scenario {
            num_nodes: m,
            library_size: f,
            cache_size: k,
            file_size: 1.0,
            positions: (0..m).map(|i| [i as f64 * 10.0, 0.0]).collect(),
            rates,
            gamma_d,
            gamma_l: 0.0,
            zipf_z: 0.0,
            seed: 0,
            cluster_size_cap: 5,
            locality: 0.0,
        }
    }

    fn pop(rows: Vec<Vec<f64>>, rates: &[f64]) -> PopularityModel {
        PopularityModel::from_local(rows, rates).unwrap()
    }

    #[test]
    fn single_member_popularity_is_its_row() {
        let p = pop(vec![vec![0.7, 0.3], vec![0.1, 0.9]], &[1.0, 3.0]);
        assert_eq!(cluster_popularity(&[1], &p).unwrap(), vec![0.1, 0.9]);
        assert!(matches!(
            cluster_popularity(&[], &p),
            Err(Error::EmptyCluster)
        ));
    }

    #[test]
    fn equal_weight_pair_averages() {
        let p = pop(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[2.0, 2.0]);
        assert_eq!(cluster_popularity(&[0, 1], &p).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_pair_increment() {
        let s = line_scenario(vec![1.0, 1.0], 4, 1, 10.0);
        let p = pop(vec![vec![0.25; 4]; 2], &s.rates);
        let t = incremental_traffic(&[0, 1], &s, &p).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert_eq!(incremental_traffic(&[0], &s, &p).unwrap(), 0.0);
    }

    #[test]
    fn pooled_capacity_clamps_at_library_size() {
        let s = line_scenario(vec![1.0, 1.0, 1.0], 4, 2, 10.0);
        let p = pop(vec![vec![0.25; 4]; 3], &s.rates);
        // K_n = 6 > F = 4: the pooled sum is 1
        let t = incremental_traffic(&[0, 1, 2], &s, &p).unwrap();
        assert!((t - 3.0 * (1.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn no_edges_no_clusters() {
        let s = line_scenario(vec![1.0, 2.0, 3.0], 4, 1, 5.0);
        let p = scenario_popularity(&s).unwrap();
        let r = solve_clustering(&s, &p).unwrap();
        assert!(r.clusters.is_empty());
        assert_eq!(r.nonclustered, vec![0, 1, 2]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn disjoint_pairs_both_chosen() {
        let mut s = line_scenario(vec![1.0, 2.0, 3.0, 4.0], 4, 1, 10.0);
        s.positions = vec![[0.0, 0.0], [5.0, 0.0], [100.0, 0.0], [105.0, 0.0]];
        let p = pop(
            vec![
                vec![0.7, 0.1, 0.1, 0.1],
                vec![0.1, 0.7, 0.1, 0.1],
                vec![0.1, 0.1, 0.7, 0.1],
                vec![0.1, 0.1, 0.1, 0.7],
            ],
            &s.rates,
        );
        let r = solve_clustering(&s, &p).unwrap();
        let members: Vec<_> = r.clusters.iter().map(|c| c.members.clone()).collect();
        assert_eq!(members, vec![vec![0, 1], vec![2, 3]]);
        assert!(r.nonclustered.is_empty());
        assert!(r.clusters.iter().all(|c| c.weight > 0.0));
    }

    #[test]
    fn partition_roles() {
        // 0-1 clustered, 2 nonclustered next to 1, 3 alone next to 2
        let g = NodeGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let s = line_scenario(vec![1.0, 2.0, 3.0, 4.0], 4, 1, 10.0);
        let p = scenario_popularity(&s).unwrap();
        let c = CandidateCluster::new(vec![0, 1], &s, &p).unwrap();
        let r = ClusteringResult::from_clusters(vec![c], &g, 1).unwrap();
        assert_eq!(r.partition[1].intra, vec![0]);
        assert_eq!(r.partition[1].nonclustered, vec![2]);
        assert!(r.partition[1].inter.is_empty());
        assert_eq!(r.partition[2].inter, vec![1, 3]);
        assert!(r.partition[2].intra.is_empty() && r.partition[2].nonclustered.is_empty());
        assert_eq!(r.nonclustered, vec![2, 3]);
    }

    #[test]
    fn from_clusters_rejects_overlap_and_non_cliques() {
        let g = NodeGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let s = line_scenario(vec![1.0, 2.0, 3.0], 4, 1, 10.0);
        let p = scenario_popularity(&s).unwrap();
        let a = CandidateCluster::new(vec![0, 1], &s, &p).unwrap();
        let b = CandidateCluster::new(vec![1, 2], &s, &p).unwrap();
        assert!(ClusteringResult::from_clusters(vec![a, b], &g, 2).is_err());
        let c = CandidateCluster::new(vec![0, 2], &s, &p).unwrap();
        assert!(ClusteringResult::from_clusters(vec![c], &g, 1).is_err());
    }

    #[test]
    fn uniform_popular_sets_tie_break() {
        let s = line_scenario(vec![1.0], 4, 2, 10.0);
        let p = pop(vec![vec![0.25; 4]], &s.rates);
        let g = build_node_graph(&s);
        let r = ClusteringResult::unclustered(&g);
        let sets = popular_file_sets(&r, &p, &s);
        assert_eq!(sets.node[0], Some(vec![0, 1]));
    }

    #[test]
    fn cluster_popular_set_uses_pooled_capacity() {
        let s = line_scenario(vec![1.0, 1.0], 3, 1, 10.0);
        let p = pop(vec![vec![0.5, 0.3, 0.2]; 2], &s.rates);
        let g = build_node_graph(&s);
        let c = CandidateCluster::new(vec![0, 1], &s, &p).unwrap();
        let r = ClusteringResult::from_clusters(vec![c], &g, 1).unwrap();
        let sets = popular_file_sets(&r, &p, &s);
        assert_eq!(sets.cluster[0], vec![0, 1]);
        assert_eq!(sets.node, vec![None, None]);
        assert_eq!(sets.for_node(&r, 1), &[0, 1]);
    }

    #[test]
    fn multi_start_never_below_single_start() {
        let t = ScenarioTemplate {
            num_nodes: 12,
            library_size: 60,
            cache_size: 3,
            gamma_d: 25.0,
            ..ScenarioTemplate::default()
        };
        for seed in 0..10 {
            let s = t.instantiate(seed).unwrap();
            let p = scenario_popularity(&s).unwrap();
            let g = build_node_graph(&s);
            let multi = solve_clustering_on(&s, &p, &g, ClusterSelector::MultiStart).unwrap();
            let single = solve_clustering_on(&s, &p, &g, ClusterSelector::SingleStart).unwrap();
            assert!(multi.objective >= single.objective - 1e-9 * single.objective.abs());
        }
    }
}
