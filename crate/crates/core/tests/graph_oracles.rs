mod common;

use std::collections::BTreeSet;

use coopcache::graph::{
    build_weighted_graph, enumerate_complete_subgraphs, exact_mwis, greedy_mwis,
    greedy_mwis_single_start, maximal_cliques, WeightedGraph,
};
use coopcache::model::NodeGraph;
use rand::Rng;

use common::{
    brute_maximal_cliques, brute_mwis, is_clique, members, random_graph, random_weighted_graph, rng,
};

fn brute_complete_subgraphs(g: &NodeGraph, cap: usize) -> BTreeSet<Vec<usize>> {
    (1u32..(1 << g.num_nodes()))
        .filter(|&m| (2..=cap as u32).contains(&m.count_ones()) && is_clique(g, m))
        .map(members)
        .collect()
}

#[test]
fn maximal_cliques_match_subset_scan() {
    let mut r = rng(11);
    for trial in 0..60 {
        let n = r.gen_range(1..=12);
        let density = [0.2, 0.5, 0.8][trial % 3];
        let g = random_graph(n, density, &mut r);
        let got = maximal_cliques(&g);
        let want: Vec<Vec<usize>> = brute_maximal_cliques(&g).into_iter().collect();
        assert_eq!(got, want, "graph {:?}", g.edges());
    }
}

#[test]
fn complete_subgraphs_match_subset_filter() {
    let mut r = rng(12);
    for trial in 0..40 {
        let n = r.gen_range(2..=10);
        let g = random_graph(n, [0.3, 0.6, 0.9][trial % 3], &mut r);
        let got = enumerate_complete_subgraphs(&maximal_cliques(&g), 4).unwrap();
        let as_set: BTreeSet<Vec<usize>> = got.iter().cloned().collect();
        assert_eq!(as_set.len(), got.len(), "duplicates in output");
        assert_eq!(as_set, brute_complete_subgraphs(&g, 4));
    }
}

#[test]
fn weighted_edges_match_pairwise_intersection() {
    let mut r = rng(13);
    for _ in 0..30 {
        let g = random_graph(r.gen_range(3..=9), 0.6, &mut r);
        let cands = enumerate_complete_subgraphs(&maximal_cliques(&g), 4).unwrap();
        let weights: Vec<f64> = cands.iter().map(|_| r.gen_range(-1.0..5.0)).collect();
        let wg = build_weighted_graph(&cands, &weights).unwrap();
        let kept: Vec<(Vec<usize>, f64)> = cands
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(c, &w)| (c.clone(), w))
            .collect();
        assert_eq!(wg.len(), kept.len());
        let mut want = Vec::new();
        for i in 0..kept.len() {
            assert_eq!(wg.vertices()[i], kept[i].0);
            assert_eq!(wg.weights()[i], kept[i].1);
            for j in i + 1..kept.len() {
                if kept[i].0.iter().any(|v| kept[j].0.contains(v)) {
                    want.push((i, j));
                }
            }
        }
        assert_eq!(wg.edges(), want);
    }
}

#[test]
fn greedy_and_exact_against_subset_scan() {
    let mut r = rng(14);
    for trial in 0..50 {
        let n = r.gen_range(1..=16);
        let g = random_weighted_graph(n, [0.15, 0.35, 0.6][trial % 3], &mut r);
        let opt = brute_mwis(&g);
        let exact = exact_mwis(&g, 20).unwrap();
        let multi = greedy_mwis(&g);
        let single = greedy_mwis_single_start(&g);
        for sel in [&exact, &multi, &single] {
            assert!(g.is_independent(&sel.vertices));
            assert!((g.set_weight(&sel.vertices) - sel.weight).abs() < 1e-9);
        }
        assert!((exact.weight - opt).abs() <= 1e-9 * opt.max(1.0));
        assert!(multi.weight <= opt + 1e-9);
        assert!(multi.weight >= single.weight);
    }
}

#[test]
fn multi_start_escapes_heavy_seed() {
    // h0 is heaviest and touches h3..h7; h3 and h4 knock out h1 and h2.
    let mut weights = vec![10.0, 5.0, 5.0];
    weights.extend([6.0; 5]);
    let mut edges: Vec<(usize, usize)> = (3..8).map(|v| (0, v)).collect();
    edges.extend([(1, 3), (2, 4)]);
    let g = WeightedGraph::from_parts(weights, &edges).unwrap();
    let single = greedy_mwis_single_start(&g);
    assert_eq!(single.vertices, vec![0, 1, 2]);
    assert_eq!(single.weight, 20.0);
    let multi = greedy_mwis(&g);
    assert_eq!(multi.vertices, vec![3, 4, 5, 6, 7]);
    assert_eq!(multi.weight, 30.0);
    assert_eq!(exact_mwis(&g, 20).unwrap().weight, 30.0);
}

#[test]
fn greedy_is_deterministic() {
    let mut r = rng(15);
    let g = random_weighted_graph(14, 0.3, &mut r);
    assert_eq!(greedy_mwis(&g), greedy_mwis(&g));
}
