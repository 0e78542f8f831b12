use std::collections::HashSet;

use banyan_core::graph::UnionFind;
use banyan_core::hierarchy::NetHierarchy;
use banyan_core::sparsifier::{heavy_ball_scan, merge_solutions, sparsify, sparsity_ratio, SparsifyParams};
use banyan_core::{ForestSolution, PointSet, TerminalPair, WeightedGraph};

/// Eleven grid points packed within radius 2, a complete graph on them, and one
/// far point hanging off the cluster.
fn cluster_and_far() -> (PointSet, WeightedGraph) {
    let mut coords = Vec::new();
    for x in 0..4 {
        for y in 0..3 {
            if (x, y) != (3, 2) {
                coords.push(vec![x as f64, y as f64]);
            }
        }
    }
    coords.push(vec![100.0, 0.0]);
    let n = coords.len();
    let p = PointSet::euclidean(2, &coords, vec![true; n]).unwrap().normalized().unwrap();
    let mut pairs = Vec::new();
    for a in 0..11 {
        for b in a + 1..11 {
            if p.dist(a, b) < 1.5 {
                pairs.push((a, b));
            }
        }
    }
    let corner = 9; // (3, 1)
    pairs.push((corner, 11));
    let ids: Vec<usize> = (0..n).collect();
    (p.clone(), WeightedGraph::from_pairs(&p, &ids, &pairs))
}

fn path_solution(g: &WeightedGraph, pairs: &[TerminalPair]) -> ForestSolution {
    let mut edges = Vec::new();
    for &(a, b) in pairs {
        let (_, path) = g.shortest_path(a, b).unwrap();
        for w in path.windows(2) {
            let e = g.edges().iter().find(|e| e.key() == (w[0].min(w[1]), w[0].max(w[1]))).unwrap();
            edges.push(*e);
        }
    }
    ForestSolution::from_edges(edges)
}

fn connected_by_union_find(f: &ForestSolution, a: usize, b: usize, n: usize) -> bool {
    let mut uf = UnionFind::new(n);
    for e in &f.edges {
        uf.union(e.u, e.v);
    }
    uf.same(a, b)
}

#[test]
fn dense_cluster_is_found_at_a_low_level() {
    let (p, g) = cluster_and_far();
    let h = NetHierarchy::build(&p).unwrap();
    let ball = heavy_ball_scan(&g, &h, &p, 4.0).expect("heavy");
    assert!(ball.level <= 1, "{ball:?}");
    assert!(ball.weight > 4.0 * 2f64.powi(ball.level as i32));
}

#[test]
fn straddling_pair_is_rewired_through_the_center() {
    let (p, g) = cluster_and_far();
    let h = NetHierarchy::build(&p).unwrap();
    let out = sparsify(&g, &h, &p, &[(0, 11)], &SparsifyParams::new(64.0)).unwrap();
    assert_eq!(out.subproblems.len(), 2);
    let c = out.events[0].center;
    let (residual, piece) = (&out.subproblems[0], &out.subproblems[1]);
    assert!(!residual.graph.contains(0));
    assert_eq!(residual.terminals, vec![(11, c)]);
    assert_eq!(piece.terminals, vec![(0, c)]);
    assert!(residual.graph.contains(c) && piece.graph.contains(c));
    assert!(out.patch_weight > 0.0);

    let sols: Vec<ForestSolution> = out.subproblems.iter().map(|s| path_solution(&s.graph, &s.terminals)).collect();
    let merged = merge_solutions(&sols, &out.subproblems, &[(0, 11)]).unwrap();
    assert!(connected_by_union_find(&merged, 0, 11, p.len()));
    let sum: f64 = sols.iter().map(|s| s.total_weight).sum();
    assert!(merged.total_weight <= sum + 1e-9);
}

#[test]
fn merge_reports_the_violating_pair() {
    let (p, g) = cluster_and_far();
    let h = NetHierarchy::build(&p).unwrap();
    let out = sparsify(&g, &h, &p, &[(0, 11)], &SparsifyParams::new(64.0)).unwrap();
    let sols = vec![ForestSolution::empty(); out.subproblems.len()];
    let err = merge_solutions(&sols, &out.subproblems, &[(0, 11)]).unwrap_err();
    assert!(matches!(err, banyan_core::Error::TerminalDisconnected(..)));
}

#[test]
fn pieces_are_sparse_and_terminals_live_in_their_graphs() {
    let (p, g) = cluster_and_far();
    let h = NetHierarchy::build(&p).unwrap();
    let q = 32.0;
    let out = sparsify(&g, &h, &p, &[(0, 11), (2, 5), (10, 1)], &SparsifyParams::new(q)).unwrap();
    for s in &out.subproblems {
        assert!(s.graph.is_connected());
        let vs: HashSet<usize> = s.graph.vertices().iter().copied().collect();
        assert!(s.terminals.iter().all(|(a, b)| vs.contains(a) && vs.contains(b)));
        assert!(sparsity_ratio(&s.graph, &h, &p) <= q);
    }
}
