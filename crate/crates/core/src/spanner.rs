//! Greedy light spanners and net-respecting rerouting.

use std::collections::{BTreeSet, BinaryHeap};
use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::graph::{edge_order, Edge, WeightedGraph};
use crate::hierarchy::NetHierarchy;
use crate::metric::{PointId, PointSet, SpatialIndex};
use crate::oracles;

/// Which candidate pairs the greedy spanner considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpannerMode {
    /// Every pair of points.
    Exact,
    /// Pairs of same-level net points at distance `O(2^i / eps)`.
    Accelerated,
    /// Exact up to `AUTO_EXACT_LIMIT` points, accelerated beyond.
    Auto,
}

pub const AUTO_EXACT_LIMIT: usize = 700;

/// Greedy `(1+eps)`-spanner over every point of `points`.
pub fn greedy_spanner(points: &PointSet, eps: f64) -> Result<WeightedGraph> {
    let ids: Vec<_> = points.ids().collect();
    greedy_spanner_over(points, &ids, eps, SpannerMode::Auto)
}

/// Greedy spanner over a subset. Candidates are scanned in nondecreasing
/// `(weight, min id, max id)` order and an edge is kept whenever the current
/// spanner distance exceeds `(1+eps)` times its length.
pub fn greedy_spanner_over(points: &PointSet, ids: &[PointId], eps: f64, mode: SpannerMode) -> Result<WeightedGraph> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("spanner eps {eps} must lie in (0,1)")));
    }
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut g = WeightedGraph::new(&ids);
    if ids.len() < 2 {
        return Ok(g);
    }
    let exact = match mode {
        SpannerMode::Exact => true,
        SpannerMode::Accelerated => false,
        SpannerMode::Auto => ids.len() <= AUTO_EXACT_LIMIT,
    };
    let candidates = if exact {
        all_pairs(points, &ids)
    } else {
        hierarchy_pairs(points, &ids, eps)?
    };
    if ids.len() <= DENSE_CACHE_LIMIT {
        greedy_with_cache(&mut g, candidates, eps);
        return Ok(g);
    }
    greedy_with_sparse_cache(&mut g, candidates, eps);
    Ok(g)
}

/// Same scan as `greedy_with_cache` with the bounds kept per vertex in hash
/// maps, holding only what bounded searches reached.
fn greedy_with_sparse_cache(g: &mut WeightedGraph, candidates: Vec<Edge>, eps: f64) {
    let n = g.num_vertices();
    let mut upper: Vec<HashMap<u32, f64>> = vec![HashMap::default(); n];
    let mut dist = vec![f64::INFINITY; n];
    let mut touched = Vec::new();
    for e in candidates {
        let bound = (1.0 + eps) * e.w;
        let (a, b) = (g.local(e.u).expect("vertex"), g.local(e.v).expect("vertex"));
        if upper[a].get(&(b as u32)).is_some_and(|&u| u <= bound) {
            continue;
        }
        g.dijkstra_scratch(a, bound, &mut dist, &mut touched);
        let reached = dist[b];
        for &x in &touched {
            let d = dist[x];
            if x != a {
                let ea = upper[a].entry(x as u32).or_insert(f64::INFINITY);
                *ea = ea.min(d);
                let ex = upper[x].entry(a as u32).or_insert(f64::INFINITY);
                *ex = ex.min(d);
            }
            dist[x] = f64::INFINITY;
        }
        touched.clear();
        if reached > bound {
            g.add_edge(e.u, e.v, e.w);
            upper[a].insert(b as u32, e.w);
            upper[b].insert(a as u32, e.w);
        }
    }
}

/// Largest vertex count for which the greedy scan keeps a dense matrix of
/// spanner-distance upper bounds.
const DENSE_CACHE_LIMIT: usize = 3000;

/// Greedy scan that skips a candidate whenever a cached upper bound on its
/// spanner distance already meets the stretch target. Distances only shrink as
/// edges are added, so cached values stay valid upper bounds; a candidate that
/// is not skipped gets an exact bounded search from its first endpoint, whose
/// results refresh that endpoint's row.
fn greedy_with_cache(g: &mut WeightedGraph, candidates: Vec<Edge>, eps: f64) {
    let n = g.num_vertices();
    let mut upper = vec![f64::INFINITY; n * n];
    for k in 0..n {
        upper[k * n + k] = 0.0;
    }
    for e in candidates {
        let bound = (1.0 + eps) * e.w;
        let (a, b) = (g.local(e.u).expect("vertex"), g.local(e.v).expect("vertex"));
        if upper[a * n + b] <= bound {
            continue;
        }
        let dist = g.dijkstra_local(e.u, bound);
        for (x, &d) in dist.iter().enumerate() {
            if d < upper[a * n + x] {
                upper[a * n + x] = d;
                upper[x * n + a] = d;
            }
        }
        if dist[b] > bound {
            g.add_edge(e.u, e.v, e.w);
            upper[a * n + b] = e.w;
            upper[b * n + a] = e.w;
        }
    }
}

fn all_pairs(points: &PointSet, ids: &[PointId]) -> Vec<Edge> {
    let mut out = Vec::with_capacity(ids.len() * (ids.len() - 1) / 2);
    for (k, &a) in ids.iter().enumerate() {
        for &b in &ids[k + 1..] {
            out.push(Edge::new(a, b, points.dist(a, b)));
        }
    }
    out.sort_by(edge_order);
    out
}

/// Net-tree candidate pairs: at level `i`, pairs of `H_i` points at distance in
/// `(c 2^(i-1), c 2^i]` with `c = 4 + 8/eps` (all pairs within `c` at level 0).
fn hierarchy_pairs(points: &PointSet, ids: &[PointId], eps: f64) -> Result<Vec<Edge>> {
    let h = NetHierarchy::build_over(points, ids)?;
    let c = 4.0 + 8.0 / eps;
    let mut out = Vec::new();
    for i in 0..h.num_levels() {
        let hi = c * (2.0f64).powi(i as i32);
        let lo = if i == 0 { 0.0 } else { hi / 2.0 };
        let level = h.level(i);
        let index = SpatialIndex::new(points, level, hi);
        for &a in level {
            index.for_each_within(points, a, hi, |b, d| {
                if a < b && d > lo {
                    out.push(Edge::new(a, b, d));
                }
            });
        }
    }
    out.sort_by(edge_order);
    out.dedup_by(|x, y| x.key() == y.key());
    Ok(out)
}

/// Level whose nets an edge of length `len` must respect: the `i` with
/// `2^i <= delta * len < 2^(i+1)`; lengths with `delta * len < 1` map below zero.
pub fn respect_level(len: f64, delta: f64) -> i64 {
    (delta * len).log2().floor() as i64
}

/// True if both endpoints lie in the net matched to the edge length.
pub fn edge_respects(e: &Edge, h: &NetHierarchy, delta: f64) -> bool {
    let i = respect_level(e.w, delta);
    h.in_level(e.u, i) && h.in_level(e.v, i)
}

/// Documented stretch constant for rerouting: every input edge is replaced by a
/// path of length at most `(1 + c delta) d(x, y)`.
pub fn reroute_constant(delta: f64) -> f64 {
    4.0 / (1.0 - 2.0 * delta)
}

/// Reroutes `g` so every edge is `delta`-net-respecting with respect to `h`.
///
/// Edges are processed shortest first. A violating edge `(x, y)` is replaced by
/// the edge between the level-`i` ancestors of `x` and `y` (itself re-queued,
/// since it may need a coarser level) plus the two ancestor chains, whose edges
/// are net-respecting by construction.
pub fn make_net_respecting(g: &WeightedGraph, h: &NetHierarchy, points: &PointSet, delta: f64) -> Result<WeightedGraph> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::InvalidParameter(format!("delta {delta} must lie in (0, 1/4)")));
    }
    let mut out = WeightedGraph::new(&g.sorted_vertices());
    let mut queue: BinaryHeap<std::cmp::Reverse<OrdEdge>> =
        g.edges().iter().map(|&e| std::cmp::Reverse(OrdEdge(e))).collect();
    let mut seen: BTreeSet<(PointId, PointId)> = BTreeSet::new();
    while let Some(std::cmp::Reverse(OrdEdge(e))) = queue.pop() {
        if !seen.insert(e.key()) {
            continue;
        }
        let i = respect_level(e.w, delta);
        if edge_respects(&e, h, delta) {
            out.add_edge(e.u, e.v, e.w);
            continue;
        }
        let i = i.max(0) as usize;
        let mut ends = [e.u, e.v];
        for end in ends.iter_mut() {
            let chain = h.ancestor_chain(points, *end, i);
            for w in chain.windows(2) {
                out.add_edge(w[0], w[1], points.dist(w[0], w[1]));
            }
            *end = *chain.last().unwrap();
        }
        if ends[0] != ends[1] {
            let ne = Edge::new(ends[0], ends[1], points.dist(ends[0], ends[1]));
            if out.has_edge(ne.u, ne.v) {
                continue;
            }
            seen.remove(&ne.key());
            queue.push(std::cmp::Reverse(OrdEdge(ne)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdEdge(Edge);

impl Eq for OrdEdge {}

impl Ord for OrdEdge {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        edge_order(&self.0, &other.0)
    }
}

impl PartialOrd for OrdEdge {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Maximum stretch over all vertex pairs and lightness relative to the MST of
/// the graph's vertex set.
pub fn measure_stretch_lightness(g: &WeightedGraph, points: &PointSet) -> Result<(f64, f64)> {
    let vs = g.sorted_vertices();
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut worst = 1.0f64;
    for &a in &vs {
        let dist = g.dijkstra_local(a, f64::INFINITY);
        for &b in &vs {
            if b <= a {
                continue;
            }
            let k = g.local(b).unwrap();
            worst = worst.max(dist[k] / points.dist(a, b));
        }
    }
    let mst = oracles::mst_weight(&vs, points);
    let lightness = if mst > 0.0 { g.weight() / mst } else { 1.0 };
    Ok((worst, lightness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::line;

    fn triangle() -> PointSet {
        let s = 3f64.sqrt() / 2.0;
        PointSet::euclidean(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s]], vec![true; 3])
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn triangle_keeps_every_edge() {
        let g = greedy_spanner(&triangle(), 0.1).unwrap();
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn two_points() {
        let g = greedy_spanner(&line(2).normalized().unwrap(), 0.5).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn eps_out_of_range() {
        assert!(greedy_spanner(&line(3).normalized().unwrap(), 1.0).is_err());
    }

    #[test]
    fn collinear_complete_graph_lightness() {
        let p = line(3).normalized().unwrap();
        let g = WeightedGraph::from_pairs(&p, &[0, 1, 2], &[(0, 1), (1, 2), (0, 2)]);
        let (s, l) = measure_stretch_lightness(&g, &p).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(l, 2.0);
        let mst = WeightedGraph::from_pairs(&p, &[0, 1, 2], &[(0, 1), (1, 2)]);
        assert_eq!(measure_stretch_lightness(&mst, &p).unwrap().1, 1.0);
        let broken = WeightedGraph::from_pairs(&p, &[0, 1, 2], &[(0, 1)]);
        assert_eq!(measure_stretch_lightness(&broken, &p).unwrap_err(), Error::Disconnected);
    }

    #[test]
    fn net_respecting_fixed_point_and_empty() {
        let p = line(8).normalized().unwrap();
        let h = NetHierarchy::build(&p).unwrap();
        // Short edges map to level <= 0, which every point belongs to.
        let g = WeightedGraph::from_pairs(&p, &[0, 1, 2, 3], &[(0, 1), (1, 2), (2, 3)]);
        let out = make_net_respecting(&g, &h, &p, 0.2).unwrap();
        assert_eq!(out.sorted_edges(), g.sorted_edges());
        let empty = WeightedGraph::new(&[0, 1]);
        assert_eq!(make_net_respecting(&empty, &h, &p, 0.2).unwrap().num_edges(), 0);
        assert!(make_net_respecting(&g, &h, &p, 0.3).is_err());
    }

    #[test]
    fn long_edge_between_non_net_points_is_rerouted() {
        let p = line(103).normalized().unwrap();
        let h = NetHierarchy::build(&p).unwrap();
        let g = WeightedGraph::from_pairs(&p, &[1, 101], &[(1, 101)]);
        let delta = 0.1;
        let e = g.edges()[0];
        assert!(!edge_respects(&e, &h, delta));
        let out = make_net_respecting(&g, &h, &p, delta).unwrap();
        for e in out.edges() {
            assert!(edge_respects(e, &h, delta), "{e:?}");
        }
        assert!(!out.has_edge(1, 101));
        let (len, _) = out.shortest_path(1, 101).unwrap();
        assert!(len <= (1.0 + reroute_constant(delta) * delta) * 100.0, "{len}");
    }
}
