//! Undirected metric subgraphs over point ids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use crate::error::{Error, Result};
use crate::metric::{PointId, PointSet, METRIC_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: PointId,
    pub v: PointId,
    pub w: f64,
}

impl Edge {
    /// Edge with endpoints ordered `u < v`.
    pub fn new(a: PointId, b: PointId, w: f64) -> Self {
        Edge {
            u: a.min(b),
            v: a.max(b),
            w,
        }
    }

    pub fn key(&self) -> (PointId, PointId) {
        (self.u, self.v)
    }

    pub fn other(&self, x: PointId) -> PointId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Weight order with the `(min id, max id)` tie-break used everywhere.
pub fn edge_order(a: &Edge, b: &Edge) -> Ordering {
    a.w.total_cmp(&b.w).then(a.key().cmp(&b.key()))
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Undirected graph whose vertices are point ids and whose edge weights are
/// metric distances. Self-loops and parallel edges are rejected.
#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    vertices: Vec<PointId>,
    index: HashMap<PointId, usize>,
    edges: Vec<Edge>,
    edge_keys: HashSet<(PointId, PointId)>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl WeightedGraph {
    pub fn new(vertices: &[PointId]) -> Self {
        let mut g = WeightedGraph::default();
        let mut vs = vertices.to_vec();
        vs.sort_unstable();
        vs.dedup();
        for v in vs {
            g.add_vertex(v);
        }
        g
    }

    /// Graph over `vertices` with the given endpoint pairs weighted by the metric.
    pub fn from_pairs(points: &PointSet, vertices: &[PointId], pairs: &[(PointId, PointId)]) -> Self {
        let mut g = WeightedGraph::new(vertices);
        for &(a, b) in pairs {
            g.add_edge(a, b, points.dist(a, b));
        }
        g
    }

    pub fn add_vertex(&mut self, v: PointId) -> usize {
        if let Some(&k) = self.index.get(&v) {
            return k;
        }
        let k = self.vertices.len();
        self.vertices.push(v);
        self.index.insert(v, k);
        self.adj.push(Vec::new());
        k
    }

    /// Adds an edge (and missing endpoints). Returns false for self-loops and duplicates.
    pub fn add_edge(&mut self, a: PointId, b: PointId, w: f64) -> bool {
        if a == b {
            return false;
        }
        let e = Edge::new(a, b, w);
        if !self.edge_keys.insert(e.key()) {
            return false;
        }
        let ka = self.add_vertex(a);
        let kb = self.add_vertex(b);
        let id = self.edges.len();
        self.edges.push(e);
        self.adj[ka].push((kb, id));
        self.adj[kb].push((ka, id));
        true
    }

    pub fn has_edge(&self, a: PointId, b: PointId) -> bool {
        self.edge_keys.contains(&(a.min(b), a.max(b)))
    }

    /// Vertex ids in insertion order.
    pub fn vertices(&self) -> &[PointId] {
        &self.vertices
    }

    pub fn sorted_vertices(&self) -> Vec<PointId> {
        let mut v = self.vertices.clone();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, v: PointId) -> bool {
        self.index.contains_key(&v)
    }

    pub fn local(&self, v: PointId) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sorted_edges(&self) -> Vec<Edge> {
        let mut e = self.edges.clone();
        e.sort_by(edge_order);
        e
    }

    pub fn weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Neighbors of `v` with edge weights.
    pub fn neighbors(&self, v: PointId) -> impl Iterator<Item = (PointId, f64)> + '_ {
        let k = self.index.get(&v).copied();
        k.into_iter()
            .flat_map(move |k| self.adj[k].iter().map(move |&(nb, e)| (self.vertices[nb], self.edges[e].w)))
    }

    pub fn degree(&self, v: PointId) -> usize {
        self.local(v).map_or(0, |k| self.adj[k].len())
    }

    /// Single-source shortest path distances (indexed by local vertex index),
    /// abandoning vertices beyond `bound`.
    pub fn dijkstra_local(&self, src: PointId, bound: f64) -> Vec<f64> {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let Some(s) = self.local(src) else { return dist };
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(HeapItem(0.0, s));
        while let Some(HeapItem(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(y, e) in &self.adj[x] {
                let nd = d + self.edges[e].w;
                if nd < dist[y] && nd <= bound {
                    dist[y] = nd;
                    heap.push(HeapItem(nd, y));
                }
            }
        }
        dist
    }

    /// Bounded Dijkstra over local indices using caller-owned scratch space.
    /// `dist` must be all infinite on entry; reached vertices are listed in
    /// `touched` and left set in `dist` for the caller to read and reset.
    pub fn dijkstra_scratch(&self, s: usize, bound: f64, dist: &mut [f64], touched: &mut Vec<usize>) {
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        touched.push(s);
        heap.push(HeapItem(0.0, s));
        while let Some(HeapItem(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            for &(y, e) in &self.adj[x] {
                let nd = d + self.edges[e].w;
                if nd < dist[y] && nd <= bound {
                    if dist[y].is_infinite() {
                        touched.push(y);
                    }
                    dist[y] = nd;
                    heap.push(HeapItem(nd, y));
                }
            }
        }
    }

    /// Shortest-path distance between two vertices, exploring no farther than `bound`.
    pub fn bounded_distance(&self, a: PointId, b: PointId, bound: f64) -> f64 {
        let (Some(s), Some(t)) = (self.local(a), self.local(b)) else {
            return f64::INFINITY;
        };
        if s == t {
            return 0.0;
        }
        let mut dist: HashMap<usize, f64> = HashMap::default();
        let mut heap = BinaryHeap::new();
        dist.insert(s, 0.0);
        heap.push(HeapItem(0.0, s));
        while let Some(HeapItem(d, x)) = heap.pop() {
            if x == t {
                return d;
            }
            if d > dist[&x] {
                continue;
            }
            for &(y, e) in &self.adj[x] {
                let nd = d + self.edges[e].w;
                if nd <= bound && dist.get(&y).is_none_or(|&old| nd < old) {
                    dist.insert(y, nd);
                    heap.push(HeapItem(nd, y));
                }
            }
        }
        f64::INFINITY
    }

    /// Exact shortest path as (weight, vertex list from `a` to `b`).
    pub fn shortest_path(&self, a: PointId, b: PointId) -> Result<(f64, Vec<PointId>)> {
        let s = self.local(a).ok_or(Error::UnknownId(a))?;
        let t = self.local(b).ok_or(Error::UnknownId(b))?;
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(HeapItem(0.0, s));
        while let Some(HeapItem(d, x)) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            if x == t {
                break;
            }
            for &(y, e) in &self.adj[x] {
                let nd = d + self.edges[e].w;
                if nd < dist[y] || (nd == dist[y] && x < prev[y]) {
                    if nd < dist[y] {
                        heap.push(HeapItem(nd, y));
                    }
                    dist[y] = nd;
                    prev[y] = x;
                }
            }
        }
        if !dist[t].is_finite() {
            return Err(Error::Disconnected);
        }
        let mut path = vec![self.vertices[t]];
        let mut cur = t;
        while cur != s {
            cur = prev[cur];
            path.push(self.vertices[cur]);
        }
        path.reverse();
        Ok((dist[t], path))
    }

    /// Connected components as sorted vertex-id lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<PointId>> {
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(self.index[&e.u], self.index[&e.v]);
        }
        let mut groups: HashMap<usize, Vec<PointId>> = HashMap::default();
        for (k, &v) in self.vertices.iter().enumerate() {
            groups.entry(uf.find(k)).or_default().push(v);
        }
        let mut out: Vec<Vec<PointId>> = groups.into_values().collect();
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Checks that every edge weight matches the metric distance.
    pub fn check_metric(&self, points: &PointSet) -> std::result::Result<(), String> {
        for e in &self.edges {
            let d = points.dist(e.u, e.v);
            if (d - e.w).abs() > METRIC_TOL * d.max(1.0) {
                return Err(format!("edge ({},{}) has weight {} but distance {}", e.u, e.v, e.w, d));
            }
        }
        Ok(())
    }

    /// Sub-graph induced on `keep`.
    pub fn induced(&self, keep: &HashSet<PointId>) -> WeightedGraph {
        let vs: Vec<_> = self.sorted_vertices().into_iter().filter(|v| keep.contains(v)).collect();
        let mut g = WeightedGraph::new(&vs);
        for e in self.sorted_edges() {
            if keep.contains(&e.u) && keep.contains(&e.v) {
                g.add_edge(e.u, e.v, e.w);
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HeapItem(pub f64, pub usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_loops_and_duplicates() {
        let mut g = WeightedGraph::new(&[0, 1]);
        assert!(g.add_edge(0, 1, 1.0));
        assert!(!g.add_edge(1, 0, 1.0));
        assert!(!g.add_edge(1, 1, 0.0));
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn shortest_path_prefers_two_hops() {
        let mut g = WeightedGraph::new(&[0, 1, 2]);
        g.add_edge(0, 1, 1.0);
        g.add_edge(1, 2, 1.0);
        g.add_edge(0, 2, 5.0);
        let (w, p) = g.shortest_path(0, 2).unwrap();
        assert_eq!(w, 2.0);
        assert_eq!(p, vec![0, 1, 2]);
        let (w, p) = g.shortest_path(0, 1).unwrap();
        assert_eq!((w, p), (1.0, vec![0, 1]));
        g.add_vertex(7);
        assert_eq!(g.shortest_path(0, 7).unwrap_err(), Error::Disconnected);
    }
}
