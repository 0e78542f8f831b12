//! Portal assignment and the portal-respecting graph the DP runs on.

use std::collections::BTreeSet;
use rustc_hash::FxHashMap as HashMap;

use log::debug;

use super::{ClusterKind, ClusterTree, NodeId};
use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::metric::{PointId, PointSet, METRIC_TOL};

/// Graph whose every edge enters and leaves clusters only at portals.
///
/// Edges are those of the input graph, except that an edge leaving a primary
/// cluster from inside an absorbed lower primary ball is moved to that ball's
/// center; such edges are weighted by the detour and remember their path.
#[derive(Debug, Clone)]
pub struct DpGraph {
    pub graph: WeightedGraph,
    /// Input-graph edges realizing each rerouted edge, keyed by `Edge::key`.
    pub realization: HashMap<(PointId, PointId), Vec<Edge>>,
}

impl DpGraph {
    pub fn rerouted(&self) -> usize {
        self.realization.len()
    }

    /// Replaces rerouted edges by their input-graph paths.
    pub fn realize(&self, edges: &[Edge]) -> Vec<Edge> {
        let mut out = Vec::new();
        for e in edges {
            match self.realization.get(&e.key()) {
                Some(path) => out.extend(path.iter().copied()),
                None => out.push(*e),
            }
        }
        out
    }
}

struct Walk<'a> {
    tree: &'a ClusterTree,
    g: &'a WeightedGraph,
    points: &'a PointSet,
    portals: Vec<BTreeSet<PointId>>,
    paths: HashMap<(PointId, PointId), (f64, Vec<PointId>)>,
}

impl Walk<'_> {
    fn primary_ancestor(&self, v: PointId, rank: i64) -> NodeId {
        let mut cur = self.tree.leaf_of[&v];
        loop {
            let c = &self.tree.nodes[cur];
            if c.kind == ClusterKind::Primary && c.rank == rank {
                return cur;
            }
            cur = c.parent.expect("primary ancestor exists below the root");
        }
    }

    fn path(&mut self, a: PointId, b: PointId) -> Result<(f64, Vec<PointId>)> {
        if let Some(p) = self.paths.get(&(a, b)) {
            return Ok(p.clone());
        }
        let p = self.g.shortest_path(a, b)?;
        self.paths.insert((a, b), p.clone());
        Ok(p)
    }

    /// Walks from `x`'s leaf up to just below `top`, making the current anchor a
    /// portal of each cluster. Returns the final anchor, the detour weight and
    /// the detour vertex path from `x`.
    fn anchor(&mut self, x: PointId, y: PointId, w: f64, top: NodeId) -> Result<(PointId, f64, Vec<PointId>)> {
        let mut a = x;
        let mut cost = 0.0;
        let mut route = vec![x];
        let mut cur = self.tree.nodes[self.tree.leaf_of[&x]].parent.expect("leaf below top");
        while cur != top {
            let node = &self.tree.nodes[cur];
            if !self.portals[cur].contains(&a) {
                let lim = node.radius + METRIC_TOL;
                let direct = self.points.dist(node.center, x) <= lim && self.points.dist(node.center, y) > lim;
                let absorbed = node.kind == ClusterKind::Primary && node.rank >= 1 && w <= node.radius && !direct;
                let mut target = a;
                if absorbed {
                    let b = &self.tree.nodes[self.primary_ancestor(a, node.rank - 1)];
                    if b.center != a && b.contains(b.center) {
                        target = b.center;
                    }
                }
                if target != a {
                    let (d, p) = self.path(a, target)?;
                    cost += d;
                    route.extend(p.into_iter().skip(1));
                    a = target;
                }
                self.portals[cur].insert(a);
            }
            cur = self.tree.nodes[cur].parent.expect("below top");
        }
        Ok((a, cost, route))
    }
}

fn path_edges(points: &PointSet, route: &[PointId]) -> Vec<Edge> {
    route.windows(2).map(|w| Edge::new(w[0], w[1], points.dist(w[0], w[1]))).collect()
}

/// Sets every cluster's portals: endpoints of crossing edges (or, for primary
/// clusters, the center of the absorbed lower primary ball such an edge comes
/// from), plus the cluster's `eps 2^i`-net points. Parent portals are inherited
/// by the child holding them. Also builds the DP graph.
pub fn assign_portals(mut tree: ClusterTree, g: &WeightedGraph, points: &PointSet) -> Result<ClusterTree> {
    let mut vs = g.sorted_vertices();
    vs.sort_unstable();
    if vs.len() != tree.leaf_of.len() || vs.iter().any(|v| !tree.leaf_of.contains_key(v)) {
        return Err(Error::InvalidParameter("cluster tree was built over a different vertex set".into()));
    }
    let shift = tree.eps.log2().floor() as i64;
    let mut portals: Vec<BTreeSet<PointId>> = vec![BTreeSet::new(); tree.nodes.len()];
    for (id, c) in tree.nodes.iter().enumerate() {
        if c.is_leaf() {
            portals[id].insert(c.center);
        } else if id != tree.root {
            let lvl = c.level + shift;
            if lvl <= 0 {
                portals[id].extend(c.member_ids.iter().copied());
            } else {
                let net = tree.hierarchy.level_signed(lvl);
                portals[id].extend(c.member_ids.iter().copied().filter(|v| net.binary_search(v).is_ok()));
            }
        }
    }
    let mut walk = Walk {
        tree: &tree,
        g,
        points,
        portals,
        paths: HashMap::default(),
    };
    let mut best: HashMap<(PointId, PointId), (f64, Option<Vec<Edge>>)> = HashMap::default();
    for e in g.sorted_edges() {
        let top = tree.lca(tree.leaf_of[&e.u], tree.leaf_of[&e.v]);
        let (a, ca, ra) = walk.anchor(e.u, e.v, e.w, top)?;
        let (b, cb, rb) = walk.anchor(e.v, e.u, e.w, top)?;
        let moved = a != e.u || b != e.v;
        let w = e.w + ca + cb;
        let key = (a.min(b), a.max(b));
        let path = moved.then(|| {
            let mut p = path_edges(points, &ra);
            p.push(e);
            p.extend(path_edges(points, &rb));
            p
        });
        match best.get(&key) {
            Some((old, _)) if *old <= w => {}
            _ => {
                best.insert(key, (w, path));
            }
        }
    }
    let mut portals = walk.portals;
    let order = tree.postorder();
    for &id in order.iter().rev() {
        let own: Vec<PointId> = portals[id].iter().copied().collect();
        for &k in &tree.nodes[id].children {
            let child = &tree.nodes[k];
            portals[k].extend(own.iter().copied().filter(|&x| child.contains(x)));
        }
    }
    for (id, set) in portals.into_iter().enumerate() {
        tree.nodes[id].portals = set.into_iter().collect();
    }
    let mut graph = WeightedGraph::new(&vs);
    let mut realization = HashMap::default();
    let mut keys: Vec<_> = best.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    for ((a, b), (w, path)) in keys {
        graph.add_edge(a, b, w);
        if let Some(p) = path {
            realization.insert((a, b), p);
        }
    }
    debug!(
        "portals: max {} per cluster, {} rerouted edges",
        tree.max_portals(),
        realization.len()
    );
    tree.dp_graph = Some(DpGraph { graph, realization });
    Ok(tree)
}
