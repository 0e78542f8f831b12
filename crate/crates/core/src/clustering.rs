//! Nested primary/secondary cluster tree with portals over a sparse banyan.

mod build;
mod portals;
mod radius;

pub use build::{build_cluster_tree, default_s_log};
pub use portals::{assign_portals, DpGraph};
pub use radius::{check_radius, choose_radius, greedy_ball_cover, Neighborhood, RadiusCheck, RadiusChooser, RadiusConstants};

use rustc_hash::FxHashMap as HashMap;
use std::fmt::Write as _;

use crate::graph::WeightedGraph;
use crate::hierarchy::NetHierarchy;
use crate::metric::{PointId, PointSet, METRIC_TOL};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterKind {
    Primary,
    Secondary,
}

impl ClusterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClusterKind::Primary => "primary",
            ClusterKind::Secondary => "secondary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub level: i64,
    pub kind: ClusterKind,
    /// Primary rank `j` (level `j log s`); leaves have rank -1 and secondary
    /// clusters carry the rank of the primary cluster they partition.
    pub rank: i64,
    pub center: PointId,
    pub radius: f64,
    /// Sorted.
    pub member_ids: Vec<PointId>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Sorted.
    pub portals: Vec<PointId>,
    /// The cluster's own ball first, then earlier same-level balls cutting into it.
    pub forming_balls: Vec<(PointId, f64)>,
}

impl Cluster {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn contains(&self, v: PointId) -> bool {
        self.member_ids.binary_search(&v).is_ok()
    }

    pub fn is_portal(&self, v: PointId) -> bool {
        self.portals.binary_search(&v).is_ok()
    }
}

pub const DEFAULT_PORTAL_CONSTANT: f64 = 16.0;
pub const DEFAULT_CHILD_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub eps: f64,
    pub q: f64,
    /// Boundary separation factor `c`; `None` means `4q`.
    pub c: Option<f64>,
    /// `log2 s`; `None` derives it from `q`, the lightness and `n`.
    pub s_log: Option<u32>,
    /// Banyan lightness, used only to derive `s`.
    pub lightness: f64,
    pub constants: RadiusConstants,
    /// Fail with `NoAdmissibleRadius` instead of falling back to the best candidate.
    pub strict: bool,
    pub portal_constant: f64,
    pub child_constant: f64,
}

impl ClusterParams {
    pub fn new(eps: f64, q: f64) -> Self {
        ClusterParams {
            eps,
            q,
            c: None,
            s_log: None,
            lightness: 1.0,
            constants: RadiusConstants::default(),
            strict: false,
            portal_constant: DEFAULT_PORTAL_CONSTANT,
            child_constant: DEFAULT_CHILD_CONSTANT,
        }
    }

    pub fn cluster_c(&self) -> f64 {
        self.c.unwrap_or(4.0 * self.q).max(1.0)
    }

    /// Configured portal bound `portal_constant * q`.
    pub fn portal_bound(&self) -> usize {
        (self.portal_constant * self.q).ceil() as usize
    }

    /// Configured child bound `child_constant * q^2 * log log n`.
    pub fn child_bound(&self, n: usize) -> usize {
        let ll = (n.max(4) as f64).log2().log2().max(1.0);
        (self.child_constant * self.q * self.q * ll).ceil() as usize
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTree {
    pub nodes: Vec<Cluster>,
    pub root: NodeId,
    pub s_log: u32,
    pub c: f64,
    pub eps: f64,
    pub leaf_of: HashMap<PointId, NodeId>,
    pub hierarchy: NetHierarchy,
    /// Radius choices that fell back to the best failing candidate.
    pub radius_fallbacks: usize,
    /// Units attached to the nearest cluster after no ball claimed them.
    pub swept_units: usize,
    pub portal_bound: usize,
    pub child_bound: usize,
    /// Set by `assign_portals`.
    pub dp_graph: Option<DpGraph>,
}

impl ClusterTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Cluster {
        &self.nodes[id]
    }

    pub fn depth(&self, mut id: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[id].parent {
            id = p;
            d += 1;
        }
        d
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.nodes[a].parent.expect("deeper node has a parent");
            da -= 1;
        }
        while db > da {
            b = self.nodes[b].parent.expect("deeper node has a parent");
            db -= 1;
        }
        while a != b {
            a = self.nodes[a].parent.expect("distinct roots");
            b = self.nodes[b].parent.expect("distinct roots");
        }
        a
    }

    /// Child of `parent` whose subtree contains point `v`.
    pub fn child_containing(&self, parent: NodeId, v: PointId) -> Option<NodeId> {
        self.nodes[parent].children.iter().copied().find(|&c| self.nodes[c].contains(v))
    }

    /// Nodes in bottom-up order (every child before its parent).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                out.push(v);
                continue;
            }
            stack.push((v, true));
            for &c in self.nodes[v].children.iter().rev() {
                stack.push((c, false));
            }
        }
        out
    }

    pub fn primary_levels(&self) -> Vec<i64> {
        let mut lv: Vec<i64> = self
            .nodes
            .iter()
            .filter(|c| c.kind == ClusterKind::Primary && !c.is_leaf())
            .map(|c| c.level)
            .collect();
        lv.sort_unstable();
        lv.dedup();
        lv
    }

    pub fn max_portals(&self) -> usize {
        self.nodes.iter().map(|c| c.portals.len()).max().unwrap_or(0)
    }

    pub fn max_children(&self) -> usize {
        self.nodes.iter().map(|c| c.children.len()).max().unwrap_or(0)
    }

    /// One line per node: id, level, kind, center, radius, portal count, child ids.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, c) in self.nodes.iter().enumerate() {
            let kids: Vec<String> = c.children.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(
                out,
                "{id} {} {} {} {:.6} {} [{}]",
                c.level,
                c.kind.as_str(),
                c.center,
                c.radius,
                c.portals.len(),
                kids.join(",")
            );
        }
        out
    }

    /// Structural audit. Returns one message per violated property.
    pub fn audit(&self, g: &WeightedGraph, points: &PointSet) -> Vec<String> {
        let mut bad = Vec::new();
        let mut all = g.sorted_vertices();
        all.sort_unstable();
        if self.nodes[self.root].member_ids != all {
            bad.push("root does not hold every vertex".to_string());
        }
        let step = self.s_log as i64;
        for (id, c) in self.nodes.iter().enumerate() {
            if !c.is_leaf() {
                let mut union: Vec<PointId> =
                    c.children.iter().flat_map(|&k| self.nodes[k].member_ids.iter().copied()).collect();
                union.sort_unstable();
                let total = union.len();
                union.dedup();
                if total != union.len() {
                    bad.push(format!("node {id}: children overlap"));
                }
                if union != c.member_ids {
                    bad.push(format!("node {id}: children do not partition members"));
                }
                for &k in &c.children {
                    if self.nodes[k].parent != Some(id) {
                        bad.push(format!("node {id}: child {k} has wrong parent"));
                    }
                }
            }
            if c.kind == ClusterKind::Primary && !c.is_leaf() && c.level.rem_euclid(step) != 0 {
                bad.push(format!("node {id}: primary level {} not a multiple of {step}", c.level));
            }
            if c.children.len() > self.child_bound {
                bad.push(format!("node {id}: {} children exceed {}", c.children.len(), self.child_bound));
            }
            if c.portals.len() > self.portal_bound {
                bad.push(format!("node {id}: {} portals exceed {}", c.portals.len(), self.portal_bound));
            }
            if c.portals.iter().any(|&p| !c.contains(p)) {
                bad.push(format!("node {id}: portal outside the cluster"));
            }
            if let Some(p) = c.parent {
                let parent = &self.nodes[p];
                for &x in &parent.portals {
                    if c.contains(x) && !c.is_portal(x) {
                        bad.push(format!("node {id}: parent portal {x} not inherited"));
                    }
                }
                if c.kind == ClusterKind::Secondary {
                    let need = self.c * 2f64.powi(c.level as i32);
                    let outside = g.vertices().iter().filter(|&&v| !parent.contains(v));
                    if let Some(d) = outside.map(|&v| points.dist(c.center, v)).min_by(f64::total_cmp) {
                        if d < need - METRIC_TOL {
                            bad.push(format!("node {id}: center {d:.3} from parent boundary, need {need:.3}"));
                        }
                    }
                }
            }
        }
        if let Some(dg) = &self.dp_graph {
            for e in dg.graph.edges() {
                if let Some(msg) = self.crossing_violation(e.u, e.v) {
                    bad.push(msg);
                }
            }
        }
        bad
    }

    /// Reports an edge whose endpoint is not a portal of some cluster it leaves.
    pub fn crossing_violation(&self, a: PointId, b: PointId) -> Option<String> {
        let (la, lb) = (self.leaf_of[&a], self.leaf_of[&b]);
        let top = self.lca(la, lb);
        for (x, leaf) in [(a, la), (b, lb)] {
            let mut cur = leaf;
            while cur != top {
                if !self.nodes[cur].is_portal(x) {
                    return Some(format!("edge ({a}, {b}) leaves node {cur} through non-portal {x}"));
                }
                cur = self.nodes[cur].parent.expect("below the common ancestor");
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::greedy_spanner;

    fn grid_points(side: usize) -> PointSet {
        let pts: Vec<Vec<f64>> = (0..side * side).map(|k| vec![(k % side) as f64, (k / side) as f64]).collect();
        PointSet::euclidean(2, &pts, vec![true; pts.len()]).unwrap().normalized().unwrap()
    }

    #[test]
    fn single_point_is_a_one_node_tree() {
        let p = PointSet::euclidean(1, &[vec![0.0]], vec![true]).unwrap().normalized().unwrap();
        let g = WeightedGraph::new(&[0]);
        let t = build_cluster_tree(&g, &p, &ClusterParams::new(0.5, 8.0)).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.nodes[t.root].is_leaf());
        let t = assign_portals(t, &g, &p).unwrap();
        assert!(t.audit(&g, &p).is_empty());
    }

    #[test]
    fn points_in_a_unit_ball_give_one_primary_level() {
        let tri = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()]];
        let p = PointSet::euclidean(2, &tri, vec![true; 3]).unwrap().normalized().unwrap();
        let g = greedy_spanner(&p, 0.5).unwrap();
        let params = ClusterParams {
            s_log: Some(2),
            ..ClusterParams::new(0.5, 8.0)
        };
        let t = build_cluster_tree(&g, &p, &params).unwrap();
        assert_eq!(t.primary_levels(), vec![0]);
        assert_eq!(t.nodes[t.root].children.len(), 3);
        assert!(t.nodes[t.root].children.iter().all(|&c| t.nodes[c].is_leaf()));
    }

    #[test]
    fn grid_has_two_primary_levels_and_passes_audit() {
        let p = grid_points(16);
        let g = greedy_spanner(&p, 0.5).unwrap();
        let params = ClusterParams {
            s_log: Some(4),
            ..ClusterParams::new(0.5, 64.0)
        };
        let t = build_cluster_tree(&g, &p, &params).unwrap();
        let t = assign_portals(t, &g, &p).unwrap();
        let levels = t.primary_levels();
        assert!(levels.len() >= 2, "levels {levels:?}");
        let bad = t.audit(&g, &p);
        assert!(bad.is_empty(), "{bad:?}");
        let text = t.to_text();
        assert_eq!(text.lines().count(), t.len());
    }

    #[test]
    fn every_dp_crossing_is_through_portals() {
        let p = grid_points(16);
        let g = greedy_spanner(&p, 0.5).unwrap();
        let params = ClusterParams {
            s_log: Some(2),
            c: Some(1.0),
            ..ClusterParams::new(0.5, 16.0)
        };
        let t = assign_portals(build_cluster_tree(&g, &p, &params).unwrap(), &g, &p).unwrap();
        let dg = t.dp_graph.as_ref().unwrap();
        assert!(dg.graph.is_connected());
        for e in dg.graph.edges() {
            assert_eq!(t.crossing_violation(e.u, e.v), None);
        }
        assert!(t.audit(&g, &p).is_empty());
    }

    #[test]
    fn small_c_creates_secondary_clusters() {
        let p = grid_points(24);
        let g = greedy_spanner(&p, 0.5).unwrap();
        let params = ClusterParams {
            s_log: Some(4),
            c: Some(1.0),
            ..ClusterParams::new(0.5, 16.0)
        };
        let t = assign_portals(build_cluster_tree(&g, &p, &params).unwrap(), &g, &p).unwrap();
        assert!(t.nodes.iter().any(|c| c.kind == ClusterKind::Secondary));
        let bad = t.audit(&g, &p);
        assert!(bad.is_empty(), "{bad:?}");
    }
}
