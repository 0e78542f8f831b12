//! Bottom-up primary levels and top-down secondary partitions.

use rustc_hash::FxHashMap as HashMap;

use log::debug;

use super::radius::RadiusChooser;
use super::{Cluster, ClusterKind, ClusterParams, ClusterTree, NodeId};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::hierarchy::NetHierarchy;
use crate::metric::{PointId, PointSet, SpatialIndex, METRIC_TOL};

/// `log2 s` for the smallest power of two `s` above
/// `(q W_B / eps) (log n / log log n)`, clamped to `[2, max(2, levels / 2)]`.
pub fn default_s_log(q: f64, lightness: f64, eps: f64, n: usize, levels: usize) -> u32 {
    let ln = (n.max(4) as f64).log2();
    let target = q * lightness.max(1.0) / eps * ln / ln.log2().max(1.0);
    let want = target.log2().floor().max(0.0) as u32 + 1;
    let cap = (levels as u32 / 2).max(2);
    want.clamp(2, cap)
}

struct Builder<'a> {
    g: &'a WeightedGraph,
    points: &'a PointSet,
    h: &'a NetHierarchy,
    params: &'a ClusterParams,
    s_log: i64,
    c: f64,
    n: usize,
    nodes: Vec<Cluster>,
    choosers: HashMap<i64, RadiusChooser<'a>>,
    index: SpatialIndex,
    fallbacks: usize,
    swept: usize,
}

impl<'a> Builder<'a> {
    fn radius(&mut self, p: PointId, level: i64, gamma: f64) -> Result<f64> {
        let (g, points, q, k) = (self.g, self.points, self.params.q, self.params.constants);
        let scale = 2f64.powi(level as i32);
        let chooser = self
            .choosers
            .entry(level)
            .or_insert_with(|| RadiusChooser::with_cell(g, points, q, k, scale));
        if self.params.strict {
            return Ok(chooser.choose(p, scale, gamma, self.c)?.radius);
        }
        let (chk, fell_back) = chooser.choose_relaxed(p, scale, gamma, self.c)?;
        if fell_back {
            self.fallbacks += 1;
        }
        Ok(chk.radius)
    }

    fn push(&mut self, c: Cluster) -> NodeId {
        self.nodes.push(c);
        self.nodes.len() - 1
    }

    fn members_of(&self, units: &[NodeId]) -> Vec<PointId> {
        let mut m: Vec<PointId> = units.iter().flat_map(|&u| self.nodes[u].member_ids.iter().copied()).collect();
        m.sort_unstable();
        m
    }

    fn adopt(&mut self, parent: NodeId, children: Vec<NodeId>) {
        for &k in &children {
            self.nodes[k].parent = Some(parent);
        }
        self.nodes[parent].children = children;
    }

    /// Earlier balls among `nodes[from..]` at `level` that intersect `B(p, r)`.
    fn cutting_balls(&self, from: usize, level: i64, p: PointId, r: f64) -> Vec<(PointId, f64)> {
        let mut balls = vec![(p, r)];
        for c in &self.nodes[from..] {
            if c.level == level && c.radius > 0.0 && self.points.dist(c.center, p) < c.radius + r {
                balls.push((c.center, c.radius));
            }
        }
        balls
    }

    /// Builds the primary clusters of rank `j` from the clusters of rank `j-1`.
    fn primary_level(&mut self, units: &[NodeId], j: i64) -> Result<Vec<NodeId>> {
        let level = j * self.s_log;
        let scale = 2f64.powi(level as i32);
        let gamma = 2f64.powi((level - self.s_log) as i32);
        let centers: Vec<PointId> = units.iter().map(|&u| self.nodes[u].center).collect();
        let by_center: HashMap<PointId, usize> = centers.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let uindex = SpatialIndex::new(self.points, &centers, scale);
        let mut claimed = vec![false; units.len()];
        let mut net = self.h.level_signed(level).to_vec();
        net.sort_unstable();
        let first = self.nodes.len();
        let mut made: Vec<(NodeId, Vec<usize>)> = Vec::new();
        let mut left = units.len();
        for p in net {
            if left == 0 {
                break;
            }
            let near: Vec<usize> = uindex
                .within(self.points, p, 2.0 * scale)
                .into_iter()
                .map(|c| by_center[&c])
                .filter(|&k| !claimed[k])
                .collect();
            if near.is_empty() {
                continue;
            }
            let r = self.radius(p, level, gamma)?;
            let mut claim: Vec<usize> = near
                .into_iter()
                .filter(|&k| self.points.dist(p, centers[k]) <= r + METRIC_TOL)
                .collect();
            if claim.is_empty() {
                continue;
            }
            claim.sort_unstable();
            for &k in &claim {
                claimed[k] = true;
            }
            left -= claim.len();
            let forming = self.cutting_balls(first, level, p, r);
            let id = self.push(Cluster {
                level,
                kind: ClusterKind::Primary,
                rank: j,
                center: p,
                radius: r,
                member_ids: Vec::new(),
                children: Vec::new(),
                parent: None,
                portals: Vec::new(),
                forming_balls: forming,
            });
            made.push((id, claim));
        }
        if made.is_empty() {
            let id = self.push(Cluster {
                level,
                kind: ClusterKind::Primary,
                rank: j,
                center: centers[0],
                radius: 2.0 * scale,
                member_ids: Vec::new(),
                children: Vec::new(),
                parent: None,
                portals: Vec::new(),
                forming_balls: vec![(centers[0], 2.0 * scale)],
            });
            made.push((id, Vec::new()));
        }
        for k in 0..units.len() {
            if claimed[k] {
                continue;
            }
            let best = (0..made.len())
                .min_by(|&a, &b| {
                    let da = self.points.dist(centers[k], self.nodes[made[a].0].center);
                    let db = self.points.dist(centers[k], self.nodes[made[b].0].center);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("at least one cluster");
            made[best].1.push(k);
            self.swept += 1;
        }
        let mut out = Vec::with_capacity(made.len());
        for (id, mut claim) in made {
            claim.sort_unstable();
            let group: Vec<NodeId> = claim.iter().map(|&k| units[k]).collect();
            self.nodes[id].member_ids = self.members_of(&group);
            let children = if j == 0 { group } else { self.partition(id, group, level, j)? };
            self.adopt(id, children);
            out.push(id);
        }
        Ok(out)
    }

    /// True if no vertex outside `x` lies closer than `need` to `p`. Centers
    /// whose `need`-ball reaches past every member are rejected without a scan.
    fn far_from_boundary(&self, x: NodeId, p: PointId, need: f64) -> bool {
        let members = &self.nodes[x].member_ids;
        if members.len() == self.n {
            return true;
        }
        let reach = members.iter().map(|&m| self.points.dist(p, m)).fold(0.0, f64::max);
        if need > reach {
            return false;
        }
        let mut ok = true;
        self.index.for_each_within(self.points, p, need, |v, d| {
            if d < need - METRIC_TOL && members.binary_search(&v).is_err() {
                ok = false;
            }
        });
        ok
    }

    /// Splits cluster `x` (level `top`, primary rank `j`) over its rank `j-1`
    /// units: secondary balls by decreasing level, each claiming whole units,
    /// recursively partitioned; unclaimed units become direct children.
    fn partition(&mut self, x: NodeId, units: Vec<NodeId>, top: i64, j: i64) -> Result<Vec<NodeId>> {
        let lo = (j - 1) * self.s_log + 1;
        let gamma = 2f64.powi(((j - 1) * self.s_log) as i32);
        let mut remaining = units.clone();
        let mut children = Vec::new();
        for k in (lo..top).rev() {
            let scale = 2f64.powi(k as i32);
            let need = self.c * scale;
            let mut net: Vec<PointId> =
                self.h.level_signed(k).iter().copied().filter(|&p| self.nodes[x].contains(p)).collect();
            net.sort_unstable();
            let first = self.nodes.len();
            for p in net {
                if remaining.len() < 2 {
                    break;
                }
                if !self.far_from_boundary(x, p, need) {
                    continue;
                }
                let near: Vec<NodeId> = remaining
                    .iter()
                    .copied()
                    .filter(|&u| self.points.dist(p, self.nodes[u].center) <= 2.0 * scale + METRIC_TOL)
                    .collect();
                if near.len() < 2 {
                    continue;
                }
                let r = self.radius(p, k, gamma)?;
                let claim: Vec<NodeId> = near
                    .into_iter()
                    .filter(|&u| self.points.dist(p, self.nodes[u].center) <= r + METRIC_TOL)
                    .collect();
                if claim.len() < 2 || claim.len() == units.len() {
                    continue;
                }
                remaining.retain(|u| !claim.contains(u));
                let forming = self.cutting_balls(first, k, p, r);
                let members = self.members_of(&claim);
                let y = self.push(Cluster {
                    level: k,
                    kind: ClusterKind::Secondary,
                    rank: j,
                    center: p,
                    radius: r,
                    member_ids: members,
                    children: Vec::new(),
                    parent: None,
                    portals: Vec::new(),
                    forming_balls: forming,
                });
                let sub = self.partition(y, claim, k, j)?;
                self.adopt(y, sub);
                children.push(y);
            }
        }
        children.extend(remaining);
        Ok(children)
    }
}

/// Builds the cluster tree over the vertices of `g`. Leaves are single
/// vertices; primary clusters sit at levels `j log s`; portals are left empty
/// (see `assign_portals`).
pub fn build_cluster_tree(g: &WeightedGraph, points: &PointSet, params: &ClusterParams) -> Result<ClusterTree> {
    if !(params.eps > 0.0 && params.eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {} must lie in (0, 1)", params.eps)));
    }
    if !(params.q > 0.0) {
        return Err(Error::InvalidParameter(format!("q = {} must be positive", params.q)));
    }
    let vs = g.sorted_vertices();
    if vs.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let h = NetHierarchy::build_over(points, &vs)?;
    let s_log = params
        .s_log
        .unwrap_or_else(|| default_s_log(params.q, params.lightness, params.eps, vs.len(), h.num_levels()))
        .max(1);
    let mut b = Builder {
        g,
        points,
        h: &h,
        params,
        s_log: s_log as i64,
        c: params.cluster_c(),
        n: vs.len(),
        nodes: Vec::new(),
        choosers: HashMap::default(),
        index: SpatialIndex::new(points, &vs, 1.0),
        fallbacks: 0,
        swept: 0,
    };
    let mut units: Vec<NodeId> = vs
        .iter()
        .map(|&v| {
            b.push(Cluster {
                level: -(s_log as i64),
                kind: ClusterKind::Primary,
                rank: -1,
                center: v,
                radius: 0.0,
                member_ids: vec![v],
                children: Vec::new(),
                parent: None,
                portals: vec![v],
                forming_balls: Vec::new(),
            })
        })
        .collect();
    let mut j = 0;
    while units.len() > 1 {
        let next = b.primary_level(&units, j)?;
        debug!("primary rank {j}: {} -> {} clusters", units.len(), next.len());
        units = next;
        j += 1;
    }
    let root = units[0];
    let leaf_of: HashMap<PointId, NodeId> = vs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let (fallbacks, swept) = (b.fallbacks, b.swept);
    let nodes = b.nodes;
    if fallbacks > 0 {
        debug!("cluster tree: {fallbacks} radius fallbacks, {swept} swept units");
    }
    Ok(ClusterTree {
        nodes,
        root,
        s_log,
        c: params.cluster_c(),
        eps: params.eps,
        leaf_of,
        hierarchy: h,
        radius_fallbacks: fallbacks,
        swept_units: swept,
        portal_bound: params.portal_bound(),
        child_bound: params.child_bound(vs.len()),
        dp_graph: None,
    })
}
