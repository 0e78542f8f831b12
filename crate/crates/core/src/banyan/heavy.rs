//! Potential-driven ball collections that locate clusters whose Steiner trees
//! are much heavier than their diameter.

use std::collections::BinaryHeap;

use crate::error::Result;
use crate::graph::WeightedGraph;
use crate::hierarchy::build_net;
use crate::metric::{PointId, PointSet, SpatialIndex, METRIC_TOL};
use crate::spanner::{greedy_spanner_over, SpannerMode};

/// One emitted cluster `D`: a `delta`-net of `B(center, 2 radius / eps)` over `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyCluster {
    pub members: Vec<PointId>,
    pub center: PointId,
    pub radius: f64,
    pub delta: f64,
    pub collection: usize,
    pub level: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterFamily {
    pub clusters: Vec<HeavyCluster>,
    /// Candidate balls evaluated across all collections.
    pub candidates: usize,
    /// Balls inserted across all collections (before deduplicating `D` sets).
    pub insertions: usize,
}

impl ClusterFamily {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Ball {
    center: PointId,
    radius: f64,
    param: f64,
    alive: bool,
}

/// Mutable state of one collection `C_i`.
struct Collection<'a> {
    points: &'a PointSet,
    xs: &'a [PointId],
    local: &'a rustc_hash::FxHashMap<PointId, usize>,
    index: &'a SpatialIndex,
    edges: &'a [(usize, usize, f64)],
    incident: &'a [Vec<usize>],
    edge_alive: Vec<bool>,
    balls: Vec<Ball>,
    cover: Vec<Option<usize>>,
}

/// What inserting a ball would do.
struct Effect {
    decrease: f64,
    inside: Vec<usize>,
    removed: Vec<usize>,
    new_cover: Vec<Option<usize>>,
    contains_something: bool,
}

impl<'a> Collection<'a> {
    fn slack(&self, a: usize, cover: Option<usize>) -> f64 {
        cover.map_or(0.0, |b| {
            let ball = &self.balls[b];
            ball.radius - self.points.dist(ball.center, self.xs[a])
        })
    }

    fn contribution(&self, e: usize, cover_of: &dyn Fn(usize) -> Option<usize>) -> f64 {
        let (a, b, w) = self.edges[e];
        let (ca, cb) = (cover_of(a), cover_of(b));
        match (ca, cb) {
            (None, None) => w,
            _ => (w - self.slack(a, ca) - self.slack(b, cb)).max(0.0),
        }
    }

    fn effect(&self, center: PointId, radius: f64) -> Effect {
        let points = self.points;
        let mut inside: Vec<usize> = self
            .index
            .within(points, center, radius)
            .into_iter()
            .map(|p| self.local[&p])
            .collect();
        inside.sort_unstable();
        let mut in_ball = rustc_hash::FxHashSet::default();
        in_ball.extend(inside.iter().copied());
        let mut removed = Vec::new();
        let mut touching = Vec::new();
        let mut contains_ball = false;
        for (k, b) in self.balls.iter().enumerate() {
            if !b.alive {
                continue;
            }
            let dc = points.dist(center, b.center);
            if dc > radius + b.radius + METRIC_TOL {
                continue;
            }
            let identical = b.center == center && (b.radius - radius).abs() <= METRIC_TOL;
            if !identical && dc + b.radius <= radius + METRIC_TOL {
                removed.push(k);
                if b.center != center {
                    contains_ball = true;
                }
            } else {
                touching.push(k);
            }
        }
        let new_id = self.balls.len();
        let new_cover: Vec<Option<usize>> = inside
            .iter()
            .map(|&a| {
                let mut best = (radius, new_id);
                for &k in &touching {
                    let b = &self.balls[k];
                    if points.dist(b.center, self.xs[a]) <= b.radius + METRIC_TOL && (b.radius, k) < best {
                        best = (b.radius, k);
                    }
                }
                Some(best.1)
            })
            .collect();
        let mut affected: Vec<usize> = inside.iter().flat_map(|&a| self.incident[a].iter().copied()).collect();
        affected.sort_unstable();
        affected.dedup();
        affected.retain(|&e| self.edge_alive[e]);
        let mut contains_edge = false;
        let cover_now = |a: usize| self.cover[a];
        let lookup = |a: usize| match inside.binary_search(&a) {
            Ok(k) => new_cover[k],
            Err(_) => self.cover[a],
        };
        let mut before: f64 = removed.iter().map(|&k| 2.0 * self.balls[k].radius).sum();
        let mut after = 2.0 * radius;
        for &e in &affected {
            before += self.contribution(e, &cover_now);
            let (a, b, _) = self.edges[e];
            if in_ball.contains(&a) && in_ball.contains(&b) {
                contains_edge = true;
            } else {
                after += self.contribution_with(e, &lookup, new_id, center, radius);
            }
        }
        Effect {
            decrease: before - after,
            inside,
            removed,
            new_cover,
            contains_something: contains_edge || contains_ball,
        }
    }

    /// Edge contribution when the pending ball `new_id` may be a cover.
    fn contribution_with(
        &self,
        e: usize,
        cover_of: &dyn Fn(usize) -> Option<usize>,
        new_id: usize,
        center: PointId,
        radius: f64,
    ) -> f64 {
        let (a, b, w) = self.edges[e];
        let slack = |p: usize| match cover_of(p) {
            None => 0.0,
            Some(k) if k == new_id => radius - self.points.dist(center, self.xs[p]),
            Some(k) => self.slack(p, Some(k)),
        };
        match (cover_of(a), cover_of(b)) {
            (None, None) => w,
            _ => (w - slack(a) - slack(b)).max(0.0),
        }
    }

    fn insert(&mut self, center: PointId, radius: f64, param: f64, fx: Effect) {
        let id = self.balls.len();
        self.balls.push(Ball {
            center,
            radius,
            param,
            alive: true,
        });
        for k in fx.removed {
            self.balls[k].alive = false;
        }
        for (&a, c) in fx.inside.iter().zip(fx.new_cover) {
            self.cover[a] = c;
        }
        let inside: rustc_hash::FxHashSet<usize> = fx.inside.iter().copied().collect();
        for &a in &fx.inside {
            for &e in &self.incident[a] {
                let (u, v, _) = self.edges[e];
                if inside.contains(&u) && inside.contains(&v) {
                    self.edge_alive[e] = false;
                }
            }
        }
        debug_assert!(self.balls[id].alive);
    }

    fn near_same_param(&self, center: PointId, radius: f64, param: f64, eps: f64) -> bool {
        self.balls.iter().any(|b| {
            b.param == param && self.points.dist(center, b.center) - b.radius - radius <= param / eps + METRIC_TOL
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Keyed(f64, usize);

impl Eq for Keyed {}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs the ball-collection procedure over `X` and emits the cluster family.
///
/// Collections `C_i`, `i < t + ceil(log2(80/eps))`, start from the edges of a
/// `(1 + eps/4)`-spanner of `X`. At level `j` the radius parameter is
/// `r = 2^(j (t + ceil(log2(80/eps))) + i)`; candidates are balls at
/// `eps r`-net points with radius `r`, `2r` or `4r`, taken in order of largest
/// potential decrease (re-evaluated lazily).
pub fn identify_heavy_clusters(x_ids: &[PointId], points: &PointSet, eps: f64, t: usize) -> Result<ClusterFamily> {
    let mut xs = x_ids.to_vec();
    xs.sort_unstable();
    xs.dedup();
    let mut family = ClusterFamily::default();
    if xs.len() < 2 {
        return Ok(family);
    }
    let spanner: WeightedGraph = greedy_spanner_over(points, &xs, eps / 4.0, SpannerMode::Auto)?;
    let local: rustc_hash::FxHashMap<PointId, usize> = xs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let edges: Vec<(usize, usize, f64)> = spanner
        .sorted_edges()
        .iter()
        .map(|e| (local[&e.u], local[&e.v], e.w))
        .collect();
    let mut incident = vec![Vec::new(); xs.len()];
    for (k, &(a, b, _)) in edges.iter().enumerate() {
        incident[a].push(k);
        incident[b].push(k);
    }
    let diam = points.diameter_of(&xs);
    let stride = t + (80.0 / eps).log2().ceil() as usize;
    let index = SpatialIndex::new(points, &xs, 1.0);
    let mut seen_sets = rustc_hash::FxHashSet::default();
    for i in 0..stride {
        let mut col = Collection {
            points,
            xs: &xs,
            local: &local,
            index: &index,
            edges: &edges,
            incident: &incident,
            edge_alive: vec![true; edges.len()],
            balls: Vec::new(),
            cover: vec![None; xs.len()],
        };
        for j in 0.. {
            let exp = j * stride + i;
            if exp > 62 {
                break;
            }
            let r = 2f64.powi(exp as i32);
            if r > 2.0 * diam {
                break;
            }
            let centers = if eps * r <= 1.0 { xs.clone() } else { build_net(&xs, eps * r, points)? };
            let cands: Vec<(PointId, f64)> = centers
                .iter()
                .flat_map(|&c| [r, 2.0 * r, 4.0 * r].map(|rad| (c, rad)))
                .collect();
            family.candidates += cands.len();
            let mut heap: BinaryHeap<Keyed> = cands
                .iter()
                .enumerate()
                .map(|(k, &(c, rad))| Keyed(col.effect(c, rad).decrease, k))
                .collect();
            while let Some(Keyed(_, k)) = heap.pop() {
                let (c, rad) = cands[k];
                let fx = col.effect(c, rad);
                if let Some(top) = heap.peek() {
                    if fx.decrease < top.0 - METRIC_TOL {
                        heap.push(Keyed(fx.decrease, k));
                        continue;
                    }
                }
                if fx.decrease >= 2.0 * rad / 10.0 && fx.contains_something && !col.near_same_param(c, rad, r, eps) {
                    col.insert(c, rad, r, fx);
                    family.insertions += 1;
                    let members = emit_cluster(points, &index, c, rad, eps, t)?;
                    if seen_sets.insert(members.clone()) {
                        family.clusters.push(HeavyCluster {
                            members,
                            center: c,
                            radius: rad,
                            delta: eps * rad / (8.0 * 2f64.powi(t as i32)),
                            collection: i,
                            level: j,
                        });
                    }
                }
            }
        }
    }
    Ok(family)
}

fn emit_cluster(
    points: &PointSet,
    index: &SpatialIndex,
    center: PointId,
    radius: f64,
    eps: f64,
    t: usize,
) -> Result<Vec<PointId>> {
    let ball = index.within(points, center, 2.0 * radius / eps);
    let delta = eps * radius / (8.0 * 2f64.powi(t as i32));
    if delta <= 1.0 {
        Ok(ball)
    } else {
        let mut net = build_net(&ball, delta, points)?;
        net.sort_unstable();
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::line;

    #[test]
    fn collinear_points_need_no_clusters() {
        let p = line(3).normalized().unwrap();
        let f = identify_heavy_clusters(&[0, 1, 2], &p, 0.25, 12).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn triangle_is_covered() {
        let s = 3f64.sqrt() / 2.0;
        let p = PointSet::euclidean(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s]], vec![true; 3])
            .unwrap()
            .normalized()
            .unwrap();
        let f = identify_heavy_clusters(&[0, 1, 2], &p, 0.25, 12).unwrap();
        assert!(f.clusters.iter().any(|c| c.members == vec![0, 1, 2]));
    }
}
