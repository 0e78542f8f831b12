//! Nets and net hierarchies.

use std::collections::BTreeSet;

use log::warn;

use crate::error::{Error, Result};
use crate::metric::{PointId, PointSet, SpatialIndex, METRIC_TOL};

/// Greedy `gamma`-net of `ids`, scanning in ascending id order.
///
/// The result satisfies packing (pairwise distance at least `gamma`) and strict
/// covering (every input id is at distance `< gamma` from some output id).
pub fn build_net(ids: &[PointId], gamma: f64, points: &PointSet) -> Result<Vec<PointId>> {
    if ids.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("net spacing {gamma} must be positive")));
    }
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut net = Vec::new();
    if points.is_euclidean() {
        let mut index = GrowingGrid::new(gamma);
        for &v in &sorted {
            if !index.covers(points, v, gamma) {
                index.insert(points, v);
                net.push(v);
            }
        }
    } else {
        for &v in &sorted {
            if !net.iter().any(|&c| points.dist(c, v) < gamma - METRIC_TOL) {
                net.push(v);
            }
        }
    }
    Ok(net)
}

/// Incrementally filled grid for the accelerated Euclidean net scan.
struct GrowingGrid {
    cell: f64,
    buckets: rustc_hash::FxHashMap<Vec<i64>, Vec<PointId>>,
}

impl GrowingGrid {
    fn new(cell: f64) -> Self {
        GrowingGrid {
            cell,
            buckets: Default::default(),
        }
    }

    fn key(&self, c: &[f64]) -> Vec<i64> {
        c.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, points: &PointSet, v: PointId) {
        let k = self.key(points.coords(v).unwrap());
        self.buckets.entry(k).or_default().push(v);
    }

    /// True when some inserted point is strictly within `gamma` of `v`.
    fn covers(&self, points: &PointSet, v: PointId, gamma: f64) -> bool {
        let c = points.coords(v).unwrap();
        let base = self.key(c);
        let dim = base.len();
        let mut offset = vec![-1i64; dim];
        let mut k = base.clone();
        loop {
            for (slot, (b, o)) in k.iter_mut().zip(base.iter().zip(&offset)) {
                *slot = b + o;
            }
            if let Some(bucket) = self.buckets.get(&k) {
                if bucket.iter().any(|&u| points.dist(u, v) < gamma - METRIC_TOL) {
                    return true;
                }
            }
            let mut axis = 0;
            loop {
                if axis == dim {
                    return false;
                }
                offset[axis] += 1;
                if offset[axis] > 1 {
                    offset[axis] = -1;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }
}

/// Nested `2^i`-nets `H_0 ⊇ H_1 ⊇ … ⊇ H_P` with `|H_P| = 1`.
#[derive(Debug, Clone)]
pub struct NetHierarchy {
    levels: Vec<Vec<PointId>>,
    /// `parents[i][k]`: all ids of `H_i` strictly within `2^i` of `levels[i-1][k]`.
    parents: Vec<Vec<Vec<PointId>>>,
    /// `children[i][k]`: ids of `H_{i-1}` listing `levels[i][k]` as a parent.
    children: Vec<Vec<Vec<PointId>>>,
    /// Highest level at which each id is a net point (`usize::MAX` if absent).
    top: Vec<usize>,
}

impl NetHierarchy {
    /// Builds the hierarchy over every point of `points`.
    pub fn build(points: &PointSet) -> Result<Self> {
        let ids: Vec<_> = points.ids().collect();
        Self::build_over(points, &ids)
    }

    /// Builds the hierarchy over a subset of the points.
    ///
    /// Level `i` is the greedy `2^i`-net of level `i-1`. Levels are added until
    /// a single point remains; this is `ceil(log2 diam)` levels unless the
    /// diameter is an exact power of two, in which case one more level is needed
    /// for strict covering.
    pub fn build_over(points: &PointSet, ids: &[PointId]) -> Result<Self> {
        if !points.is_normalized() {
            return Err(Error::NotNormalized);
        }
        if ids.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut base = ids.to_vec();
        base.sort_unstable();
        base.dedup();
        let mut levels = vec![base];
        let mut parents = vec![Vec::new()];
        let mut children = vec![Vec::new()];
        while levels.last().unwrap().len() > 1 {
            let i = levels.len();
            let gamma = (2.0f64).powi(i as i32);
            let below = levels.last().unwrap();
            let net = build_net(below, gamma, points)?;
            let index = SpatialIndex::new(points, &net, gamma);
            let mut par = Vec::with_capacity(below.len());
            let mut ch = vec![Vec::new(); net.len()];
            for &v in below {
                let mut ps = Vec::new();
                index.for_each_within(points, v, gamma, |u, d| {
                    if d < gamma - METRIC_TOL || u == v {
                        ps.push(u);
                    }
                });
                ps.sort_unstable();
                for &u in &ps {
                    let k = net.binary_search(&u).unwrap();
                    ch[k].push(v);
                }
                par.push(ps);
            }
            for c in &mut ch {
                c.sort_unstable();
            }
            levels.push(net);
            parents.push(par);
            children.push(ch);
        }
        if levels.len() > 65 {
            warn!("net hierarchy has {} levels; aspect ratio is very large", levels.len());
        }
        let mut top = vec![usize::MAX; points.len()];
        for (i, level) in levels.iter().enumerate() {
            for &v in level {
                top[v] = i;
            }
        }
        Ok(NetHierarchy {
            levels,
            parents,
            children,
            top,
        })
    }

    /// Index of the top level `P`.
    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &[PointId] {
        &self.levels[i.min(self.top_level())]
    }

    /// Level `i`, where negative levels mean `H_0`.
    pub fn level_signed(&self, i: i64) -> &[PointId] {
        self.level(i.max(0) as usize)
    }

    pub fn ids(&self) -> &[PointId] {
        &self.levels[0]
    }

    pub fn contains(&self, v: PointId) -> bool {
        v < self.top.len() && self.top[v] != usize::MAX
    }

    /// True if `v` belongs to `H_i` (negative levels are `H_0`).
    pub fn in_level(&self, v: PointId, i: i64) -> bool {
        self.contains(v) && (i <= 0 || self.top[v] >= i as usize)
    }

    /// Highest level containing `v`.
    pub fn top_of(&self, v: PointId) -> Option<usize> {
        self.contains(v).then(|| self.top[v])
    }

    /// Covering parents of `v ∈ H_{i-1}` at level `i`.
    pub fn parents(&self, i: usize, v: PointId) -> &[PointId] {
        let k = self.levels[i - 1].binary_search(&v).expect("id in level below");
        &self.parents[i][k]
    }

    pub fn children(&self, i: usize, v: PointId) -> &[PointId] {
        let k = self.levels[i].binary_search(&v).expect("id in level");
        &self.children[i][k]
    }

    /// Net point of level `i` reached by following nearest parents from `v`,
    /// together with the visited chain (starting at `v`).
    pub fn ancestor_chain(&self, points: &PointSet, v: PointId, i: usize) -> Vec<PointId> {
        let mut chain = vec![v];
        let mut cur = v;
        let start = self.top[v].min(i);
        for lvl in (start + 1)..=i.min(self.top_level()) {
            let ps = self.parents(lvl, cur);
            let next = *ps
                .iter()
                .min_by(|&&a, &&b| points.dist(cur, a).total_cmp(&points.dist(cur, b)).then(a.cmp(&b)))
                .expect("covered");
            if next != cur {
                chain.push(next);
            }
            cur = next;
        }
        chain
    }

    /// Closed ball `B(center, r)` restricted to the hierarchy's ids, found by descending
    /// from the top level.
    pub fn ball_query(&self, points: &PointSet, center: PointId, r: f64) -> Result<Vec<PointId>> {
        points.check_id(center)?;
        let mut frontier: Vec<PointId> = self.levels[self.top_level()].clone();
        for i in (1..=self.top_level()).rev() {
            let reach = r + (2.0f64).powi(i as i32 + 1) + METRIC_TOL;
            frontier.retain(|&x| points.dist(center, x) <= reach);
            let mut next = BTreeSet::new();
            for &x in &frontier {
                next.extend(self.children(i, x).iter().copied());
            }
            frontier = next.into_iter().collect();
        }
        frontier.retain(|&x| points.dist(center, x) <= r + METRIC_TOL);
        Ok(frontier)
    }

    /// Checks packing, strict covering and nesting at every level.
    pub fn audit(&self, points: &PointSet) -> std::result::Result<(), String> {
        for i in 1..self.levels.len() {
            let gamma = (2.0f64).powi(i as i32);
            let lvl = &self.levels[i];
            for (k, &a) in lvl.iter().enumerate() {
                if self.levels[i - 1].binary_search(&a).is_err() {
                    return Err(format!("H_{i} not nested: {a}"));
                }
                for &b in &lvl[k + 1..] {
                    if points.dist(a, b) < gamma - METRIC_TOL {
                        return Err(format!("packing fails at level {i}: {a},{b}"));
                    }
                }
            }
            for &v in &self.levels[i - 1] {
                if !lvl.iter().any(|&c| points.dist(c, v) < gamma - METRIC_TOL || c == v) {
                    return Err(format!("covering fails at level {i}: {v}"));
                }
            }
        }
        if self.levels.last().unwrap().len() != 1 {
            return Err("top level is not a single point".into());
        }
        Ok(())
    }
}

/// Upper estimate of the doubling dimension: log2 of the largest greedy cover
/// of a sampled ball by balls of half the radius.
pub fn estimate_doubling_dimension(points: &PointSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    let ids: Vec<_> = points.ids().collect();
    let diam = points.diameter();
    let stride = n.div_ceil(200).max(1);
    let mut worst = 1usize;
    let min_r = 1.0f64;
    let index = SpatialIndex::new(points, &ids, 1.0_f64.max(diam / 64.0));
    let mut r = min_r;
    while r <= 2.0 * diam {
        for c in (0..n).step_by(stride) {
            let ball = index.within(points, c, r);
            worst = worst.max(greedy_cover(points, &ball, r / 2.0));
        }
        r *= 2.0;
    }
    Ok((worst as f64).log2())
}

/// Number of closed balls of radius `radius` centered at members needed to cover
/// `ids`, chosen greedily by maximum newly covered count (ties by smaller id).
pub fn greedy_cover(points: &PointSet, ids: &[PointId], radius: f64) -> usize {
    let m = ids.len();
    if m == 0 {
        return 0;
    }
    let cover: Vec<Vec<usize>> = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| points.dist(ids[a], ids[b]) <= radius + METRIC_TOL)
                .collect()
        })
        .collect();
    let mut covered = vec![false; m];
    let mut left = m;
    let mut count = 0;
    while left > 0 {
        let (best, _) = (0..m)
            .map(|a| (a, cover[a].iter().filter(|&&b| !covered[b]).count()))
            .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))
            .unwrap();
        for &b in &cover[best] {
            if !covered[b] {
                covered[b] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

/// Packing diagnostic: a subset with minimum spacing `b` inside a ball of radius
/// `radius` has at most `(2 radius / b)^(c ddim)` members.
pub fn packing_bound(radius: f64, spacing: f64, ddim: f64, c: f64) -> f64 {
    (2.0 * radius / spacing).max(1.0).powf(c * ddim.max(1.0))
}

/// MST-weight diagnostic: `w(MST(S')) <= 4 |S'|^(1-1/d) diam(S')`.
/// Returns the ratio of the left side to the right side; a ratio above 1 is logged.
pub fn mst_weight_diagnostic(points: &PointSet, ids: &[PointId], dim: f64) -> f64 {
    if ids.len() < 2 {
        return 0.0;
    }
    let w = crate::oracles::mst(ids, points).total_weight;
    let bound = 4.0 * (ids.len() as f64).powf(1.0 - 1.0 / dim) * points.diameter_of(ids);
    let ratio = w / bound;
    if ratio > 1.0 {
        warn!("MST weight {w:.3} exceeds dimension bound {bound:.3}");
    }
    ratio
}
