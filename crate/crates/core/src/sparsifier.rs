//! Splits a net-respecting banyan into `q`-sparse subgraphs by excising heavy
//! balls, with terminal pairs rewired through each ball's center.

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use crate::error::{Error, Result};
use crate::forest::{ForestSolution, TerminalPair};
use crate::graph::{Edge, UnionFind, WeightedGraph};
use crate::hierarchy::NetHierarchy;
use crate::metric::{PointId, PointSet, SpatialIndex, METRIC_TOL};
use crate::oracles;

pub const DEFAULT_CUT_CONSTANT: f64 = 64.0;
pub const DEFAULT_SCAN_SLACK: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    /// Target sparsity of every emitted piece.
    pub q: f64,
    /// A chosen radius may cut at most `cut_constant * q` short edges.
    pub cut_constant: f64,
    /// Balls are excised once heavier than `(q / scan_slack) 2^i`, leaving room
    /// for the excised pieces, which are only sparse up to a packing factor.
    pub scan_slack: f64,
}

impl SparsifyParams {
    pub fn new(q: f64) -> Self {
        SparsifyParams {
            q,
            cut_constant: DEFAULT_CUT_CONSTANT,
            scan_slack: DEFAULT_SCAN_SLACK,
        }
    }

    pub fn scan_threshold(&self) -> f64 {
        self.q / self.scan_slack
    }
}

/// A ball found by the scan: `w(B(center, 2 * 2^level)) > q 2^level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyBall {
    pub level: usize,
    pub center: PointId,
    pub weight: f64,
}

/// One excision, in the order performed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcisionEvent {
    pub index: usize,
    pub level: usize,
    pub center: PointId,
    pub radius: f64,
    pub ball_weight: f64,
    pub cut_edges: usize,
    pub removed: usize,
    pub retained: usize,
    pub patch_weight: f64,
}

#[derive(Debug, Clone)]
pub struct SparseSubproblem {
    pub graph: WeightedGraph,
    pub real_ids: Vec<PointId>,
    pub terminals: Vec<TerminalPair>,
    /// Excisions that shaped this piece: every event for the residual graph,
    /// the creating event for an excised ball.
    pub provenance: Vec<ExcisionEvent>,
}

#[derive(Debug, Clone)]
pub struct Sparsified {
    /// The residual graph first, then one piece per excision.
    pub subproblems: Vec<SparseSubproblem>,
    pub events: Vec<ExcisionEvent>,
    /// Both copies of every patch tree plus connectivity repairs.
    pub patch_weight: f64,
    /// Heavy balls whose excision would not lower the residual weight.
    pub exhausted: usize,
}

impl Sparsified {
    pub fn total_vertices(&self) -> usize {
        self.subproblems.iter().map(|s| s.graph.num_vertices()).sum()
    }
}

/// Weight of edges with both endpoints within `r` of `center`.
pub fn ball_weight(g: &WeightedGraph, points: &PointSet, index: &SpatialIndex, center: PointId, r: f64) -> f64 {
    let inside: HashSet<PointId> = index.within(points, center, r).into_iter().collect();
    let mut w = 0.0;
    for &u in &inside {
        for (v, wt) in g.neighbors(u) {
            if u < v && inside.contains(&v) {
                w += wt;
            }
        }
    }
    w
}

/// Scans levels upward from `from_level` and returns the first level whose
/// heaviest `B(p, 2 * 2^i)` (over `p` in `H_i` present in `g`) exceeds `q 2^i`.
pub fn heavy_ball_scan(g: &WeightedGraph, h: &NetHierarchy, points: &PointSet, q: f64) -> Option<HeavyBall> {
    scan_from(g, h, points, q, 0, &HashSet::default())
}

fn scan_from(
    g: &WeightedGraph,
    h: &NetHierarchy,
    points: &PointSet,
    q: f64,
    from_level: usize,
    skip: &HashSet<(usize, PointId)>,
) -> Option<HeavyBall> {
    if g.num_edges() == 0 {
        return None;
    }
    let vs = g.sorted_vertices();
    for i in from_level..h.num_levels() {
        let scale = 2f64.powi(i as i32);
        let index = SpatialIndex::new(points, &vs, 2.0 * scale);
        let mut best: Option<HeavyBall> = None;
        for &p in h.level(i) {
            if !g.contains(p) || skip.contains(&(i, p)) {
                continue;
            }
            let w = ball_weight(g, points, &index, p, 2.0 * scale);
            if best.is_none_or(|b| w > b.weight) {
                best = Some(HeavyBall {
                    level: i,
                    center: p,
                    weight: w,
                });
            }
        }
        if let Some(b) = best {
            if b.weight > q * scale {
                return Some(b);
            }
        }
    }
    None
}

/// Largest `w(B(p, 2^(i+1))) / 2^(i+1)` over levels `i` and net points `p` of
/// `H_i` present in `g`. A graph is `q`-sparse when this is at most `q`.
pub fn sparsity_ratio(g: &WeightedGraph, h: &NetHierarchy, points: &PointSet) -> f64 {
    let vs = g.sorted_vertices();
    let mut worst = 0.0f64;
    if g.num_edges() == 0 {
        return 0.0;
    }
    for i in 0..h.num_levels() {
        let r = 2f64.powi(i as i32 + 1);
        let index = SpatialIndex::new(points, &vs, r);
        for &p in h.level(i) {
            if g.contains(p) {
                worst = worst.max(ball_weight(g, points, &index, p, r) / r);
            }
        }
    }
    worst
}

/// Short edges (length at most `short`) with exactly one endpoint within `r` of `p`.
fn cut_count(edges: &[(f64, f64, f64)], short: f64, r: f64) -> usize {
    let lim = r + METRIC_TOL;
    edges
        .iter()
        .filter(|&&(da, db, w)| w <= short && ((da <= lim) != (db <= lim)))
        .count()
}

/// First radius in `[2 * 2^i, 4 * 2^i]` (lower end, midpoints between vertex
/// distances, upper end) cutting at most `limit` short edges; the least-cutting
/// radius when none qualifies.
fn select_radius(g: &WeightedGraph, points: &PointSet, p: PointId, level: usize, limit: f64) -> (f64, usize) {
    let scale = 2f64.powi(level as i32);
    let (lo, hi) = (2.0 * scale, 4.0 * scale);
    let index = SpatialIndex::new(points, &g.sorted_vertices(), hi);
    let near = index.within(points, p, hi + scale);
    let mut dists: Vec<f64> = near.iter().map(|&v| points.dist(p, v)).filter(|&d| d > lo && d < hi).collect();
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    let mut cands = vec![lo];
    cands.extend(dists.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    cands.push(hi);
    let near_set: HashSet<PointId> = near.iter().copied().collect();
    let mut edges = Vec::new();
    for &u in &near {
        for (v, w) in g.neighbors(u) {
            if w <= scale && (!near_set.contains(&v) || u < v) {
                edges.push((points.dist(p, u), points.dist(p, v), w));
            }
        }
    }
    let mut best = (hi, usize::MAX);
    for r in cands {
        let c = cut_count(&edges, scale, r);
        if (c as f64) <= limit {
            return (r, c);
        }
        if c < best.1 {
            best = (r, c);
        }
    }
    best
}

/// Connects the components of `g` over its vertices with shortest metric
/// edges (Kruskal on the complete graph, seeded with `g`'s edges). Returns the
/// added weight.
fn repair_connectivity(g: &mut WeightedGraph, points: &PointSet) -> f64 {
    let comps = g.components();
    if comps.len() <= 1 {
        return 0.0;
    }
    let mut cand = Vec::new();
    for a in 0..comps.len() {
        for b in a + 1..comps.len() {
            let mut best = Edge::new(0, 0, f64::INFINITY);
            for &x in &comps[a] {
                for &y in &comps[b] {
                    let d = points.dist(x, y);
                    let e = Edge::new(x, y, d);
                    if crate::graph::edge_order(&e, &best).is_lt() {
                        best = e;
                    }
                }
            }
            cand.push((a, b, best));
        }
    }
    cand.sort_by(|x, y| crate::graph::edge_order(&x.2, &y.2));
    let mut uf = UnionFind::new(comps.len());
    let mut added = 0.0;
    for (a, b, e) in cand {
        if uf.union(a, b) {
            g.add_edge(e.u, e.v, e.w);
            added += e.w;
        }
    }
    added
}

/// Repeatedly excises heavy balls from `g` (scanning levels bottom-up) until
/// no ball `B(p, 2 * 2^i)` with `p` in `H_i` weighs more than `(q / slack) 2^i`.
///
/// Inside an excised ball only the endpoints of edges leaving it and the center
/// survive; inner edges move to a new piece, and a minimum spanning tree of the
/// survivors is added to both the residual graph and the piece. A pair with one
/// endpoint removed becomes `(survivor, p)` in the residual list and
/// `(removed, p)` in the piece; a pair with both removed moves to the piece.
pub fn sparsify(
    g: &WeightedGraph,
    h: &NetHierarchy,
    points: &PointSet,
    terminals: &[TerminalPair],
    params: &SparsifyParams,
) -> Result<Sparsified> {
    if !(params.q > 0.0 && params.scan_slack >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "q = {} must be positive and scan slack {} at least 1",
            params.q, params.scan_slack
        )));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    for &(a, b) in terminals {
        for x in [a, b] {
            if !g.contains(x) {
                return Err(Error::UnknownId(x));
            }
        }
    }
    let mut work = g.clone();
    let mut pairs: Vec<TerminalPair> = terminals.iter().copied().filter(|(a, b)| a != b).collect();
    let mut pieces = Vec::new();
    let mut events: Vec<ExcisionEvent> = Vec::new();
    let mut exhausted: HashSet<(usize, PointId)> = HashSet::default();
    let mut patch_weight = 0.0;
    let mut level = 0;
    while let Some(ball) = scan_from(&work, h, points, params.scan_threshold(), level, &exhausted) {
        level = ball.level;
        let p = ball.center;
        let (radius, cut) = select_radius(&work, points, p, level, params.cut_constant * params.q);
        let index = SpatialIndex::new(points, &work.sorted_vertices(), radius);
        let inside: HashSet<PointId> = index.within(points, p, radius).into_iter().collect();
        let mut retained: HashSet<PointId> = [p].into_iter().collect();
        let mut inner = Vec::new();
        for e in work.sorted_edges() {
            match (inside.contains(&e.u), inside.contains(&e.v)) {
                (true, true) => inner.push(e),
                (true, false) => {
                    retained.insert(e.u);
                }
                (false, true) => {
                    retained.insert(e.v);
                }
                _ => {}
            }
        }
        let mut kept: Vec<PointId> = retained.iter().copied().collect();
        kept.sort_unstable();
        let patch = oracles::mst(&kept, points);
        let inner_weight: f64 = inner.iter().map(|e| e.w).sum();
        if inner_weight <= patch.total_weight + METRIC_TOL {
            exhausted.insert((level, p));
            continue;
        }
        let mut inside_sorted: Vec<PointId> = inside.iter().copied().collect();
        inside_sorted.sort_unstable();
        let mut piece = WeightedGraph::new(&inside_sorted);
        for e in inner.iter().chain(&patch.edges) {
            piece.add_edge(e.u, e.v, e.w);
        }
        let repair = repair_connectivity(&mut piece, points);
        let removed: HashSet<PointId> = inside.difference(&retained).copied().collect();
        let residual_vs: Vec<PointId> = work.sorted_vertices().into_iter().filter(|v| !removed.contains(v)).collect();
        let mut next = WeightedGraph::new(&residual_vs);
        for e in work.sorted_edges() {
            if !(inside.contains(&e.u) && inside.contains(&e.v)) {
                next.add_edge(e.u, e.v, e.w);
            }
        }
        for e in &patch.edges {
            next.add_edge(e.u, e.v, e.w);
        }
        let (stay, moved) = rewire(&pairs, &removed, p);
        pairs = stay;
        let event = ExcisionEvent {
            index: events.len(),
            level,
            center: p,
            radius,
            ball_weight: ball.weight,
            cut_edges: cut,
            removed: removed.len(),
            retained: kept.len(),
            patch_weight: 2.0 * patch.total_weight + repair,
        };
        log::debug!(
            "excision {}: level {} center {} radius {:.3} removed {} retained {}",
            event.index,
            level,
            p,
            radius,
            event.removed,
            event.retained
        );
        patch_weight += event.patch_weight;
        pieces.push(subproblem(piece, moved, vec![event.clone()], points));
        events.push(event);
        work = next;
    }
    let mut subproblems = vec![subproblem(work, pairs, events.clone(), points)];
    subproblems.extend(pieces);
    Ok(Sparsified {
        subproblems,
        events,
        patch_weight,
        exhausted: exhausted.len(),
    })
}

fn subproblem(
    graph: WeightedGraph,
    terminals: Vec<TerminalPair>,
    provenance: Vec<ExcisionEvent>,
    points: &PointSet,
) -> SparseSubproblem {
    let real_ids = graph.sorted_vertices().into_iter().filter(|&v| points.is_real(v)).collect();
    SparseSubproblem {
        graph,
        real_ids,
        terminals,
        provenance,
    }
}

/// Splits `pairs` into (residual list, piece list) for an excision centered at `p`.
pub fn rewire(pairs: &[TerminalPair], removed: &HashSet<PointId>, p: PointId) -> (Vec<TerminalPair>, Vec<TerminalPair>) {
    let mut stay = Vec::new();
    let mut moved = Vec::new();
    for &(a, b) in pairs {
        match (removed.contains(&a), removed.contains(&b)) {
            (false, false) => stay.push((a, b)),
            (true, true) => moved.push((a, b)),
            (true, false) => {
                if b != p {
                    stay.push((b, p));
                }
                moved.push((a, p));
            }
            (false, true) => {
                if a != p {
                    stay.push((a, p));
                }
                moved.push((b, p));
            }
        }
    }
    (stay, moved)
}

/// Unions per-piece solutions (shared edges counted once, cycles dropped) and
/// checks every original pair by union-find.
pub fn merge_solutions(
    solutions: &[ForestSolution],
    subproblems: &[SparseSubproblem],
    original: &[TerminalPair],
) -> Result<ForestSolution> {
    if solutions.len() != subproblems.len() {
        return Err(Error::InvalidParameter(format!(
            "{} solutions for {} subproblems",
            solutions.len(),
            subproblems.len()
        )));
    }
    for (sol, sp) in solutions.iter().zip(subproblems) {
        sol.audit(&sp.terminals)?;
    }
    let merged = ForestSolution::from_edges(solutions.iter().flat_map(|s| s.edges.iter().copied()));
    let mut ids: Vec<PointId> = merged.components.keys().copied().collect();
    ids.extend(original.iter().flat_map(|&(a, b)| [a, b]));
    ids.sort_unstable();
    ids.dedup();
    let local: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut uf = UnionFind::new(ids.len());
    for e in &merged.edges {
        uf.union(local[&e.u], local[&e.v]);
    }
    for &(a, b) in original {
        if a != b && !uf.same(local[&a], local[&b]) {
            return Err(Error::TerminalDisconnected(a, b));
        }
    }
    Ok(merged)
}
