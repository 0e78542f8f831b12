//! Exact and classical baseline solvers used as ground truth.
//!
//! Everything here is deliberately independent of the approximation pipeline:
//! Kruskal for spanning trees, Dreyfus–Wagner for exact Steiner trees,
//! partition enumeration for exact forests, and moat growing for the
//! 2-approximate forest baseline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::forest::{ForestSolution, TerminalPair};
use crate::graph::{edge_order, Edge, UnionFind, WeightedGraph};
use crate::metric::{PointId, PointSet};

/// Size limits for the exponential solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBudget {
    pub max_vertices: usize,
    pub max_terminals: usize,
    pub time_limit: Duration,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_vertices: 9,
            max_terminals: 12,
            time_limit: Duration::from_secs(60),
        }
    }
}

/// Exact minimum spanning tree of `ids` under the metric (Kruskal).
pub fn mst(ids: &[PointId], points: &PointSet) -> ForestSolution {
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();
    if n < 2 {
        return ForestSolution::empty();
    }
    // Prim on the complete graph is O(n^2); Kruskal over all pairs is O(n^2 log n).
    // Kruskal keeps the tie-break explicit, Prim is used above a size threshold.
    if n > 600 {
        return prim(&ids, points);
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            edges.push(Edge::new(ids[a], ids[b], points.dist(ids[a], ids[b])));
        }
    }
    edges.sort_by(edge_order);
    let local: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for e in edges {
        if uf.union(local[&e.u], local[&e.v]) {
            tree.push(e);
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    ForestSolution::from_edges(tree)
}

fn prim(ids: &[PointId], points: &PointSet) -> ForestSolution {
    let n = ids.len();
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![usize::MAX; n];
    let mut done = vec![false; n];
    best[0] = 0.0;
    let mut tree = Vec::with_capacity(n - 1);
    for _ in 0..n {
        let mut x = usize::MAX;
        for k in 0..n {
            if !done[k] && (x == usize::MAX || best[k] < best[x]) {
                x = k;
            }
        }
        done[x] = true;
        if from[x] != usize::MAX {
            tree.push(Edge::new(ids[from[x]], ids[x], best[x]));
        }
        for k in 0..n {
            if !done[k] {
                let d = points.dist(ids[x], ids[k]);
                if d < best[k] {
                    best[k] = d;
                    from[k] = x;
                }
            }
        }
    }
    ForestSolution::from_edges(tree)
}

/// Weight of the minimum spanning tree of `ids`.
pub fn mst_weight(ids: &[PointId], points: &PointSet) -> f64 {
    mst(ids, points).total_weight
}

/// Minimum spanning forest of a graph's edges.
pub fn graph_mst(g: &WeightedGraph) -> ForestSolution {
    ForestSolution::from_edges(g.edges().iter().copied())
}

/// Exact shortest path in a graph.
pub fn shortest_path(g: &WeightedGraph, u: PointId, v: PointId) -> Result<(f64, Vec<PointId>)> {
    g.shortest_path(u, v)
}

/// Distance oracle plus path expansion used by the Dreyfus–Wagner solver.
trait Closure {
    fn n(&self) -> usize;
    fn d(&self, a: usize, b: usize) -> f64;
    fn expand(&self, a: usize, b: usize, out: &mut Vec<Edge>);
}

struct MetricClosure<'a> {
    ids: &'a [PointId],
    points: &'a PointSet,
}

impl Closure for MetricClosure<'_> {
    fn n(&self) -> usize {
        self.ids.len()
    }
    fn d(&self, a: usize, b: usize) -> f64 {
        self.points.dist(self.ids[a], self.ids[b])
    }
    fn expand(&self, a: usize, b: usize, out: &mut Vec<Edge>) {
        if a != b {
            out.push(Edge::new(self.ids[a], self.ids[b], self.d(a, b)));
        }
    }
}

/// Shortest-path closure of a graph (all pairs by repeated Dijkstra).
struct GraphClosure {
    ids: Vec<PointId>,
    dist: Vec<Vec<f64>>,
    next: Vec<Vec<usize>>,
    weight: HashMap<(PointId, PointId), f64>,
}

impl GraphClosure {
    fn new(g: &WeightedGraph) -> Self {
        let ids = g.sorted_vertices();
        let n = ids.len();
        let pos: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        let mut next = vec![vec![usize::MAX; n]; n];
        let mut weight = HashMap::default();
        for e in g.edges() {
            weight.insert(e.key(), e.w);
        }
        // Floyd–Warshall keeps paths deterministic at this (tiny) scale.
        for (k, row) in dist.iter_mut().enumerate() {
            row[k] = 0.0;
            next[k][k] = k;
        }
        for e in g.sorted_edges() {
            let (a, b) = (pos[&e.u], pos[&e.v]);
            if e.w < dist[a][b] {
                dist[a][b] = e.w;
                dist[b][a] = e.w;
                next[a][b] = b;
                next[b][a] = a;
            }
        }
        for m in 0..n {
            for a in 0..n {
                if !dist[a][m].is_finite() {
                    continue;
                }
                for b in 0..n {
                    let nd = dist[a][m] + dist[m][b];
                    if nd < dist[a][b] {
                        dist[a][b] = nd;
                        next[a][b] = next[a][m];
                    }
                }
            }
        }
        GraphClosure {
            ids,
            dist,
            next,
            weight,
        }
    }
}

impl Closure for GraphClosure {
    fn n(&self) -> usize {
        self.ids.len()
    }
    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a][b]
    }
    fn expand(&self, a: usize, b: usize, out: &mut Vec<Edge>) {
        let mut cur = a;
        while cur != b {
            let nx = self.next[cur][b];
            let (u, v) = (self.ids[cur], self.ids[nx]);
            out.push(Edge::new(u, v, self.weight[&(u.min(v), u.max(v))]));
            cur = nx;
        }
    }
}

#[derive(Clone, Copy)]
enum Choice {
    Leaf,
    Split(u32),
    Move(u32),
}

/// Dreyfus–Wagner over terminal subsets. `terms` are closure indices.
fn dreyfus_wagner<C: Closure>(c: &C, terms: &[usize], deadline: Instant) -> Result<(f64, Vec<Edge>)> {
    let k = terms.len();
    if k <= 1 {
        return Ok((0.0, Vec::new()));
    }
    let n = c.n();
    let full = (1usize << k) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * n];
    let mut choice = vec![Choice::Leaf; (full + 1) * n];
    for (i, &t) in terms.iter().enumerate() {
        let m = 1usize << i;
        for v in 0..n {
            dp[m * n + v] = c.d(t, v);
            choice[m * n + v] = if v == t { Choice::Leaf } else { Choice::Move(t as u32) };
        }
    }
    let mut masks: Vec<usize> = (1..=full).filter(|m: &usize| m.count_ones() >= 2).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        if Instant::now() > deadline {
            return Err(Error::OracleBudget("time limit".into()));
        }
        let low = mask & mask.wrapping_neg();
        for v in 0..n {
            let mut best = f64::INFINITY;
            let mut arg = 0usize;
            // Enumerate submasks containing the lowest bit to visit each split once.
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let a = sub | low;
                if a != mask {
                    let val = dp[a * n + v] + dp[(mask ^ a) * n + v];
                    if val < best {
                        best = val;
                        arg = a;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
            dp[mask * n + v] = best;
            choice[mask * n + v] = Choice::Split(arg as u32);
        }
        // One relaxation pass suffices on a metric closure.
        let snapshot: Vec<f64> = dp[mask * n..(mask + 1) * n].to_vec();
        for v in 0..n {
            for (u, &su) in snapshot.iter().enumerate() {
                let val = su + c.d(u, v);
                if val < dp[mask * n + v] {
                    dp[mask * n + v] = val;
                    choice[mask * n + v] = Choice::Move(u as u32);
                }
            }
        }
    }
    let root = terms[k - 1];
    let mask = full ^ (1 << (k - 1));
    let mut edges = Vec::new();
    let mut stack = vec![(mask, root)];
    while let Some((m, v)) = stack.pop() {
        match choice[m * n + v] {
            Choice::Leaf => {}
            Choice::Move(u) => {
                let u = u as usize;
                c.expand(u, v, &mut edges);
                if m.count_ones() == 1 {
                    // u is the terminal itself
                } else {
                    stack.push((m, u));
                }
            }
            Choice::Split(a) => {
                let a = a as usize;
                stack.push((a, v));
                stack.push((m ^ a, v));
            }
        }
    }
    let value = dp[mask * n + root];
    Ok((value, edges))
}

fn check_terminals(xs: &[PointId], budget: &OracleBudget) -> Result<()> {
    if xs.len() > budget.max_terminals {
        return Err(Error::OracleBudget(format!(
            "{} terminals exceed the limit of {}",
            xs.len(),
            budget.max_terminals
        )));
    }
    Ok(())
}

/// Exact minimum Steiner tree of `x_ids` using any subset of `s_ids` as relays.
pub fn exact_steiner_tree(
    x_ids: &[PointId],
    s_ids: &[PointId],
    points: &PointSet,
    budget: &OracleBudget,
) -> Result<ForestSolution> {
    let mut xs = x_ids.to_vec();
    xs.sort_unstable();
    xs.dedup();
    check_terminals(&xs, budget)?;
    let mut all = xs.clone();
    all.extend(s_ids.iter().copied().filter(|s| !xs.contains(s)));
    all.sort_unstable();
    all.dedup();
    let pos: HashMap<PointId, usize> = all.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let terms: Vec<usize> = xs.iter().map(|x| pos[x]).collect();
    let closure = MetricClosure { ids: &all, points };
    let (_, edges) = dreyfus_wagner(&closure, &terms, Instant::now() + budget.time_limit)?;
    Ok(ForestSolution::from_edges(edges))
}

/// Exact minimum Steiner tree of `x_ids` inside graph `g` (edges restricted to `g`).
pub fn exact_graph_steiner_tree(g: &WeightedGraph, x_ids: &[PointId], budget: &OracleBudget) -> Result<ForestSolution> {
    let mut xs = x_ids.to_vec();
    xs.sort_unstable();
    xs.dedup();
    check_terminals(&xs, budget)?;
    let closure = GraphClosure::new(g);
    let pos: HashMap<PointId, usize> = closure.ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut terms = Vec::new();
    for x in &xs {
        terms.push(*pos.get(x).ok_or(Error::UnknownId(*x))?);
    }
    for w in terms.windows(2) {
        if !closure.dist[w[0]][w[1]].is_finite() {
            return Err(Error::Disconnected);
        }
    }
    let (_, edges) = dreyfus_wagner(&closure, &terms, Instant::now() + budget.time_limit)?;
    Ok(ForestSolution::from_edges(edges))
}

/// Groups terminals into classes forced together by the pairs.
fn terminal_groups(pairs: &[TerminalPair]) -> Vec<Vec<PointId>> {
    let mut ids: Vec<PointId> = pairs.iter().filter(|(a, b)| a != b).flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let pos: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut uf = UnionFind::new(ids.len());
    for &(a, b) in pairs {
        if a != b {
            uf.union(pos[&a], pos[&b]);
        }
    }
    let mut groups: HashMap<usize, Vec<PointId>> = HashMap::default();
    for &v in &ids {
        groups.entry(uf.find(pos[&v])).or_default().push(v);
    }
    let mut out: Vec<Vec<PointId>> = groups.into_values().collect();
    out.sort();
    out
}

/// Minimum over set partitions (restricted growth strings) of the terminal
/// groups of the summed per-block exact tree costs.
fn partition_search(
    groups: &[Vec<PointId>],
    mut tree: impl FnMut(&[PointId]) -> Result<ForestSolution>,
) -> Result<ForestSolution> {
    let m = groups.len();
    if m == 0 {
        return Ok(ForestSolution::empty());
    }
    let mut cache: HashMap<usize, ForestSolution> = HashMap::default();
    let mut rgs = vec![0usize; m];
    let mut best: Option<(f64, Vec<Edge>)> = None;
    loop {
        let blocks = rgs.iter().max().unwrap() + 1;
        let mut masks = vec![0usize; blocks];
        for (g, &b) in rgs.iter().enumerate() {
            masks[b] |= 1 << g;
        }
        let mut total = 0.0;
        let mut edges = Vec::new();
        for &mask in &masks {
            if !cache.contains_key(&mask) {
                let mut ids: Vec<PointId> = (0..m)
                    .filter(|g| mask >> g & 1 == 1)
                    .flat_map(|g| groups[g].iter().copied())
                    .collect();
                ids.sort_unstable();
                cache.insert(mask, tree(&ids)?);
            }
            let sol = &cache[&mask];
            total += sol.total_weight;
            edges.extend(sol.edges.iter().copied());
        }
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, edges));
        }
        // Next restricted growth string.
        let mut i = m - 1;
        loop {
            if i == 0 {
                let (_, edges) = best.unwrap();
                return Ok(ForestSolution::from_edges(edges));
            }
            let prefix_max = rgs[..i].iter().copied().max().unwrap();
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Exact optimum Steiner forest on the metric over `x_ids ∪ s_ids`.
pub fn brute_force_forest(
    x_ids: &[PointId],
    s_ids: &[PointId],
    pairs: &[TerminalPair],
    points: &PointSet,
    budget: &OracleBudget,
) -> Result<ForestSolution> {
    let mut all: Vec<PointId> = x_ids.iter().chain(s_ids).copied().collect();
    all.sort_unstable();
    all.dedup();
    if all.len() > budget.max_vertices {
        return Err(Error::OracleBudget(format!(
            "{} vertices exceed the limit of {}",
            all.len(),
            budget.max_vertices
        )));
    }
    let groups = terminal_groups(pairs);
    partition_search(&groups, |ids| {
        let steiner: Vec<PointId> = all.iter().copied().filter(|v| !ids.contains(v)).collect();
        exact_steiner_tree(ids, &steiner, points, budget)
    })
}

/// Exact optimum Steiner forest using only edges of `g`.
pub fn brute_force_graph_forest(g: &WeightedGraph, pairs: &[TerminalPair], budget: &OracleBudget) -> Result<ForestSolution> {
    if g.num_vertices() > budget.max_vertices {
        return Err(Error::OracleBudget(format!(
            "{} vertices exceed the limit of {}",
            g.num_vertices(),
            budget.max_vertices
        )));
    }
    let groups = terminal_groups(pairs);
    partition_search(&groups, |ids| exact_graph_steiner_tree(g, ids, budget))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event(f64, u32, u32);

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then(other.1.cmp(&self.1))
            .then(other.2.cmp(&self.2))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Moat-growing primal-dual 2-approximation for Steiner forest on the complete
/// metric graph over `x_ids`, followed by reverse deletion.
///
/// `candidates`, when given, restricts the edge set (used for very large inputs;
/// the guarantee then holds relative to the candidate graph).
pub fn primal_dual_forest(x_ids: &[PointId], pairs: &[TerminalPair], points: &PointSet) -> Result<ForestSolution> {
    primal_dual_on(x_ids, pairs, points, None)
}

pub fn primal_dual_on(
    x_ids: &[PointId],
    pairs: &[TerminalPair],
    points: &PointSet,
    candidates: Option<&WeightedGraph>,
) -> Result<ForestSolution> {
    let mut ids = x_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let pos: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let demands: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| {
            let pa = *pos.get(&a).ok_or(Error::UnknownId(a))?;
            let pb = *pos.get(&b).ok_or(Error::UnknownId(b))?;
            Ok((pa, pb))
        })
        .collect::<Result<_>>()?;
    if demands.is_empty() {
        return Ok(ForestSolution::empty());
    }
    let n = ids.len();
    let d = |a: usize, b: usize| points.dist(ids[a], ids[b]);
    let chosen = match candidates {
        None => dense_moats(n, &demands, &d),
        Some(g) => sparse_moats(n, &demands, &d, g, &pos)?,
    };
    // Reverse delete.
    let mut keep = vec![true; chosen.len()];
    for i in (0..chosen.len()).rev() {
        keep[i] = false;
        let mut uf = UnionFind::new(n);
        for (j, &(a, b)) in chosen.iter().enumerate() {
            if keep[j] {
                uf.union(a, b);
            }
        }
        if !demands.iter().all(|&(a, b)| uf.same(a, b)) {
            keep[i] = true;
        }
    }
    let edges = chosen
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(&(a, b), _)| Edge::new(ids[a], ids[b], d(a, b)));
    Ok(ForestSolution::from_edges(edges))
}

/// Moat growing on the complete graph in O(n^2) memory. Loads inside a
/// component grow uniformly, so the tightest edge between two components is
/// fixed while their activity is; `m` keeps that minimum slack per pair of
/// components, relative to each component's own growth.
fn dense_moats(n: usize, demands: &[(usize, usize)], d: &dyn Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut m = vec![0.0f64; n * n];
    let mut arg = vec![(0u32, 0u32); n * n];
    for a in 0..n {
        for b in 0..n {
            m[a * n + b] = if a == b { f64::INFINITY } else { d(a, b) };
            arg[a * n + b] = (a as u32, b as u32);
        }
    }
    let mut open: Vec<HashSet<usize>> = vec![HashSet::default(); n];
    for (p, &(a, b)) in demands.iter().enumerate() {
        open[a].insert(p);
        open[b].insert(p);
    }
    let mut active: Vec<bool> = open.iter().map(|o| !o.is_empty()).collect();
    let mut alive = vec![true; n];
    // Growth of component c at time t: grown[c] + (t - since[c]) while active.
    let mut grown = vec![0.0f64; n];
    let mut since = vec![0.0f64; n];
    let growth = |c: usize, t: f64, grown: &[f64], since: &[f64], active: &[bool]| grown[c] + if active[c] { t - since[c] } else { 0.0 };
    let event = |c: usize, x: usize, t: f64, m: &[f64], grown: &[f64], since: &[f64], active: &[bool]| {
        let rate = active[c] as u8 + active[x] as u8;
        if rate == 0 {
            return f64::INFINITY;
        }
        let slack = (m[c * n + x] - growth(c, t, grown, since, active) - growth(x, t, grown, since, active)).max(0.0);
        t + slack / rate as f64
    };
    let row = |c: usize, t: f64, m: &[f64], grown: &[f64], since: &[f64], active: &[bool], alive: &[bool]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for x in 0..n {
            if x != c && alive[x] {
                let e = event(c, x, t, m, grown, since, active);
                if e < best.0 {
                    best = (e, x);
                }
            }
        }
        best
    };
    let mut best: Vec<(f64, usize)> = (0..n).map(|c| row(c, 0.0, &m, &grown, &since, &active, &alive)).collect();
    let mut n_active = active.iter().filter(|&&a| a).count();
    let mut chosen = Vec::new();
    let mut now = 0.0f64;
    while n_active > 0 {
        let Some(c) = (0..n)
            .filter(|&c| alive[c])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
        else {
            break;
        };
        let (t, x) = best[c];
        if !t.is_finite() {
            break;
        }
        now = now.max(t);
        let (gc, gx) = (growth(c, now, &grown, &since, &active), growth(x, now, &grown, &since, &active));
        let (ua, ub) = arg[c * n + x];
        chosen.push((ua as usize, ub as usize));
        for y in 0..n {
            if alive[y] && y != c && y != x {
                let (vc, vx) = (m[c * n + y] - gc, m[x * n + y] - gx);
                let (v, a) = if vx < vc { (vx, arg[x * n + y]) } else { (vc, arg[c * n + y]) };
                m[c * n + y] = v;
                m[y * n + c] = v;
                arg[c * n + y] = a;
                arg[y * n + c] = (a.1, a.0);
            }
        }
        n_active -= active[c] as usize + active[x] as usize;
        let mut o = std::mem::take(&mut open[x]);
        let mut mine = std::mem::take(&mut open[c]);
        if o.len() > mine.len() {
            std::mem::swap(&mut o, &mut mine);
        }
        for p in o {
            if !mine.remove(&p) {
                mine.insert(p);
            }
        }
        active[c] = !mine.is_empty();
        active[x] = false;
        open[c] = mine;
        alive[x] = false;
        n_active += active[c] as usize;
        grown[c] = 0.0;
        since[c] = now;
        best[c] = row(c, now, &m, &grown, &since, &active, &alive);
        for y in 0..n {
            if !alive[y] || y == c {
                continue;
            }
            if best[y].1 == c || best[y].1 == x {
                best[y] = row(y, now, &m, &grown, &since, &active, &alive);
            } else {
                let e = event(y, c, now, &m, &grown, &since, &active);
                if e < best[y].0 || (e == best[y].0 && c < best[y].1) {
                    best[y] = (e, c);
                }
            }
        }
    }
    chosen
}

/// Moat growing over the edges of `g`, with a lazy event heap.
fn sparse_moats(
    n: usize,
    demands: &[(usize, usize)],
    d: &dyn Fn(usize, usize) -> f64,
    g: &WeightedGraph,
    pos: &HashMap<PointId, usize>,
) -> Result<Vec<(usize, usize)>> {
    let nbrs: Option<Vec<Vec<usize>>> = Some({
        let mut adj = vec![Vec::new(); n];
        for e in g.edges() {
            if let (Some(&a), Some(&b)) = (pos.get(&e.u), pos.get(&e.v)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        adj
    });

    let mut uf = UnionFind::new(n);
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut open: Vec<HashSet<usize>> = vec![HashSet::default(); n];
    for (p, &(a, b)) in demands.iter().enumerate() {
        open[a].insert(p);
        open[b].insert(p);
    }
    let mut active: Vec<bool> = (0..n).map(|v| !open[v].is_empty()).collect();
    let mut since = vec![0.0f64; n];
    let mut stored = vec![0.0f64; n];
    let mut time = 0.0f64;

    let load = |v: usize, uf: &mut UnionFind, stored: &[f64], since: &[f64], active: &[bool], t: f64| {
        let r = uf.find(v);
        stored[v] + if active[r] { t - since[r] } else { 0.0 }
    };

    let mut heap = BinaryHeap::new();
    let push_edges = |v: usize,
                      heap: &mut BinaryHeap<Event>,
                      uf: &mut UnionFind,
                      stored: &[f64],
                      since: &[f64],
                      active: &[bool],
                      t: f64| {
        let rv = uf.find(v);
        let lv = stored[v] + if active[rv] { t - since[rv] } else { 0.0 };
        let visit = |u: usize, heap: &mut BinaryHeap<Event>, uf: &mut UnionFind| {
            let ru = uf.find(u);
            if ru == rv {
                return;
            }
            let rate = active[ru] as u8 + active[rv] as u8;
            if rate == 0 {
                return;
            }
            let lu = stored[u] + if active[ru] { t - since[ru] } else { 0.0 };
            let slack = (d(u, v) - lu - lv).max(0.0);
            let (a, b) = (u.min(v) as u32, u.max(v) as u32);
            heap.push(Event(t + slack / rate as f64, a, b));
        };
        match &nbrs {
            Some(adj) => {
                for &u in &adj[v] {
                    visit(u, heap, uf);
                }
            }
            None => {
                for u in 0..n {
                    if u != v {
                        visit(u, heap, uf);
                    }
                }
            }
        }
    };

    for v in 0..n {
        if active[v] {
            push_edges(v, &mut heap, &mut uf, &stored, &since, &active, 0.0);
        }
    }
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut n_active = (0..n).filter(|&v| active[v]).count();
    while n_active > 0 {
        let Some(Event(t, a, b)) = heap.pop() else {
            return Err(Error::Disconnected);
        };
        let (a, b) = (a as usize, b as usize);
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        let rate = active[ra] as u8 + active[rb] as u8;
        if rate == 0 {
            continue;
        }
        let la = load(a, &mut uf, &stored, &since, &active, t);
        let lb = load(b, &mut uf, &stored, &since, &active, t);
        let slack = d(a, b) - la - lb;
        if slack > 1e-9 * d(a, b).max(1.0) {
            heap.push(Event(t + slack / rate as f64, a as u32, b as u32));
            continue;
        }
        time = time.max(t);
        // Freeze loads of both components at the merge time.
        for &r in &[ra, rb] {
            for &v in &members[r] {
                stored[v] += if active[r] { time - since[r] } else { 0.0 };
            }
        }
        let was = [(ra, active[ra]), (rb, active[rb])];
        n_active -= active[ra] as usize + active[rb] as usize;
        uf.union(ra, rb);
        let root = uf.find(ra);
        let other = if root == ra { rb } else { ra };
        let mut moved = std::mem::take(&mut members[other]);
        members[root].append(&mut moved);
        let mut o = std::mem::take(&mut open[other]);
        let mut mine = std::mem::take(&mut open[root]);
        if o.len() > mine.len() {
            std::mem::swap(&mut o, &mut mine);
        }
        for p in o {
            if !mine.remove(&p) {
                mine.insert(p);
            }
        }
        let now_active = !mine.is_empty();
        open[root] = mine;
        active[root] = now_active;
        active[other] = false;
        since[root] = time;
        chosen.push((a, b));
        if now_active {
            n_active += 1;
            // A previously idle part speeds up; its stale events would fire too late.
            if was.iter().any(|&(_, w)| !w) {
                let vs = members[root].clone();
                for v in vs {
                    push_edges(v, &mut heap, &mut uf, &stored, &since, &active, time);
                }
            }
        }
    }
    Ok(chosen)
}
