//! Bottom-up dynamic program over the cluster tree.
//!
//! Each cluster gets a table of boundary states over its portals (see
//! [`state`]). A parent combines its children one at a time, decides which
//! crossing edges between them to take, and forgets vertices that can no longer
//! be touched. Tables are capped at `DpParams::beam` states ranked by weight
//! plus a distance lower bound on open obligations; with no cap the result is
//! the optimum over forests of the portal-respecting graph.

pub mod config;
pub mod state;

use std::collections::BinaryHeap;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::cmp::Reverse;
use std::sync::Arc;
use std::time::Instant;

use log::debug;
use rayon::prelude::*;

use crate::clustering::{ClusterTree, NodeId};
use crate::error::{Error, Result};
use crate::forest::{chain_pairs, ForestSolution, TerminalPair};
use crate::graph::{Edge, WeightedGraph};
use crate::metric::{PointId, PointSet};
use state::{Cert, Key, State, Work};

pub use config::{audit_forest, check_validity, configuration_count, derive_configuration, enumerate_configurations, Configuration};

pub const DEFAULT_BEAM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    /// Maximum states kept per table.
    pub beam: usize,
    /// Child-table products larger than this are sampled best-first.
    pub product_cap: usize,
}

impl Default for DpParams {
    fn default() -> Self {
        DpParams::with_beam(DEFAULT_BEAM)
    }
}

impl DpParams {
    pub fn with_beam(beam: usize) -> Self {
        DpParams {
            beam: beam.max(1),
            product_cap: beam.max(1).saturating_mul(8),
        }
    }

    /// No pruning anywhere.
    pub fn exact() -> Self {
        DpParams {
            beam: usize::MAX,
            product_cap: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTrace {
    pub node: NodeId,
    pub level: i64,
    pub portals: usize,
    pub children: usize,
    pub crossing_edges: usize,
    pub table: usize,
    pub generated: usize,
    pub pruned: usize,
    pub micros: u128,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DpTrace {
    pub clusters: Vec<ClusterTrace>,
}

impl DpTrace {
    pub fn max_table(&self) -> usize {
        self.clusters.iter().map(|c| c.table).max().unwrap_or(0)
    }

    pub fn pruned(&self) -> usize {
        self.clusters.iter().map(|c| c.pruned).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,level,portals,children,crossing_edges,table,generated,pruned,micros\n");
        for c in &self.clusters {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.node, c.level, c.portals, c.children, c.crossing_edges, c.table, c.generated, c.pruned, c.micros
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct DpOutcome {
    /// Realized forest in the input graph, Steiner leaves pruned.
    pub forest: ForestSolution,
    /// Optimal table weight, in DP-graph edge weights.
    pub dp_weight: f64,
    /// Chosen DP-graph edges before realization.
    pub dp_edges: Vec<Edge>,
    /// True if no state was ever pruned.
    pub exact: bool,
    pub trace: DpTrace,
}

/// Crossing edge of a cluster, with the positions of the two children.
#[derive(Debug, Clone, Copy)]
struct Cross {
    edge: u32,
    a: usize,
    b: usize,
}

struct Engine<'a> {
    tree: &'a ClusterTree,
    points: &'a PointSet,
    params: DpParams,
    edges: Vec<Edge>,
    pairs: Vec<TerminalPair>,
    pairs_at: HashMap<PointId, Vec<u32>>,
    cross: Vec<Vec<Cross>>,
    /// Edges of a fixed feasible forest; its state is never pruned.
    anchor_edges: HashSet<u32>,
}

struct Outcome {
    states: Vec<State>,
    anchor: Option<Key>,
    trace: ClusterTrace,
    truncated: bool,
}

fn join_cert(a: &Arc<Cert>, b: &Arc<Cert>) -> Arc<Cert> {
    match (&**a, &**b) {
        (Cert::Nil, _) => b.clone(),
        (_, Cert::Nil) => a.clone(),
        _ => Arc::new(Cert::Join(a.clone(), b.clone())),
    }
}

/// Keeps the lightest state per key; ties keep the earlier one.
#[derive(Default)]
struct Table {
    index: HashMap<Key, usize>,
    states: Vec<State>,
}

impl Table {
    fn offer(&mut self, key: Key, weight: f64, cert: Arc<Cert>) {
        match self.index.get(&key) {
            Some(&i) => {
                if weight < self.states[i].weight {
                    self.states[i].weight = weight;
                    self.states[i].cert = cert;
                }
            }
            None => {
                self.index.insert(key.clone(), self.states.len());
                self.states.push(State { key, weight, score: weight, cert });
            }
        }
    }

    fn finish(self) -> Vec<State> {
        let mut v = self.states;
        v.sort_by(|a, b| a.weight.total_cmp(&b.weight).then_with(|| a.key.cmp(&b.key)));
        v
    }
}

struct Combine<'e, 'a> {
    eng: &'e Engine<'a>,
    frontier: Vec<PointId>,
    states: Vec<State>,
    anchor: Option<Key>,
    partner: HashMap<u32, PointId>,
    generated: usize,
    pruned: usize,
    truncated: bool,
}

impl Combine<'_, '_> {
    fn heuristic(&self, key: &Key) -> f64 {
        let pts = self.eng.points;
        let group_of = |k: usize| key.group[key.block[k] as usize];
        let mut h = 0.0;
        for &(p, g) in &key.labels {
            let Some(&t) = self.partner.get(&p) else { continue };
            let m = (0..self.frontier.len())
                .filter(|&k| group_of(k) == g)
                .map(|k| pts.dist(self.frontier[k], t))
                .fold(f64::INFINITY, f64::min);
            if m.is_finite() {
                h += m;
            }
        }
        let ng = key.group.iter().map(|&g| g as usize + 1).max().unwrap_or(0);
        let mut blocks_in = vec![0usize; ng];
        for &g in &key.group {
            blocks_in[g as usize] += 1;
        }
        for (b, &g) in key.group.iter().enumerate() {
            if blocks_in[g as usize] < 2 || key.group.iter().position(|&x| x == g) == Some(b) {
                continue;
            }
            let mut m = f64::INFINITY;
            for (i, &bi) in key.block.iter().enumerate() {
                if bi as usize != b {
                    continue;
                }
                for (j, &bj) in key.block.iter().enumerate() {
                    if bj as usize != b && key.group[bj as usize] == g {
                        m = m.min(pts.dist(self.frontier[i], self.frontier[j]));
                    }
                }
            }
            if m.is_finite() {
                h += m;
            }
        }
        h
    }

    /// Scores states and sorts them by score.
    fn rank(&self, mut states: Vec<State>) -> Vec<State> {
        for s in states.iter_mut() {
            s.score = s.weight + self.heuristic(&s.key);
        }
        states.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.key.cmp(&b.key)));
        states
    }

    fn prune(&mut self, states: Vec<State>) -> Vec<State> {
        self.generated += states.len();
        let beam = self.eng.params.beam;
        if states.len() <= beam {
            return states;
        }
        let mut v = self.rank(states);
        self.pruned += v.len() - beam;
        self.truncated = true;
        if let Some(k) = v.iter().position(|x| Some(&x.key) == self.anchor.as_ref()) {
            if k >= beam {
                v.swap(k, beam - 1);
            }
        }
        v.truncate(beam);
        v
    }
}

/// Index pairs to combine from two weight-sorted tables: all of them if the
/// product fits `cap`, otherwise the `cap` lightest sums plus the lightest
/// partner of every entry on either side.
fn product_pairs(sw: &[f64], tw: &[f64], cap: usize) -> (Vec<(usize, usize)>, bool) {
    let (s, t) = (sw.len(), tw.len());
    if s.saturating_mul(t) <= cap {
        return ((0..s).flat_map(|i| (0..t).map(move |j| (i, j))).collect(), false);
    }
    let mut seen: HashSet<(usize, usize)> = HashSet::default();
    let mut out = Vec::new();
    let mut heap = BinaryHeap::new();
    let item = |i: usize, j: usize| Reverse(((sw[i] + tw[j]).to_bits(), i, j));
    heap.push(item(0, 0));
    seen.insert((0, 0));
    while let Some(Reverse((_, i, j))) = heap.pop() {
        out.push((i, j));
        if out.len() >= cap {
            break;
        }
        for (a, b) in [(i + 1, j), (i, j + 1)] {
            if a < s && b < t && seen.insert((a, b)) {
                heap.push(item(a, b));
            }
        }
    }
    let extra: Vec<(usize, usize)> = (0..s).map(|i| (i, 0)).chain((0..t).map(|j| (0, j))).collect();
    out.extend(extra);
    out.sort_unstable();
    out.dedup();
    (out, true)
}

impl Combine<'_, '_> {
    fn pos(&self, v: PointId) -> usize {
        self.frontier.iter().position(|&x| x == v).expect("tracked vertex")
    }

    fn add_child(&mut self, child: NodeId, table: &[State], anchor: &Option<Key>) {
        let node = &self.eng.tree.nodes[child];
        for &v in &node.member_ids {
            if let Some(ps) = self.eng.pairs_at.get(&v) {
                for &p in ps {
                    if self.partner.remove(&p).is_none() {
                        let (a, b) = self.eng.pairs[p as usize];
                        self.partner.insert(p, if a == v { b } else { a });
                    }
                }
            }
        }
        if self.states.len().saturating_mul(table.len()) > self.eng.params.product_cap {
            let cur = std::mem::take(&mut self.states);
            self.states = self.rank(cur);
        }
        let sw: Vec<f64> = self.states.iter().map(|s| s.score).collect();
        let tw: Vec<f64> = table.iter().map(|s| s.score).collect();
        let (mut pairs, cut) = product_pairs(&sw, &tw, self.eng.params.product_cap);
        self.truncated |= cut;
        if cut {
            let i = self.states.iter().position(|s| Some(&s.key) == self.anchor.as_ref());
            let j = table.iter().position(|s| Some(&s.key) == anchor.as_ref());
            if let (Some(i), Some(j)) = (i, j) {
                pairs.push((i, j));
            }
        }
        self.anchor = match (&self.anchor, anchor) {
            (Some(a), Some(b)) => {
                let mut w = Work::from_key(a);
                w.concat(b);
                Some(w.to_key())
            }
            _ => None,
        };
        let mut out = Table::default();
        for (i, j) in pairs {
            let (s, t) = (&self.states[i], &table[j]);
            let mut w = Work::from_key(&s.key);
            w.concat(&t.key);
            out.offer(w.to_key(), s.weight + t.weight, join_cert(&s.cert, &t.cert));
        }
        self.frontier.extend(node.portals.iter().copied());
        let states = out.finish();
        self.states = self.prune(states);
    }

    fn take_edge(&mut self, e: u32) {
        let edge = self.eng.edges[e as usize];
        let (x, y) = (self.pos(edge.u), self.pos(edge.v));
        if self.eng.anchor_edges.contains(&e) {
            if let Some(a) = &self.anchor {
                let mut w = Work::from_key(a);
                w.join(x, y);
                self.anchor = Some(w.to_key());
            }
        }
        let mut out = Table::default();
        for s in &self.states {
            out.offer(s.key.clone(), s.weight, s.cert.clone());
            let mut w = Work::from_key(&s.key);
            if w.join(x, y) {
                out.offer(w.to_key(), s.weight + edge.w, Arc::new(Cert::Edge(e, s.cert.clone())));
            }
        }
        let states = out.finish();
        self.states = self.prune(states);
    }

    fn forget(&mut self, v: PointId) {
        let x = self.pos(v);
        self.frontier.remove(x);
        self.anchor = self.anchor.take().and_then(|a| {
            let mut w = Work::from_key(&a);
            w.forget(x).then(|| w.to_key())
        });
        let mut out = Table::default();
        for s in &self.states {
            let mut w = Work::from_key(&s.key);
            if w.forget(x) {
                out.offer(w.to_key(), s.weight, s.cert.clone());
            }
        }
        self.states = out.finish();
    }
}

impl<'a> Engine<'a> {
    fn new(tree: &'a ClusterTree, g: &WeightedGraph, points: &'a PointSet, terminals: &[TerminalPair], params: DpParams) -> Result<Self> {
        let dp = tree
            .dp_graph
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("portals not assigned".into()))?;
        let mut pairs: Vec<TerminalPair> = Vec::new();
        for &(a, b) in terminals {
            for v in [a, b] {
                if !g.contains(v) || !tree.leaf_of.contains_key(&v) {
                    return Err(Error::UnknownId(v));
                }
            }
            if a != b {
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut pairs_at: HashMap<PointId, Vec<u32>> = HashMap::default();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            pairs_at.entry(a).or_default().push(k as u32);
            pairs_at.entry(b).or_default().push(k as u32);
        }
        let edges = dp.graph.sorted_edges();
        let mut cross: Vec<Vec<Cross>> = vec![Vec::new(); tree.nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            let top = tree.lca(tree.leaf_of[&e.u], tree.leaf_of[&e.v]);
            let node = &tree.nodes[top];
            let mut side = [0usize; 2];
            for (s, x) in [e.u, e.v].into_iter().enumerate() {
                let c = tree.child_containing(top, x).ok_or(Error::NonPortalCrossing(e.u, e.v))?;
                if !tree.nodes[c].is_portal(x) {
                    return Err(Error::NonPortalCrossing(e.u, e.v));
                }
                side[s] = node.children.iter().position(|&y| y == c).expect("child of top");
            }
            cross[top].push(Cross {
                edge: k as u32,
                a: side[0],
                b: side[1],
            });
        }
        let mut eng = Engine {
            tree,
            points,
            params,
            edges,
            pairs,
            pairs_at,
            cross,
            anchor_edges: HashSet::default(),
        };
        eng.anchor_edges = eng.anchor_forest(&dp.graph);
        Ok(eng)
    }

    /// Moat-growing forest over the DP graph (spanning forest if that fails).
    fn anchor_forest(&self, g: &WeightedGraph) -> HashSet<u32> {
        let span = crate::oracles::primal_dual_on(g.vertices(), &self.pairs, self.points, Some(g))
            .unwrap_or_else(|_| crate::oracles::graph_mst(g).pruned(&self.pairs));
        let index: HashMap<(PointId, PointId), u32> = self.edges.iter().enumerate().map(|(k, e)| (e.key(), k as u32)).collect();
        span.edges.iter().map(|e| index[&e.key()]).collect()
    }

    fn leaf(&self, id: NodeId) -> Vec<State> {
        let v = self.tree.nodes[id].center;
        let mut labels: Vec<(u32, u16)> = self.pairs_at.get(&v).map(|ps| ps.iter().map(|&p| (p, 0)).collect()).unwrap_or_default();
        labels.sort_unstable();
        vec![State {
            key: Key {
                block: vec![0],
                group: vec![0],
                labels,
            },
            weight: 0.0,
            score: 0.0,
            cert: Arc::new(Cert::Nil),
        }]
    }

    /// Children in a greedy order that keeps crossing edges close together.
    fn child_order(&self, id: NodeId) -> Vec<usize> {
        let m = self.tree.nodes[id].children.len();
        let mut links = vec![vec![0usize; m]; m];
        for c in &self.cross[id] {
            links[c.a][c.b] += 1;
            links[c.b][c.a] += 1;
        }
        let mut done = vec![false; m];
        let mut score = vec![0usize; m];
        let mut order = Vec::with_capacity(m);
        for _ in 0..m {
            let next = (0..m)
                .filter(|&k| !done[k])
                .max_by(|&a, &b| score[a].cmp(&score[b]).then(b.cmp(&a)))
                .expect("unplaced child");
            done[next] = true;
            order.push(next);
            for k in 0..m {
                score[k] += links[next][k];
            }
        }
        order
    }

    fn combine(&self, id: NodeId, tables: &[Option<(Vec<State>, Option<Key>)>]) -> Outcome {
        let start = Instant::now();
        let node = &self.tree.nodes[id];
        let cross = &self.cross[id];
        let mut trace = ClusterTrace {
            node: id,
            level: node.level,
            portals: node.portals.len(),
            children: node.children.len(),
            crossing_edges: cross.len(),
            table: 1,
            generated: 1,
            pruned: 0,
            micros: 0,
        };
        if node.is_leaf() {
            trace.micros = start.elapsed().as_micros();
            let states = self.leaf(id);
            return Outcome {
                anchor: Some(states[0].key.clone()),
                states,
                trace,
                truncated: false,
            };
        }
        let order = self.child_order(id);
        let mut step_of = vec![0usize; node.children.len()];
        for (t, &k) in order.iter().enumerate() {
            step_of[k] = t;
        }
        // Edges are taken when their later child arrives.
        let mut edges_at: Vec<Vec<u32>> = vec![Vec::new(); order.len()];
        let mut last_use: HashMap<PointId, usize> = HashMap::default();
        for c in cross {
            let t = step_of[c.a].max(step_of[c.b]);
            edges_at[t].push(c.edge);
            let e = self.edges[c.edge as usize];
            for v in [e.u, e.v] {
                let u = last_use.entry(v).or_insert(0);
                *u = (*u).max(t);
            }
        }
        let mut run = Combine {
            eng: self,
            frontier: Vec::new(),
            states: vec![State {
                key: Key::default(),
                weight: 0.0,
                score: 0.0,
                cert: Arc::new(Cert::Nil),
            }],
            anchor: Some(Key::default()),
            partner: HashMap::default(),
            generated: 0,
            pruned: 0,
            truncated: false,
        };
        for (t, &k) in order.iter().enumerate() {
            let child = node.children[k];
            let (table, anchor) = tables[child].as_ref().expect("child table ready");
            run.add_child(child, table, anchor);
            for &e in &edges_at[t] {
                run.take_edge(e);
            }
            let drop: Vec<PointId> = run
                .frontier
                .iter()
                .copied()
                .filter(|v| !node.is_portal(*v) && last_use.get(v).copied().unwrap_or(t) <= t)
                .collect();
            for v in drop {
                run.forget(v);
            }
        }
        // Reorder the tracked vertices to the cluster's portal order.
        let perm: Vec<usize> = node.portals.iter().map(|&v| run.pos(v)).collect();
        let anchor = run.anchor.as_ref().map(|a| {
            let mut w = Work::from_key(a);
            w.block = perm.iter().map(|&i| w.block[i]).collect();
            w.to_key()
        });
        let mut out = Table::default();
        for s in std::mem::take(&mut run.states) {
            let mut w = Work::from_key(&s.key);
            w.block = perm.iter().map(|&i| w.block[i]).collect();
            out.offer(w.to_key(), s.weight, s.cert);
        }
        run.frontier = node.portals.clone();
        let states = run.rank(out.finish());
        trace.table = states.len();
        trace.generated = run.generated;
        trace.pruned = run.pruned;
        trace.micros = start.elapsed().as_micros();
        Outcome {
            states,
            anchor,
            trace,
            truncated: run.truncated,
        }
    }

    fn run(&self) -> Result<(State, bool, DpTrace)> {
        let tree = self.tree;
        let mut height = vec![0usize; tree.nodes.len()];
        for id in tree.postorder() {
            height[id] = tree.nodes[id].children.iter().map(|&c| height[c] + 1).max().unwrap_or(0);
        }
        let top = height[tree.root];
        let mut by_height: Vec<Vec<NodeId>> = vec![Vec::new(); top + 1];
        for (id, &h) in height.iter().enumerate() {
            by_height[h].push(id);
        }
        let mut tables: Vec<Option<(Vec<State>, Option<Key>)>> = vec![None; tree.nodes.len()];
        let mut trace = DpTrace::default();
        let mut truncated = false;
        for level in by_height {
            let done: Vec<Outcome> = level.par_iter().map(|&id| self.combine(id, &tables)).collect();
            for (id, out) in level.into_iter().zip(done) {
                for &c in &tree.nodes[id].children {
                    tables[c] = None;
                }
                truncated |= out.truncated;
                trace.clusters.push(out.trace);
                tables[id] = Some((out.states, out.anchor));
            }
        }
        trace.clusters.sort_by_key(|c| c.node);
        let root = tables[tree.root].take().map(|t| t.0).unwrap_or_default();
        let best = root
            .into_iter()
            .find(|s| s.key.labels.is_empty() && s.key.group.is_empty())
            .ok_or_else(|| Error::Infeasible("no root state connects every pair".into()))?;
        Ok((best, !truncated, trace))
    }
}

/// Optimal forest of the portal-respecting graph connecting every pair,
/// realized in `g`.
pub fn solve_forest(
    tree: &ClusterTree,
    g: &WeightedGraph,
    points: &PointSet,
    terminals: &[TerminalPair],
    params: &DpParams,
) -> Result<DpOutcome> {
    let eng = Engine::new(tree, g, points, terminals, *params)?;
    let (best, exact, trace) = eng.run()?;
    let dp = tree.dp_graph.as_ref().expect("checked by the engine");
    let dp_edges: Vec<Edge> = Cert::edges(&best.cert).into_iter().map(|e| eng.edges[e as usize]).collect();
    let forest = ForestSolution::from_edges(dp.realize(&dp_edges)).pruned(&eng.pairs);
    forest.audit(&eng.pairs)?;
    debug!(
        "dp: weight {:.6}, {} edges, max table {}, pruned {}",
        best.weight,
        dp_edges.len(),
        trace.max_table(),
        trace.pruned()
    );
    Ok(DpOutcome {
        forest,
        dp_weight: best.weight,
        dp_edges,
        exact,
        trace,
    })
}

/// Steiner tree over `x_ids`, solved as the forest of chained pairs.
pub fn solve_tree(tree: &ClusterTree, g: &WeightedGraph, points: &PointSet, x_ids: &[PointId], params: &DpParams) -> Result<DpOutcome> {
    let mut ids = x_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::InvalidParameter("a Steiner tree needs at least two terminals".into()));
    }
    solve_forest(tree, g, points, &chain_pairs(&ids), params)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::clustering::{assign_portals, build_cluster_tree, ClusterParams};
    use crate::oracles::{brute_force_graph_forest, shortest_path, OracleBudget};
    use crate::spanner::greedy_spanner;

    fn random_case(seed: u64, n: usize) -> (PointSet, WeightedGraph, ClusterTree) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect();
        let p = PointSet::euclidean(2, &pts, vec![true; n]).unwrap().normalized().unwrap();
        let g = greedy_spanner(&p, 0.5).unwrap();
        let params = ClusterParams {
            s_log: Some(1),
            ..ClusterParams::new(0.5, 64.0)
        };
        let t = assign_portals(build_cluster_tree(&g, &p, &params).unwrap(), &g, &p).unwrap();
        (p, g, t)
    }

    fn random_pairs(seed: u64, n: usize, k: usize) -> Vec<TerminalPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect()
    }

    #[test]
    fn no_terminals_gives_empty_forest() {
        let (p, g, t) = random_case(1, 7);
        let out = solve_forest(&t, &g, &p, &[], &DpParams::exact()).unwrap();
        assert_eq!(out.dp_weight, 0.0);
        assert!(out.forest.is_empty());
        assert!(out.exact);
    }

    #[test]
    fn matches_brute_force_on_portal_graph() {
        let budget = OracleBudget::default();
        for seed in 0..40 {
            let n = 4 + (seed as usize % 6);
            let (p, g, t) = random_case(seed, n);
            let pairs = random_pairs(seed, n, 1 + seed as usize % 3);
            let out = solve_forest(&t, &g, &p, &pairs, &DpParams::exact()).unwrap();
            assert!(out.exact);
            let dpg = &t.dp_graph.as_ref().unwrap().graph;
            let want = brute_force_graph_forest(dpg, &pairs, &budget).unwrap().weight();
            assert!((out.dp_weight - want).abs() <= 1e-9 * want.max(1.0), "seed {seed}: {} vs {want}", out.dp_weight);
            assert!(out.forest.weight() <= out.dp_weight + 1e-9);
            out.forest.audit(&pairs).unwrap();
            for e in &out.dp_edges {
                assert!(t.crossing_violation(e.u, e.v).is_none());
            }
        }
    }

    #[test]
    fn single_pair_follows_a_short_path() {
        let (p, g, t) = random_case(5, 9);
        let out = solve_forest(&t, &g, &p, &[(0, 8)], &DpParams::default()).unwrap();
        let (d, _) = shortest_path(&g, 0, 8).unwrap();
        assert!(out.forest.weight() <= d * 1.5 + 1e-9);
    }

    #[test]
    fn removing_an_edge_never_helps() {
        let (p, g, t) = random_case(11, 9);
        let pairs = vec![(0, 5), (2, 7)];
        let full = solve_forest(&t, &g, &p, &pairs, &DpParams::exact()).unwrap();
        for e in full.dp_edges.clone() {
            let mut t2 = t.clone();
            let dp = t2.dp_graph.as_mut().unwrap();
            let mut h = WeightedGraph::new(dp.graph.vertices());
            for f in dp.graph.sorted_edges() {
                if f.key() != e.key() {
                    h.add_edge(f.u, f.v, f.w);
                }
            }
            dp.graph = h;
            if let Ok(out) = solve_forest(&t2, &g, &p, &pairs, &DpParams::exact()) {
                assert!(out.dp_weight >= full.dp_weight - 1e-12);
            }
        }
    }

    #[test]
    fn narrow_beam_stays_feasible_and_deterministic() {
        let (p, g, t) = random_case(3, 40);
        let pairs = random_pairs(3, 40, 6);
        let a = solve_forest(&t, &g, &p, &pairs, &DpParams::with_beam(4)).unwrap();
        let b = solve_forest(&t, &g, &p, &pairs, &DpParams::with_beam(4)).unwrap();
        a.forest.audit(&pairs).unwrap();
        assert_eq!(a.forest, b.forest);
        let wide = solve_forest(&t, &g, &p, &pairs, &DpParams::with_beam(256)).unwrap();
        assert!(wide.dp_weight <= a.dp_weight + 1e-9);
    }

    #[test]
    fn tree_mode_connects_everything() {
        let (p, g, t) = random_case(8, 12);
        let out = solve_tree(&t, &g, &p, &[0, 3, 6, 9], &DpParams::default()).unwrap();
        let c = out.forest.components[&0];
        assert!([3, 6, 9].iter().all(|v| out.forest.components[v] == c));
        assert!(solve_tree(&t, &g, &p, &[2], &DpParams::default()).is_err());
    }

    #[test]
    fn unknown_terminal_is_rejected() {
        let (p, g, t) = random_case(2, 5);
        assert_eq!(
            solve_forest(&t, &g, &p, &[(0, 99)], &DpParams::default()).unwrap_err(),
            Error::UnknownId(99)
        );
    }
}
