//! End-to-end orchestration: banyan, net-respecting rerouting, sparsification,
//! per-piece clustering and DP, merge, and a final metric clean-up.

use std::collections::BTreeMap;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

use crate::banyan::{build_banyan, BanyanParams};
use crate::clustering::{assign_portals, build_cluster_tree, ClusterParams};
use crate::dp::{solve_forest, DpParams, DEFAULT_BEAM};
use crate::error::{Error, Result};
use crate::forest::{chain_pairs, ForestSolution, TerminalPair};
use crate::graph::{Edge, UnionFind, WeightedGraph};
use crate::hierarchy::NetHierarchy;
use crate::instance::Instance;
use crate::metric::{PointId, PointSet};
use crate::oracles::{self, OracleBudget};
use crate::spanner::make_net_respecting;
use crate::sparsifier::{merge_solutions, sparsify, SparseSubproblem, SparsifyParams};

/// Sparsity bound used when `--q` is not given.
pub const DEFAULT_Q: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forest,
    Tree,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(Mode::Forest),
            "tree" => Ok(Mode::Tree),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        }
    }
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Forest => "forest",
            Mode::Tree => "tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFlags {
    pub eps: f64,
    pub mode: Mode,
    pub q: Option<f64>,
    pub t_cap: Option<usize>,
    pub cluster_c: Option<f64>,
    pub oracle: bool,
    pub seed: u64,
    pub trace: bool,
    pub budget: OracleBudget,
    pub beam: usize,
}

impl PipelineFlags {
    pub fn new(eps: f64) -> Self {
        PipelineFlags {
            eps,
            mode: Mode::Forest,
            q: None,
            t_cap: Some(crate::banyan::DEFAULT_T_CAP),
            cluster_c: None,
            oracle: false,
            seed: 0,
            trace: false,
            budget: OracleBudget::default(),
            beam: DEFAULT_BEAM,
        }
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(DEFAULT_Q)
    }

    /// Rerouting parameter for the net-respecting pass.
    pub fn delta(&self) -> f64 {
        self.eps / 16.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if let Some(q) = self.q {
            if !(q > 0.0) {
                return Err(Error::InvalidParameter(format!("q = {q} must be positive")));
            }
        }
        if let Some(c) = self.cluster_c {
            if !(c >= 1.0) {
                return Err(Error::InvalidParameter(format!("cluster constant {c} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub primal_dual: Option<f64>,
    pub exact: Option<f64>,
    /// Why the exact solver did not run.
    pub refused: Option<String>,
}

/// Everything measured during a run. `rows` is deterministic; wall-clock
/// timings are kept apart in `timings`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<(String, String, String)>,
    pub timings: Vec<(String, Duration)>,
    pub final_weight: f64,
    pub oracle: Option<OracleReport>,
    pub dp_trace: Option<String>,
}

impl RunReport {
    fn put(&mut self, stage: &str, key: &str, value: impl ToString) {
        self.rows.push((stage.into(), key.into(), value.to_string()));
    }

    fn put_f(&mut self, stage: &str, key: &str, value: f64) {
        self.put(stage, key, format!("{value:.16e}"));
    }

    pub fn get(&self, stage: &str, key: &str) -> Option<&str> {
        self.rows
            .iter()
            .find(|(s, k, _)| s == stage && k == key)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn get_f(&self, stage: &str, key: &str) -> Option<f64> {
        self.get(stage, key).and_then(|v| v.parse().ok())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,key,value\n");
        for (a, b, c) in &self.rows {
            let _ = writeln!(s, "{a},{b},{c}");
        }
        s
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("stage,seconds\n");
        for (k, d) in &self.timings {
            let _ = writeln!(s, "{k},{:.6}", d.as_secs_f64());
        }
        s
    }
}

/// Solution file: one `u,v,w` line per edge, weights in input units.
pub fn solution_to_text(f: &ForestSolution, points: &PointSet) -> String {
    let mut s = String::from("u,v,w\n");
    for e in &f.edges {
        let _ = writeln!(s, "{},{},{:.16e}", e.u, e.v, points.denormalize(e.w));
    }
    s
}

/// Parses a solution file back into `(u, v, w)` triples.
pub fn parse_solution(text: &str) -> Result<Vec<(PointId, PointId, f64)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let bad = |m: &str| Error::Malformed {
            location: format!("line {}", k + 1),
            message: m.into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad("expected u,v,w"));
        }
        let u = f[0].parse().map_err(|_| bad("bad u"))?;
        let v = f[1].parse().map_err(|_| bad("bad v"))?;
        let w = f[2].parse().map_err(|_| bad("bad w"))?;
        out.push((u, v, w));
    }
    Ok(out)
}

/// Minimum spanning tree of `ids` with non-terminal vertices of degree below
/// `keep` dropped until none is left.
fn trimmed_mst(ids: &[PointId], terminals: &HashSet<PointId>, points: &PointSet, keep: usize) -> (Vec<PointId>, Vec<Edge>, f64) {
    let mut ids = ids.to_vec();
    loop {
        let t = oracles::mst(&ids, points);
        let mut deg: HashMap<PointId, usize> = HashMap::default();
        for e in &t.edges {
            *deg.entry(e.u).or_default() += 1;
            *deg.entry(e.v).or_default() += 1;
        }
        let before = ids.len();
        ids.retain(|v| terminals.contains(v) || deg.get(v).copied().unwrap_or(0) >= keep);
        if ids.len() == before {
            let w = t.weight();
            return (ids, t.edges, w);
        }
    }
}

/// Weight of the minimum spanning tree of `tree`'s vertices plus `s`, given
/// `tree` is already a minimum spanning tree.
fn insertion_weight(tree: &[Edge], ids: &[PointId], s: PointId, points: &PointSet) -> f64 {
    let k = ids.len();
    let at = |v: PointId| ids.binary_search(&v).unwrap_or(k);
    let mut edges: Vec<(f64, usize, usize)> = tree.iter().map(|e| (e.w, at(e.u), at(e.v))).collect();
    edges.extend(ids.iter().enumerate().map(|(i, &v)| (points.dist(v, s), i, k)));
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut uf = UnionFind::new(k + 1);
    edges.iter().filter(|&&(_, a, b)| uf.union(a, b)).map(|e| e.0).sum()
}

/// Local search on one tree: insert candidate Steiner points and drop
/// useless ones while the spanning-tree weight decreases.
type Tree = (Vec<PointId>, Vec<Edge>, f64);

fn improve_tree(ids: Vec<PointId>, terminals: &HashSet<PointId>, candidates: &[PointId], points: &PointSet) -> Tree {
    let (mut ids, mut edges, mut w) = trimmed_mst(&ids, terminals, points, 3);
    for _ in 0..POLISH_PASSES {
        let mut improved = false;
        let reach = edges.iter().map(|e| e.w).fold(0.0, f64::max);
        for &s in candidates {
            if ids.binary_search(&s).is_ok() {
                continue;
            }
            let near = ids.iter().map(|&v| points.dist(v, s)).fold(f64::INFINITY, f64::min);
            if near >= reach {
                continue;
            }
            if insertion_weight(&edges, &ids, s, points) < w * (1.0 - 1e-12) {
                let mut with = ids.clone();
                with.push(s);
                with.sort_unstable();
                let (i2, e2, w2) = trimmed_mst(&with, terminals, points, 2);
                if w2 < w * (1.0 - 1e-12) {
                    (ids, edges, w) = (i2, e2, w2);
                    improved = true;
                }
            }
        }
        let steiner: Vec<PointId> = ids.iter().copied().filter(|v| !terminals.contains(v)).collect();
        for v in steiner {
            let without: Vec<PointId> = ids.iter().copied().filter(|&x| x != v).collect();
            let (i2, e2, w2) = trimmed_mst(&without, terminals, points, 2);
            if w2 < w * (1.0 - 1e-12) {
                (ids, edges, w) = (i2, e2, w2);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (ids, edges, w)
}

/// Tries to detach each unit of pairs (terminals linked through pairs) from
/// its tree into a tree of its own.
fn split_trees(trees: Vec<Tree>, pairs: &[TerminalPair], terminals: &HashSet<PointId>, cands: &[PointId], points: &PointSet) -> Vec<Tree> {
    let mut units: BTreeMap<PointId, Vec<PointId>> = BTreeMap::new();
    {
        let ids: Vec<PointId> = terminals.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut uf = UnionFind::new(ids.len());
        let at = |v: PointId| ids.binary_search(&v).expect("terminal");
        for &(a, b) in pairs.iter().filter(|(a, b)| a != b) {
            uf.union(at(a), at(b));
        }
        for (i, &v) in ids.iter().enumerate() {
            units.entry(ids[uf.find(i)]).or_default().push(v);
        }
    }
    let mut out = Vec::new();
    let mut queue = trees;
    while let Some(t) = queue.pop() {
        let inside: Vec<&Vec<PointId>> = units.values().filter(|u| t.0.binary_search(&u[0]).is_ok()).collect();
        let mut done = false;
        if inside.len() > 1 {
            for u in inside {
                let rest: Vec<PointId> = t.0.iter().copied().filter(|v| !u.contains(v)).collect();
                let quick = trimmed_mst(&rest, terminals, points, 2).2 + oracles::mst_weight(u, points);
                if quick >= t.2 {
                    continue;
                }
                let a = improve_tree(rest, terminals, cands, points);
                let b = improve_tree(u.clone(), terminals, cands, points);
                if a.2 + b.2 < t.2 * (1.0 - 1e-12) {
                    queue.push(a);
                    out.push(b);
                    done = true;
                    break;
                }
            }
        }
        if !done {
            out.push(t);
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub const POLISH_PASSES: usize = 3;

/// Monotone clean-up of a forest: each tree is rebuilt as a metric spanning
/// tree over its terminals and branching vertices, then improved by inserting
/// or removing Steiner vertices from `candidates`. Trees stay separate, so
/// terminal connectivity is unchanged and the weight never increases.
pub fn polish(f: &ForestSolution, pairs: &[TerminalPair], points: &PointSet, candidates: &[PointId]) -> ForestSolution {
    let terminals: HashSet<PointId> = pairs.iter().filter(|(a, b)| a != b).flat_map(|&(a, b)| [a, b]).collect();
    let cur = f.pruned(pairs);
    let mut deg: HashMap<PointId, usize> = HashMap::default();
    for e in &cur.edges {
        *deg.entry(e.u).or_default() += 1;
        *deg.entry(e.v).or_default() += 1;
    }
    let mut groups: BTreeMap<usize, Vec<PointId>> = BTreeMap::new();
    for (&v, &c) in &cur.components {
        if terminals.contains(&v) || deg.get(&v).copied().unwrap_or(0) >= 3 {
            groups.entry(c).or_default().push(v);
        }
    }
    groups.values_mut().for_each(|g| g.sort_unstable());
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    let mut trees: Vec<Tree> = groups
        .into_values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|ids| improve_tree(ids.clone(), &terminals, &cands, points))
        .collect();
    // Interleaved trees can be cheaper as one: merge the best pair while it pays.
    loop {
        let pairs_ij: Vec<(usize, usize)> = (0..trees.len()).flat_map(|i| (i + 1..trees.len()).map(move |j| (i, j))).collect();
        let best = pairs_ij
            .par_iter()
            .filter_map(|&(i, j)| {
                let mut ids = trees[i].0.clone();
                ids.extend(&trees[j].0);
                ids.sort_unstable();
                let gain = trees[i].2 + trees[j].2 - oracles::mst_weight(&ids, points);
                (gain > 1e-12 * (trees[i].2 + trees[j].2)).then_some((gain, i, j))
            })
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)));
        let Some((_, i, j)) = best else { break };
        let tj = trees.remove(j);
        let ti = trees.remove(i);
        let mut ids = ti.0.clone();
        ids.extend(&tj.0);
        ids.sort_unstable();
        let merged = improve_tree(ids, &terminals, &cands, points);
        if merged.2 < ti.2 + tj.2 {
            trees.push(merged);
        } else {
            trees.push(ti);
            trees.push(tj);
            break;
        }
    }
    let trees = split_trees(trees, pairs, &terminals, &cands, points);
    let edges: Vec<Edge> = trees.into_iter().flat_map(|t| t.1).collect();
    let next = ForestSolution::from_edges(edges).pruned(pairs);
    if next.weight() <= cur.weight() {
        next
    } else {
        cur
    }
}

fn path_fallback(sp: &SparseSubproblem) -> Result<ForestSolution> {
    let mut edges = Vec::new();
    let by_key: HashMap<(PointId, PointId), Edge> = sp.graph.edges().iter().map(|e| (e.key(), *e)).collect();
    for &(a, b) in &sp.terminals {
        if a == b {
            continue;
        }
        let (_, path) = sp.graph.shortest_path(a, b)?;
        for w in path.windows(2) {
            edges.push(by_key[&(w[0].min(w[1]), w[0].max(w[1]))]);
        }
    }
    Ok(ForestSolution::from_edges(edges).pruned(&sp.terminals))
}

#[derive(Debug, Default, Clone)]
struct PieceStats {
    vertices: usize,
    nodes: usize,
    max_portals: usize,
    max_children: usize,
    radius_fallbacks: usize,
    rerouted: usize,
    max_table: usize,
    pruned: usize,
    exact: bool,
    fallback: bool,
    dp_weight: f64,
    trace: String,
}

fn solve_piece(sp: &SparseSubproblem, points: &PointSet, flags: &PipelineFlags, lightness: f64) -> Result<(ForestSolution, PieceStats)> {
    let mut st = PieceStats {
        vertices: sp.graph.num_vertices(),
        exact: true,
        ..Default::default()
    };
    if sp.terminals.iter().all(|(a, b)| a == b) {
        return Ok((ForestSolution::empty(), st));
    }
    let params = ClusterParams {
        c: flags.cluster_c,
        lightness,
        ..ClusterParams::new(flags.eps, flags.q())
    };
    let tree = build_cluster_tree(&sp.graph, points, &params).map_err(|e| e.in_stage("cluster"))?;
    let tree = assign_portals(tree, &sp.graph, points).map_err(|e| e.in_stage("portals"))?;
    st.nodes = tree.len();
    st.max_portals = tree.max_portals();
    st.max_children = tree.max_children();
    st.radius_fallbacks = tree.radius_fallbacks;
    st.rerouted = tree.dp_graph.as_ref().map_or(0, |d| d.rerouted());
    match solve_forest(&tree, &sp.graph, points, &sp.terminals, &DpParams::with_beam(flags.beam)) {
        Ok(out) => {
            st.max_table = out.trace.max_table();
            st.pruned = out.trace.pruned();
            st.exact = out.exact;
            st.dp_weight = out.dp_weight;
            if flags.trace {
                st.trace = out.trace.to_csv();
            }
            Ok((out.forest, st))
        }
        Err(e) if matches!(e.root(), Error::Infeasible(_)) => {
            warn!("dp infeasible on a piece, using shortest paths: {e}");
            st.fallback = true;
            st.exact = false;
            Ok((path_fallback(sp)?, st))
        }
        Err(e) => Err(e.in_stage("dp")),
    }
}

/// Runs every stage on `inst` and returns the forest (normalized units) and
/// the report.
pub fn run_pipeline(inst: &Instance, flags: &PipelineFlags) -> Result<(ForestSolution, RunReport)> {
    flags.validate()?;
    let points = &inst.points;
    let mut report = RunReport::default();
    let mut clock = Instant::now();
    let mut lap = |report: &mut RunReport, stage: &str| {
        report.timings.push((stage.to_string(), clock.elapsed()));
        clock = Instant::now();
    };
    report.put("instance", "name", &inst.name);
    report.put("instance", "points", inst.len());
    report.put("instance", "real", inst.real.iter().filter(|r| **r).count());
    report.put("instance", "pairs", inst.terminals.len());
    report.put("params", "eps", flags.eps);
    report.put("params", "mode", flags.mode.as_str());
    report.put("params", "q", flags.q());
    report.put("params", "delta", flags.delta());
    report.put("params", "beam", flags.beam);
    report.put("params", "seed", flags.seed);
    for &(a, b) in &inst.terminals {
        for v in [a, b] {
            points.check_id(v)?;
            if !points.is_real(v) {
                return Err(Error::SteinerTerminal(v));
            }
        }
    }
    let x_ids = inst.terminal_ids();
    let pairs: Vec<TerminalPair> = match flags.mode {
        Mode::Forest => inst.terminals.iter().copied().filter(|(a, b)| a != b).collect(),
        Mode::Tree => chain_pairs(&x_ids),
    };
    if pairs.is_empty() {
        report.put("final", "weight", format!("{:.16e}", 0.0));
        report.put("final", "edges", 0);
        report.final_weight = 0.0;
        lap(&mut report, "total");
        return Ok((ForestSolution::empty(), report));
    }

    let bparams = BanyanParams {
        t_cap: flags.t_cap,
        ..BanyanParams::new(flags.eps)
    };
    let banyan = build_banyan(&x_ids, points, &bparams).map_err(|e| e.in_stage("banyan"))?;
    report.put("banyan", "t", banyan.t);
    report.put("banyan", "vertices", banyan.graph.num_vertices());
    report.put("banyan", "steiner", banyan.steiner.len());
    report.put("banyan", "edges", banyan.graph.num_edges());
    report.put_f("banyan", "weight", banyan.graph.weight());
    report.put_f("banyan", "lightness", banyan.lightness);
    report.put_f("banyan", "mst_ratio", banyan.mst_ratio);
    lap(&mut report, "banyan");

    let h = NetHierarchy::build_over(points, &banyan.graph.sorted_vertices()).map_err(|e| e.in_stage("hierarchy"))?;
    let g = make_net_respecting(&banyan.graph, &h, points, flags.delta()).map_err(|e| e.in_stage("net-respecting"))?;
    report.put("net_respecting", "vertices", g.num_vertices());
    report.put("net_respecting", "edges", g.num_edges());
    report.put_f("net_respecting", "weight", g.weight());
    lap(&mut report, "net_respecting");

    let sp = sparsify(&g, &h, points, &pairs, &SparsifyParams::new(flags.q())).map_err(|e| e.in_stage("sparsify"))?;
    report.put("sparsify", "pieces", sp.subproblems.len());
    report.put("sparsify", "excisions", sp.events.len());
    report.put("sparsify", "exhausted", sp.exhausted);
    report.put("sparsify", "total_vertices", sp.total_vertices());
    report.put_f("sparsify", "patch_weight", sp.patch_weight);
    report.put_f("sparsify", "patch_ratio", if g.weight() > 0.0 { sp.patch_weight / g.weight() } else { 0.0 });
    report.put_f("sparsify", "patch_budget", flags.eps * g.weight() / banyan.lightness.max(1.0));
    lap(&mut report, "sparsify");

    let lightness = banyan.lightness;
    let solved: Vec<(ForestSolution, PieceStats)> = sp
        .subproblems
        .par_iter()
        .map(|piece| solve_piece(piece, points, flags, lightness))
        .collect::<Result<_>>()?;
    let stats: Vec<&PieceStats> = solved.iter().map(|s| &s.1).collect();
    report.put("cluster", "max_piece_vertices", stats.iter().map(|s| s.vertices).max().unwrap_or(0));
    report.put("cluster", "nodes", stats.iter().map(|s| s.nodes).sum::<usize>());
    report.put("cluster", "max_portals", stats.iter().map(|s| s.max_portals).max().unwrap_or(0));
    report.put("cluster", "max_children", stats.iter().map(|s| s.max_children).max().unwrap_or(0));
    report.put("cluster", "radius_fallbacks", stats.iter().map(|s| s.radius_fallbacks).sum::<usize>());
    report.put("cluster", "rerouted_edges", stats.iter().map(|s| s.rerouted).sum::<usize>());
    report.put("dp", "max_table", stats.iter().map(|s| s.max_table).max().unwrap_or(0));
    report.put("dp", "pruned", stats.iter().map(|s| s.pruned).sum::<usize>());
    report.put("dp", "exact_pieces", stats.iter().filter(|s| s.exact).count());
    report.put("dp", "fallback_pieces", stats.iter().filter(|s| s.fallback).count());
    report.put_f("dp", "weight", stats.iter().map(|s| s.dp_weight).sum());
    if flags.trace {
        let mut t = String::new();
        for (k, s) in stats.iter().enumerate() {
            for line in s.trace.lines().skip(1) {
                let _ = writeln!(t, "{k},{line}");
            }
        }
        report.dp_trace = Some(format!("piece,node,level,portals,children,crossing_edges,table,generated,pruned,micros\n{t}"));
    }
    lap(&mut report, "dp");

    let solutions: Vec<ForestSolution> = solved.into_iter().map(|s| s.0).collect();
    let merged = merge_solutions(&solutions, &sp.subproblems, &pairs).map_err(|e| e.in_stage("merge"))?;
    report.put_f("merge", "weight", merged.weight());
    let all_c: Vec<PointId> = inst.real_ids();
    let fin = polish(&merged, &pairs, points, &all_c);
    fin.audit(&pairs).map_err(|e| e.in_stage("audit"))?;
    if flags.mode == Mode::Tree && fin.components.values().collect::<HashSet<_>>().len() > 1 {
        return Err(Error::Infeasible("tree mode produced several trees".into()).in_stage("audit"));
    }
    let weight: f64 = fin.edges.iter().map(|e| e.w).sum();
    report.final_weight = weight;
    report.put_f("final", "weight", weight);
    report.put_f("final", "weight_input_units", points.denormalize(weight));
    report.put("final", "edges", fin.edges.len());
    report.put("final", "trees", fin.components.values().collect::<HashSet<_>>().len());
    lap(&mut report, "merge");

    if flags.oracle {
        let orc = oracle_comparison(&x_ids, &pairs, points, flags);
        if let Some(w) = orc.primal_dual {
            report.put_f("oracle", "primal_dual", w);
            report.put_f("oracle", "ratio_primal_dual", weight / w.max(f64::MIN_POSITIVE));
        }
        if let Some(w) = orc.exact {
            report.put_f("oracle", "exact", w);
            report.put_f("oracle", "ratio_exact", if w > 0.0 { weight / w } else { 1.0 });
        }
        if let Some(r) = &orc.refused {
            report.put("oracle", "refused", r.replace(',', ";"));
        }
        report.oracle = Some(orc);
        lap(&mut report, "oracle");
    }
    info!("pipeline: final weight {weight:.6} over {} edges", fin.edges.len());
    Ok((fin, report))
}

fn oracle_comparison(x_ids: &[PointId], pairs: &[TerminalPair], points: &PointSet, flags: &PipelineFlags) -> OracleReport {
    let all: Vec<PointId> = points.ids().collect();
    let mut out = OracleReport {
        primal_dual: oracles::primal_dual_forest(&all, pairs, points).ok().map(|f| f.weight()),
        ..Default::default()
    };
    let steiner: Vec<PointId> = all.iter().copied().filter(|v| x_ids.binary_search(v).is_err()).collect();
    let exact = match flags.mode {
        Mode::Forest => oracles::brute_force_forest(x_ids, &steiner, pairs, points, &flags.budget),
        Mode::Tree => oracles::exact_steiner_tree(x_ids, &steiner, points, &flags.budget),
    };
    match exact {
        Ok(f) => out.exact = Some(f.weight()),
        Err(e) => out.refused = Some(e.to_string()),
    }
    out
}

/// Graph restricted view used by tests: the net-respecting banyan of an
/// instance, with its hierarchy.
pub fn prepared_graph(inst: &Instance, flags: &PipelineFlags) -> Result<(WeightedGraph, NetHierarchy)> {
    let x_ids = inst.terminal_ids();
    let bparams = BanyanParams {
        t_cap: flags.t_cap,
        ..BanyanParams::new(flags.eps)
    };
    let banyan = build_banyan(&x_ids, &inst.points, &bparams)?;
    let h = NetHierarchy::build_over(&inst.points, &banyan.graph.sorted_vertices())?;
    let g = make_net_respecting(&banyan.graph, &h, &inst.points, flags.delta())?;
    Ok((g, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, GeneratorKind, GeneratorSpec};

    fn small(pairs: usize, seed: u64) -> Instance {
        generate_instance(&GeneratorSpec::new(GeneratorKind::Uniform, 60, 2, pairs, seed)).unwrap()
    }

    #[test]
    fn no_terminals_is_trivial() {
        let inst = small(0, 1);
        let (f, r) = run_pipeline(&inst, &PipelineFlags::new(0.5)).unwrap();
        assert!(f.is_empty());
        assert_eq!(r.final_weight, 0.0);
    }

    #[test]
    fn forest_connects_pairs_and_report_recomputes() {
        let inst = small(5, 2);
        let (f, r) = run_pipeline(&inst, &PipelineFlags::new(0.5)).unwrap();
        f.audit(&inst.terminals).unwrap();
        let text = solution_to_text(&f, &inst.points);
        let sum: f64 = f.edges.iter().map(|e| e.w).sum();
        assert_eq!(r.get_f("final", "weight"), Some(sum));
        assert_eq!(parse_solution(&text).unwrap().len(), f.edges.len());
    }

    #[test]
    fn tree_mode_gives_one_tree() {
        let inst = small(4, 3);
        let flags = PipelineFlags {
            mode: Mode::Tree,
            ..PipelineFlags::new(0.5)
        };
        let (f, _) = run_pipeline(&inst, &flags).unwrap();
        let labels: HashSet<_> = f.components.values().collect();
        assert_eq!(labels.len(), 1);
        for x in inst.terminal_ids() {
            assert!(f.components.contains_key(&x));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = small(6, 4);
        let flags = PipelineFlags::new(0.5);
        let (a, ra) = run_pipeline(&inst, &flags).unwrap();
        let (b, rb) = run_pipeline(&inst, &flags).unwrap();
        assert_eq!(solution_to_text(&a, &inst.points), solution_to_text(&b, &inst.points));
        assert_eq!(ra.to_csv(), rb.to_csv());
    }

    #[test]
    fn polish_never_increases_weight() {
        let inst = small(5, 5);
        let p = &inst.points;
        let mut edges = Vec::new();
        for &(a, b) in &inst.terminals {
            edges.push(Edge::new(a, b, p.dist(a, b)));
        }
        let f = ForestSolution::from_edges(edges);
        let all: Vec<usize> = p.ids().collect();
        let g = polish(&f, &inst.terminals, p, &all);
        assert!(g.weight() <= f.weight());
        g.audit(&inst.terminals).unwrap();
    }

    #[test]
    fn bad_eps_is_rejected() {
        let inst = small(2, 6);
        assert!(run_pipeline(&inst, &PipelineFlags::new(1.5)).is_err());
    }
}
