//! Binary Steiner trees and their decomposition into shallow proper trees.

use std::collections::VecDeque;
use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::graph::{Edge, UnionFind};
use crate::metric::{PointId, PointSet, METRIC_TOL};
use crate::oracles;

/// A Steiner tree whose nodes sit at points. Several nodes may share a point
/// (duplicates joined at distance zero). When `root` is set, `edges` are
/// `(parent, child)` node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerTree {
    pub nodes: Vec<PointId>,
    pub edges: Vec<(usize, usize)>,
    pub root: Option<usize>,
}

impl SteinerTree {
    /// Unrooted tree with one node per distinct endpoint.
    pub fn from_point_edges(pairs: &[(PointId, PointId)]) -> Self {
        let mut ids: Vec<PointId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        let pos: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        SteinerTree {
            edges: pairs.iter().map(|(a, b)| (pos[a], pos[b])).collect(),
            nodes: ids,
            root: None,
        }
    }

    pub fn from_edges(edges: &[Edge]) -> Self {
        let pairs: Vec<_> = edges.iter().map(|e| (e.u, e.v)).collect();
        Self::from_point_edges(&pairs)
    }

    pub fn weight(&self, points: &PointSet) -> f64 {
        self.edges.iter().map(|&(a, b)| points.dist(self.nodes[a], self.nodes[b])).sum()
    }

    /// Distinct real points in the tree, ascending.
    pub fn real_points(&self, points: &PointSet) -> Vec<PointId> {
        let mut v: Vec<PointId> = self.nodes.iter().copied().filter(|&p| points.is_real(p)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Child lists of a rooted tree.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            ch[p].push(c);
        }
        ch
    }

    /// Rooted, every node has at most two children, every Steiner node exactly two.
    pub fn is_binary(&self, points: &PointSet) -> bool {
        self.first_non_binary(points).is_none()
    }

    fn first_non_binary(&self, points: &PointSet) -> Option<usize> {
        if self.root.is_none() {
            return Some(0);
        }
        let ch = self.children();
        (0..self.nodes.len()).find(|&k| ch[k].len() > 2 || (!points.is_real(self.nodes[k]) && ch[k].len() != 2))
    }

    fn check_tree(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::NotATree("no nodes".into()));
        }
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(Error::NotATree(format!("edge ({a}, {b}) out of range")));
            }
            if !uf.union(a, b) {
                return Err(Error::NotATree(format!("cycle through ({a}, {b})")));
            }
        }
        if self.edges.len() + 1 != n {
            return Err(Error::NotATree("disconnected".into()));
        }
        Ok(())
    }
}

/// Roots the tree and makes it binary without increasing its weight: Steiner
/// leaves are pruned, Steiner nodes with one child are bypassed, and nodes with
/// more than two children are split by hanging a zero-distance duplicate.
/// The root is the Steiner node with the smallest point id, or the smallest real
/// point when there are no Steiner nodes.
pub fn binarize(tree: &SteinerTree, points: &PointSet) -> Result<SteinerTree> {
    tree.check_tree()?;
    let n = tree.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &tree.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let root = (0..n)
        .filter(|&k| !points.is_real(tree.nodes[k]))
        .min_by_key(|&k| (tree.nodes[k], k))
        .or_else(|| (0..n).min_by_key(|&k| (tree.nodes[k], k)))
        .unwrap();
    let mut nodes = tree.nodes.clone();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent = vec![usize::MAX; n];
    let mut order = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                parent[u] = v;
                children[v].push(u);
                order.push(u);
            }
        }
    }
    let steiner = |p: PointId| !points.is_real(p);
    // Prune Steiner leaves bottom-up.
    let mut alive = vec![true; n];
    for &v in order.iter().rev() {
        children[v].retain(|&c| alive[c]);
        if children[v].is_empty() && steiner(nodes[v]) {
            alive[v] = false;
        }
    }
    let mut root = root;
    if !alive[root] {
        return Err(Error::NotATree("no real points".into()));
    }
    // Bypass single-child Steiner nodes top-down.
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        let mut k = 0;
        while k < children[v].len() {
            let mut c = children[v][k];
            while steiner(nodes[c]) && children[c].len() == 1 {
                c = children[c][0];
            }
            children[v][k] = c;
            k += 1;
        }
        stack.extend(children[v].iter().copied());
    }
    while steiner(nodes[root]) && children[root].len() == 1 {
        root = children[root][0];
    }
    // Split wide nodes.
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if children[v].len() > 2 {
            let rest = children[v].split_off(1);
            let dup = nodes.len();
            nodes.push(nodes[v]);
            children.push(rest);
            children[v].push(dup);
        }
        stack.extend(children[v].iter().copied());
    }
    Ok(compact(&nodes, &children, root))
}

/// Reindexes the part reachable from `root` in preorder.
fn compact(nodes: &[PointId], children: &[Vec<usize>], root: usize) -> SteinerTree {
    let mut map = HashMap::default();
    let mut out_nodes = Vec::new();
    let mut edges = Vec::new();
    let mut stack = vec![(root, usize::MAX)];
    while let Some((v, p)) = stack.pop() {
        let k = out_nodes.len();
        map.insert(v, k);
        out_nodes.push(nodes[v]);
        if p != usize::MAX {
            edges.push((p, k));
        }
        for &c in children[v].iter().rev() {
            stack.push((c, k));
        }
    }
    SteinerTree {
        nodes: out_nodes,
        edges,
        root: Some(0),
    }
}

/// Depth bound `t = ceil((8/eps) ln(2/eps))` for shallow proper trees.
pub fn depth_bound(eps: f64) -> usize {
    ((8.0 / eps) * (2.0 / eps).ln()).ceil() as usize
}

/// A rooted binary tree with real leaves and Steiner internal nodes.
/// A single real point with no edges is the trivial proper tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ProperTree {
    pub nodes: Vec<PointId>,
    pub children: Vec<Vec<usize>>,
    pub root: usize,
}

impl ProperTree {
    fn singleton(x: PointId) -> Self {
        ProperTree {
            nodes: vec![x],
            children: vec![Vec::new()],
            root: 0,
        }
    }

    /// Reachable part from `root`, reindexed in preorder.
    fn rebuild(nodes: &[PointId], children: &[Vec<usize>], root: usize) -> Self {
        let t = compact(nodes, children, root);
        let ch = t.children();
        ProperTree {
            nodes: t.nodes,
            children: ch,
            root: 0,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    /// `(parent, child)` node pairs in preorder.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            for &c in self.children[v].iter().rev() {
                out.push((v, c));
                stack.push(c);
            }
        }
        out.sort_unstable();
        out
    }

    /// Real leaves `X(P)`, ascending.
    pub fn leaves(&self) -> Vec<PointId> {
        let mut v: Vec<PointId> = (0..self.nodes.len())
            .filter(|&k| self.children[k].is_empty())
            .map(|k| self.nodes[k])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn weight(&self, points: &PointSet) -> f64 {
        self.subtree_weight(points, self.root)
    }

    pub fn subtree_weight(&self, points: &PointSet, v: usize) -> f64 {
        let mut w = 0.0;
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for &c in &self.children[x] {
                w += points.dist(self.nodes[x], self.nodes[c]);
                stack.push(c);
            }
        }
        w
    }

    /// Maximum number of hops from the root to a leaf.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0)];
        while let Some((v, d)) = stack.pop() {
            best = best.max(d);
            for &c in &self.children[v] {
                stack.push((c, d + 1));
            }
        }
        best
    }

    /// Length of the path visiting the leaves of the subtree at `v` left to right.
    pub fn leaf_traversal_weight(&self, points: &PointSet, v: usize) -> f64 {
        let mut leaves = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if self.children[x].is_empty() {
                leaves.push(self.nodes[x]);
            }
            for &c in self.children[x].iter().rev() {
                stack.push(c);
            }
        }
        leaves.windows(2).map(|w| points.dist(w[0], w[1])).sum()
    }

    /// Leaves real, internal nodes Steiner with exactly two children.
    pub fn is_proper(&self, points: &PointSet) -> bool {
        (0..self.nodes.len()).all(|k| {
            let real = points.is_real(self.nodes[k]);
            match self.children[k].len() {
                0 => real,
                2 => !real,
                _ => false,
            }
        })
    }

    fn parent_of(&self) -> Vec<usize> {
        let mut p = vec![usize::MAX; self.nodes.len()];
        for (v, ch) in self.children.iter().enumerate() {
            for &c in ch {
                p[c] = v;
            }
        }
        p
    }
}

/// A Steiner tree written as proper trees joined at their leaves by real edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ProperDecomposition {
    pub trees: Vec<ProperTree>,
    pub real_edges: Vec<(PointId, PointId)>,
}

/// A parent/child edge of one proper tree that breaks separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub tree: usize,
    pub parent: usize,
    pub child: usize,
    /// `d(X(T_v), X(T_w)) - w(e) - eps w(P_w)`, negative for a violation.
    pub slack: f64,
    pub child_weight: f64,
}

impl ProperDecomposition {
    pub fn weight(&self, points: &PointSet) -> f64 {
        let t: f64 = self.trees.iter().map(|p| p.weight(points)).sum();
        t + self.real_edges.iter().map(|&(a, b)| points.dist(a, b)).sum::<f64>()
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(|t| t.depth()).max().unwrap_or(0)
    }

    /// All edges as point pairs (zero-length duplicate links dropped).
    pub fn point_edges(&self) -> Vec<(PointId, PointId)> {
        let mut out = self.real_edges.clone();
        for t in &self.trees {
            for (p, c) in t.edges() {
                if t.nodes[p] != t.nodes[c] {
                    out.push((t.nodes[p], t.nodes[c]));
                }
            }
        }
        out
    }

    /// Every tree edge with its separation slack.
    pub fn separation_report(&self, points: &PointSet, eps: f64) -> Vec<Violation> {
        let view = GlobalView::new(self);
        let mut out = Vec::new();
        for (k, t) in self.trees.iter().enumerate() {
            for (v, w) in t.edges() {
                let gv = view.local[k][v];
                let gw = view.local[k][w];
                let xv = view.reals_from(gv, gw);
                let xw = view.reals_from(gw, gv);
                let d = points.set_distance(&xv, &xw);
                let pw = t.subtree_weight(points, w);
                let ew = points.dist(t.nodes[v], t.nodes[w]);
                out.push(Violation {
                    tree: k,
                    parent: v,
                    child: w,
                    slack: d - ew - eps * pw,
                    child_weight: pw,
                });
            }
        }
        out
    }

    pub fn violations(&self, points: &PointSet, eps: f64) -> Vec<Violation> {
        self.separation_report(points, eps)
            .into_iter()
            .filter(|v| v.slack < -METRIC_TOL)
            .collect()
    }

    /// Structural checks: proper trees, depth at most `t`, separation everywhere.
    pub fn audit(&self, points: &PointSet, eps: f64, t: usize) -> std::result::Result<(), String> {
        for (k, tree) in self.trees.iter().enumerate() {
            if !tree.is_proper(points) {
                return Err(format!("tree {k} is not proper"));
            }
            if tree.depth() > t {
                return Err(format!("tree {k} has depth {} > {t}", tree.depth()));
            }
        }
        if let Some(v) = self.violations(points, eps).first() {
            return Err(format!("separation fails in tree {} with slack {}", v.tree, v.slack));
        }
        Ok(())
    }
}

/// The whole decomposition as one graph: real points are shared vertices,
/// Steiner nodes are private to their tree.
struct GlobalView {
    real: Vec<bool>,
    point: Vec<PointId>,
    adj: Vec<Vec<usize>>,
    local: Vec<Vec<usize>>,
}

impl GlobalView {
    fn new(d: &ProperDecomposition) -> Self {
        let mut view = GlobalView {
            real: Vec::new(),
            point: Vec::new(),
            adj: Vec::new(),
            local: Vec::new(),
        };
        let mut real_idx: HashMap<PointId, usize> = HashMap::default();
        let mut push = |view: &mut GlobalView, p: PointId, real: bool| -> usize {
            if real {
                if let Some(&g) = real_idx.get(&p) {
                    return g;
                }
            }
            let g = view.point.len();
            view.point.push(p);
            view.real.push(real);
            view.adj.push(Vec::new());
            if real {
                real_idx.insert(p, g);
            }
            g
        };
        for t in &d.trees {
            let loc: Vec<usize> = (0..t.nodes.len())
                .map(|k| push(&mut view, t.nodes[k], t.children[k].is_empty()))
                .collect();
            for (p, c) in t.edges() {
                view.adj[loc[p]].push(loc[c]);
                view.adj[loc[c]].push(loc[p]);
            }
            view.local.push(loc);
        }
        for &(a, b) in &d.real_edges {
            let ga = push(&mut view, a, true);
            let gb = push(&mut view, b, true);
            if ga != gb {
                view.adj[ga].push(gb);
                view.adj[gb].push(ga);
            }
        }
        view
    }

    /// Real points reachable from `start` without crossing into `blocked` directly.
    fn reals_from(&self, start: usize, blocked: usize) -> Vec<PointId> {
        let mut seen = vec![false; self.point.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut out = Vec::new();
        while let Some(x) = queue.pop_front() {
            if self.real[x] {
                out.push(self.point[x]);
            }
            for &y in &self.adj[x] {
                if (x == start && y == blocked) || seen[y] {
                    continue;
                }
                seen[y] = true;
                queue.push_back(y);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Proper decomposition of a binary tree followed by violator removal and
/// truncation at depth `depth_bound(eps)`.
pub fn properize(tree: &SteinerTree, points: &PointSet, eps: f64) -> Result<ProperDecomposition> {
    properize_with_depth(tree, points, eps, depth_bound(eps))
}

pub fn properize_with_depth(tree: &SteinerTree, points: &PointSet, eps: f64, t: usize) -> Result<ProperDecomposition> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps {eps} must lie in (0,1)")));
    }
    if let Some(k) = tree.first_non_binary(points) {
        return Err(Error::NotBinary(k));
    }
    let mut d = initial_decomposition(tree, points);
    remove_violators(&mut d, points, eps);
    truncate(&mut d, points, t.max(1));
    add_singletons(&mut d, tree, points);
    Ok(d)
}

fn initial_decomposition(tree: &SteinerTree, points: &PointSet) -> ProperDecomposition {
    let n = tree.nodes.len();
    let real = |k: usize| points.is_real(tree.nodes[k]);
    let ch = tree.children();
    let root = tree.root.unwrap();
    let mut parent = vec![usize::MAX; n];
    for &(p, c) in &tree.edges {
        parent[c] = p;
    }
    let mut real_edges = Vec::new();
    for &(p, c) in &tree.edges {
        if real(p) && real(c) && tree.nodes[p] != tree.nodes[c] {
            real_edges.push((tree.nodes[p], tree.nodes[c]));
        }
    }
    let mut trees = Vec::new();
    // Each Steiner node whose parent is real (or absent) tops one region.
    for top in 0..n {
        if real(top) || (parent[top] != usize::MAX && !real(parent[top])) {
            continue;
        }
        let mut nodes = Vec::new();
        let mut children: Vec<Vec<usize>> = Vec::new();
        let mut stack = vec![(top, usize::MAX)];
        while let Some((v, p)) = stack.pop() {
            let k = nodes.len();
            nodes.push(tree.nodes[v]);
            children.push(Vec::new());
            if p != usize::MAX {
                children[p].push(k);
            }
            if !real(v) {
                for &c in ch[v].iter().rev() {
                    stack.push((c, k));
                }
            }
        }
        let root_local = if top == root {
            0
        } else {
            let rho = nodes.len();
            nodes.push(tree.nodes[top]);
            let leaf = nodes.len();
            nodes.push(tree.nodes[parent[top]]);
            children.push(vec![0, leaf]);
            children.push(Vec::new());
            rho
        };
        trees.push(ProperTree::rebuild(&nodes, &children, root_local));
    }
    ProperDecomposition { trees, real_edges }
}

fn remove_violators(d: &mut ProperDecomposition, points: &PointSet, eps: f64) {
    loop {
        let worst = d.violations(points, eps).into_iter().min_by(|a, b| {
            a.child_weight
                .total_cmp(&b.child_weight)
                .then(a.tree.cmp(&b.tree))
                .then(a.child.cmp(&b.child))
        });
        let Some(v) = worst else { break };
        let view = GlobalView::new(d);
        let gv = view.local[v.tree][v.parent];
        let gw = view.local[v.tree][v.child];
        let xv = view.reals_from(gv, gw);
        let xw = view.reals_from(gw, gv);
        let link = closest_pair(points, &xv, &xw);
        split(d, v.tree, v.parent, v.child);
        d.real_edges.push(link);
    }
}

fn closest_pair(points: &PointSet, a: &[PointId], b: &[PointId]) -> (PointId, PointId) {
    let mut best = (f64::INFINITY, 0, 0);
    for &x in a {
        for &y in b {
            let dd = points.dist(x, y);
            if dd < best.0 {
                best = (dd, x, y);
            }
        }
    }
    (best.1.min(best.2), best.1.max(best.2))
}

/// Replaces tree `k` by `P_v` (with `v` bypassed) and `P_w`.
fn split(d: &mut ProperDecomposition, k: usize, v: usize, w: usize) {
    let tree = d.trees[k].clone();
    let parent = tree.parent_of();
    let mut children = tree.children.clone();
    let pw = ProperTree::rebuild(&tree.nodes, &tree.children, w);
    children[v].retain(|&c| c != w);
    let x = children[v][0];
    let new_root = if parent[v] == usize::MAX {
        x
    } else {
        let u = parent[v];
        for c in children[u].iter_mut() {
            if *c == v {
                *c = x;
            }
        }
        tree.root
    };
    let pv = ProperTree::rebuild(&tree.nodes, &children, new_root);
    d.trees.remove(k);
    let mut insert_at = k;
    for piece in [pv, pw] {
        if !piece.is_trivial() {
            d.trees.insert(insert_at, piece);
            insert_at += 1;
        }
    }
}

/// Cuts every subtree rooted at depth `t`: its leaves are joined by their MST
/// and its parent links to the leaf closest to the parent.
fn truncate(d: &mut ProperDecomposition, points: &PointSet, t: usize) {
    let mut extra = Vec::new();
    for tree in d.trees.iter_mut() {
        if tree.depth() <= t {
            continue;
        }
        let mut nodes = tree.nodes.clone();
        let mut children = tree.children.clone();
        let mut stack = vec![(tree.root, 0usize)];
        while let Some((v, depth)) = stack.pop() {
            for c in children[v].clone() {
                if depth + 1 == t && !children[c].is_empty() {
                    let sub = ProperTree::rebuild(&tree.nodes, &tree.children, c);
                    let xs = sub.leaves();
                    for e in oracles::mst(&xs, points).edges {
                        extra.push((e.u, e.v));
                    }
                    let anchor = nodes[v];
                    let closest = *xs
                        .iter()
                        .min_by(|&&a, &&b| points.dist(anchor, a).total_cmp(&points.dist(anchor, b)).then(a.cmp(&b)))
                        .unwrap();
                    let leaf = nodes.len();
                    nodes.push(closest);
                    children.push(Vec::new());
                    for slot in children[v].iter_mut() {
                        if *slot == c {
                            *slot = leaf;
                        }
                    }
                } else {
                    stack.push((c, depth + 1));
                }
            }
        }
        *tree = ProperTree::rebuild(&nodes, &children, tree.root);
    }
    d.real_edges.extend(extra);
}

fn add_singletons(d: &mut ProperDecomposition, tree: &SteinerTree, points: &PointSet) {
    let mut covered: rustc_hash::FxHashSet<PointId> = d.trees.iter().flat_map(|t| t.leaves()).collect();
    for x in tree.real_points(points) {
        if covered.insert(x) {
            d.trees.push(ProperTree::singleton(x));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(coords: &[(f64, f64)], real: &[bool]) -> PointSet {
        let v: Vec<Vec<f64>> = coords.iter().map(|&(x, y)| vec![x, y]).collect();
        PointSet::euclidean(2, &v, real.to_vec()).unwrap()
    }

    #[test]
    fn star_center_is_duplicated_once() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0), (-1.0, 2.0), (-1.0, -2.0)], &[false, true, true, true]);
        let t = SteinerTree::from_point_edges(&[(0, 1), (0, 2), (0, 3)]);
        let b = binarize(&t, &p).unwrap();
        assert!(b.is_binary(&p));
        assert_eq!(b.nodes.iter().filter(|&&x| x == 0).count(), 2);
        assert!((b.weight(&p) - t.weight(&p)).abs() < 1e-12);
        assert_eq!(b.real_points(&p), vec![1, 2, 3]);
    }

    #[test]
    fn binary_tree_is_unchanged() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0), (-1.0, 2.0)], &[false, true, true]);
        let t = SteinerTree::from_point_edges(&[(0, 1), (0, 2)]);
        let b = binarize(&t, &p).unwrap();
        assert_eq!(b.nodes, vec![0, 1, 2]);
        assert_eq!(b.edges, vec![(0, 1), (0, 2)]);
        assert_eq!(binarize(&b, &p).unwrap(), b);
    }

    #[test]
    fn cycle_is_rejected() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], &[true; 3]);
        let t = SteinerTree::from_point_edges(&[(0, 1), (1, 2), (2, 0)]);
        assert!(matches!(binarize(&t, &p), Err(Error::NotATree(_))));
    }

    #[test]
    fn non_binary_input_is_rejected() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0), (-1.0, 2.0), (-1.0, -2.0)], &[false, true, true, true]);
        let t = SteinerTree::from_point_edges(&[(0, 1), (0, 2), (0, 3)]);
        assert!(matches!(properize(&t, &p, 0.5), Err(Error::NotBinary(_))));
    }

    #[test]
    fn well_separated_tree_stays_whole() {
        // Steiner point at the centroid of a wide triangle: every split is far apart.
        let p = pts(
            &[(0.0, 0.0), (10.0, 0.0), (-5.0, 8.66), (-5.0, -8.66), (1.0, 0.0)],
            &[false, true, true, true, false],
        );
        let t = SteinerTree::from_point_edges(&[(0, 4), (4, 1), (0, 2), (0, 3)]);
        let b = binarize(&t, &p).unwrap();
        let d = properize(&b, &p, 0.1).unwrap();
        assert!(d.real_edges.is_empty());
        assert_eq!(d.trees.len(), 1);
        d.audit(&p, 0.1, depth_bound(0.1)).unwrap();
        assert!((d.weight(&p) - b.weight(&p)).abs() < 1e-9);
    }

    #[test]
    fn long_detour_is_replaced_by_real_edge() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (0.5, 5.0)], &[true, true, false]);
        let t = SteinerTree::from_point_edges(&[(0, 2), (2, 1)]);
        let b = binarize(&t, &p).unwrap();
        let d = properize(&b, &p, 0.5).unwrap();
        assert_eq!(d.real_edges, vec![(0, 1)]);
        assert!(d.trees.iter().all(|t| t.is_trivial()));
        assert!(d.weight(&p) <= (1.0 + 4.0 * 0.5) * b.weight(&p));
        d.audit(&p, 0.5, depth_bound(0.5)).unwrap();
    }

    #[test]
    fn spanning_tree_without_steiner_points() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.5), (3.0, 0.0)], &[true; 4]);
        let mst = oracles::mst(&[0, 1, 2, 3], &p);
        let t = SteinerTree::from_edges(&mst.edges);
        let d = properize(&binarize(&t, &p).unwrap(), &p, 0.3).unwrap();
        assert_eq!(d.trees.len(), 4);
        assert!(d.trees.iter().all(|t| t.is_trivial()));
        let mut got = d.real_edges.clone();
        got.sort_unstable();
        let want: Vec<_> = mst.edges.iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn truncation_caps_depth() {
        // A caterpillar of Steiner nodes along the x axis with one real leaf each.
        let mut coords = Vec::new();
        let mut real = Vec::new();
        for i in 0..6 {
            coords.push((10.0 * i as f64, 0.0));
            real.push(false);
        }
        for i in 0..6 {
            coords.push((10.0 * i as f64, 30.0 + i as f64));
            real.push(true);
        }
        coords.push((60.0, 0.0));
        real.push(true);
        let p = pts(&coords, &real);
        let mut pairs: Vec<(usize, usize)> = (0..5).map(|i| (i, i + 1)).collect();
        pairs.extend((0..6).map(|i| (i, 6 + i)));
        pairs.push((5, 12));
        let b = binarize(&SteinerTree::from_point_edges(&pairs), &p).unwrap();
        let mut d = initial_decomposition(&b, &p);
        assert_eq!(d.max_depth(), 6);
        truncate(&mut d, &p, 2);
        assert!(d.max_depth() <= 2);
        assert!(d.trees.iter().all(|t| t.is_proper(&p)));
        let mut covered: rustc_hash::FxHashSet<_> = d.trees.iter().flat_map(|t| t.leaves()).collect();
        covered.extend(d.real_edges.iter().flat_map(|&(a, b)| [a, b]));
        assert_eq!(covered.len(), 7);
        let g = crate::graph::WeightedGraph::from_pairs(&p, &[], &d.point_edges());
        assert!(g.is_connected());
    }
}
