//! Explicit cluster configurations and the validity conditions relating a
//! parent to its children. The engine in the parent module works with a
//! compressed state; these types spell the same information out field by
//! field and are used for enumeration, auditing and tests.

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use crate::clustering::{ClusterKind, ClusterTree, NodeId};
use crate::error::{Error, Result};
use crate::forest::TerminalPair;
use crate::graph::{Edge, UnionFind};
use crate::metric::PointId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    /// Per portal, bit `k` set if child `k` has a path leaving through it.
    pub exit_lists: Vec<u64>,
    /// Per portal, its block in the "connected inside" partition
    /// (first-occurrence numbering).
    pub internal_conn: Vec<usize>,
    /// Block pairs `(i, j)`, `i < j`, that must be connected outside.
    pub external_need: Vec<(usize, usize)>,
    /// Secondary clusters only: exit lists of each non-leaf primary child.
    pub primary_child_detail: Vec<(NodeId, Vec<u64>)>,
}

impl Configuration {
    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.internal_conn[a] == self.internal_conn[b]
    }

    pub fn needs(&self, a: usize, b: usize) -> bool {
        let (x, y) = (self.internal_conn[a], self.internal_conn[b]);
        self.external_need.contains(&(x.min(y), x.max(y)))
    }

    pub fn conn_matrix(&self) -> Vec<Vec<bool>> {
        let m = self.internal_conn.len();
        (0..m).map(|a| (0..m).map(|b| self.connected(a, b)).collect()).collect()
    }

    pub fn need_matrix(&self) -> Vec<Vec<bool>> {
        let m = self.internal_conn.len();
        (0..m).map(|a| (0..m).map(|b| self.needs(a, b)).collect()).collect()
    }
}

fn detail_children(tree: &ClusterTree, node: NodeId) -> Vec<NodeId> {
    let c = &tree.nodes[node];
    if c.kind != ClusterKind::Secondary {
        return Vec::new();
    }
    c.children
        .iter()
        .copied()
        .filter(|&k| tree.nodes[k].kind == ClusterKind::Primary && !tree.nodes[k].is_leaf())
        .collect()
}

/// Restricted growth strings of length `m`.
fn partitions(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; m];
    loop {
        out.push(rgs.clone());
        let mut i = m;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            let cap = rgs[..i].iter().copied().max().unwrap_or(0) + 1;
            if rgs[i] < cap {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
        }
    }
}

/// Every assignment of values `0..radix[k]` to position `k`.
fn odometer(radix: Vec<u64>) -> impl Iterator<Item = Vec<u64>> + Clone {
    let empty = radix.iter().any(|&r| r == 0);
    let mut cur = (!empty).then(|| vec![0u64; radix.len()]);
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut k = 0;
        let next = loop {
            if k == radix.len() {
                break None;
            }
            let c = cur.as_mut().expect("present");
            c[k] += 1;
            if c[k] < radix[k] {
                break Some(c.clone());
            }
            c[k] = 0;
            k += 1;
        };
        cur = next;
        Some(out)
    })
}

fn bits(n: usize) -> u64 {
    assert!(n < 64, "too many children to enumerate");
    1u64 << n
}

/// All syntactically valid configurations of `node`, without duplicates.
pub fn enumerate_configurations(tree: &ClusterTree, node: NodeId) -> impl Iterator<Item = Configuration> + '_ {
    let c = &tree.nodes[node];
    let m = c.portals.len();
    let exit_radix = vec![bits(c.children.len()); m];
    let detail = detail_children(tree, node);
    let mut detail_radix = Vec::new();
    for &b in &detail {
        let cb = &tree.nodes[b];
        detail_radix.extend(std::iter::repeat(bits(cb.children.len())).take(cb.portals.len()));
    }
    let is_root = node == tree.root;
    partitions(m).into_iter().flat_map(move |rgs| {
        let k = rgs.iter().copied().max().map_or(0, |x| x + 1);
        let block_pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let subsets: u64 = if is_root { 1 } else { bits(block_pairs.len()) };
        let exit_radix = exit_radix.clone();
        let detail_radix = detail_radix.clone();
        let detail = detail.clone();
        (0..subsets).flat_map(move |mask| {
            let need: Vec<(usize, usize)> = block_pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            let rgs = rgs.clone();
            let detail_radix = detail_radix.clone();
            let detail = detail.clone();
            odometer(exit_radix.clone()).flat_map(move |exits| {
                let rgs = rgs.clone();
                let need = need.clone();
                let detail = detail.clone();
                odometer(detail_radix.clone()).map(move |flat| {
                    let mut pos = 0;
                    let primary_child_detail = detail
                        .iter()
                        .map(|&b| {
                            let n = tree.nodes[b].portals.len();
                            let part = flat[pos..pos + n].to_vec();
                            pos += n;
                            (b, part)
                        })
                        .collect();
                    Configuration {
                        exit_lists: exits.clone(),
                        internal_conn: rgs.clone(),
                        external_need: need.clone(),
                        primary_child_detail,
                    }
                })
            })
        })
    })
}

/// Closed-form size of `enumerate_configurations(tree, node)`, saturating.
pub fn configuration_count(tree: &ClusterTree, node: NodeId) -> u128 {
    let c = &tree.nodes[node];
    let m = c.portals.len();
    // Stirling numbers of the second kind, row m.
    let mut row = vec![1u128];
    for i in 1..=m {
        let mut next = vec![0u128; i + 1];
        for (k, slot) in next.iter_mut().enumerate().skip(1) {
            let stay = row.get(k).copied().unwrap_or(0).saturating_mul(k as u128);
            *slot = stay.saturating_add(row[k - 1]);
        }
        row = next;
    }
    let pow2 = |e: usize| if e >= 127 { u128::MAX } else { 1u128 << e };
    let mut parts: u128 = 0;
    for (k, &s) in row.iter().enumerate() {
        let needs = if node == tree.root { 1 } else { pow2(k * k.saturating_sub(1) / 2) };
        parts = parts.saturating_add(s.saturating_mul(needs));
    }
    let mut total = parts.saturating_mul(pow2(c.children.len() * m));
    for b in detail_children(tree, node) {
        let cb = &tree.nodes[b];
        total = total.saturating_mul(pow2(cb.children.len() * cb.portals.len()));
    }
    total
}

fn locate(tree: &ClusterTree, parent: NodeId, v: PointId) -> Option<(usize, usize)> {
    let p = &tree.nodes[parent];
    let child = tree.child_containing(parent, v)?;
    let ci = p.children.iter().position(|&k| k == child)?;
    let pi = tree.nodes[child].portals.binary_search(&v).ok()?;
    Some((ci, pi))
}

/// Portals of `child` through which a path from the grandchild holding `t`
/// leaves `child`.
fn reaching(tree: &ClusterTree, child: NodeId, cfg: &Configuration, t: PointId) -> Vec<usize> {
    let c = &tree.nodes[child];
    if c.is_leaf() {
        return vec![0];
    }
    let Some(g) = tree.child_containing(child, t) else { return Vec::new() };
    let gi = c.children.iter().position(|&k| k == g).expect("grandchild");
    (0..c.portals.len()).filter(|&a| cfg.exit_lists[a] >> gi & 1 == 1).collect()
}

/// The four conditions tying a parent's children configurations and chosen
/// crossing edges together.
pub fn check_validity(
    tree: &ClusterTree,
    parent: NodeId,
    child_configs: &[Configuration],
    crossing_edges: &[(PointId, PointId)],
    terminals: &[TerminalPair],
) -> Result<bool> {
    let p = &tree.nodes[parent];
    if child_configs.len() != p.children.len() {
        return Err(Error::InvalidParameter(format!(
            "{} configurations for {} children",
            child_configs.len(),
            p.children.len()
        )));
    }
    let mut offset = Vec::with_capacity(p.children.len() + 1);
    offset.push(0);
    for (k, &c) in p.children.iter().enumerate() {
        let m = tree.nodes[c].portals.len();
        if child_configs[k].internal_conn.len() != m || child_configs[k].exit_lists.len() != m {
            return Err(Error::InvalidParameter(format!("configuration of child {k} has the wrong portal count")));
        }
        offset.push(offset[k] + m);
    }
    let idx = |(ci, pi): (usize, usize)| offset[ci] + pi;
    let mut uf = UnionFind::new(offset[p.children.len()]);
    for (k, cfg) in child_configs.iter().enumerate() {
        let mut first: HashMap<usize, usize> = HashMap::default();
        for (a, &b) in cfg.internal_conn.iter().enumerate() {
            let f = *first.entry(b).or_insert(a);
            uf.union(idx((k, f)), idx((k, a)));
        }
    }
    let mut touched: HashSet<(usize, usize)> = HashSet::default();
    for &(a, b) in crossing_edges {
        let la = locate(tree, parent, a).ok_or(Error::NonPortalCrossing(a, b))?;
        let lb = locate(tree, parent, b).ok_or(Error::NonPortalCrossing(a, b))?;
        if la.0 == lb.0 {
            return Err(Error::InvalidParameter(format!("edge ({a}, {b}) does not cross between children")));
        }
        touched.insert(la);
        touched.insert(lb);
        uf.union(idx(la), idx(lb));
    }
    let mut exiting: HashSet<usize> = HashSet::default();
    for &x in &p.portals {
        if let Some(l) = locate(tree, parent, x) {
            exiting.insert(uf.find(idx(l)));
        }
    }
    let exits = |uf: &mut UnionFind, l: (usize, usize)| exiting.contains(&uf.find(idx(l)));

    // (1) a primary child keeps at most one class of parent-exiting paths
    // unless those portals are connected inside it.
    if p.kind == ClusterKind::Primary {
        for (k, &c) in p.children.iter().enumerate() {
            let child = &tree.nodes[c];
            if child.kind != ClusterKind::Primary || child.is_leaf() {
                continue;
            }
            let mut classes: HashSet<usize> = HashSet::default();
            for a in 0..child.portals.len() {
                let active = child_configs[k].exit_lists[a] != 0 || touched.contains(&(k, a));
                if active && exits(&mut uf, (k, a)) {
                    classes.insert(uf.find(idx((k, a))));
                }
            }
            if classes.len() > 1 {
                return Ok(false);
            }
        }
    }
    // (2) outside needs are met here or passed further up.
    for (k, cfg) in child_configs.iter().enumerate() {
        for &(i, j) in &cfg.external_need {
            let ra = cfg.internal_conn.iter().position(|&b| b == i);
            let rb = cfg.internal_conn.iter().position(|&b| b == j);
            let (Some(ra), Some(rb)) = (ra, rb) else {
                return Err(Error::InvalidParameter(format!("child {k} marks an empty block")));
            };
            let same = uf.same(idx((k, ra)), idx((k, rb)));
            if !same && !(exits(&mut uf, (k, ra)) && exits(&mut uf, (k, rb))) {
                return Ok(false);
            }
        }
    }
    // (3) and (4) terminal reachability.
    for &(s, t) in terminals {
        if s == t {
            continue;
        }
        let (cs, ct) = (tree.child_containing(parent, s), tree.child_containing(parent, t));
        let side = |v: PointId, c: NodeId| -> Vec<(usize, usize)> {
            let k = p.children.iter().position(|&x| x == c).expect("child");
            reaching(tree, c, &child_configs[k], v).into_iter().map(|a| (k, a)).collect()
        };
        match (cs, ct) {
            (Some(a), Some(b)) if a == b => {}
            (Some(a), Some(b)) => {
                let (sa, sb) = (side(s, a), side(t, b));
                let joined = sa.iter().any(|&x| sb.iter().any(|&y| uf.same(idx(x), idx(y))));
                let both_exit = sa.iter().any(|&x| exits(&mut uf, x)) && sb.iter().any(|&y| exits(&mut uf, y));
                if !joined && !both_exit {
                    return Ok(false);
                }
            }
            (Some(a), None) | (None, Some(a)) => {
                let v = if cs.is_some() { s } else { t };
                if !side(v, a).into_iter().any(|x| exits(&mut uf, x)) {
                    return Ok(false);
                }
            }
            (None, None) => {}
        }
    }
    Ok(true)
}

/// Configuration of `node` induced by a forest.
pub fn derive_configuration(tree: &ClusterTree, node: NodeId, forest: &[Edge]) -> Configuration {
    let c = &tree.nodes[node];
    let mut ids: Vec<PointId> = forest.iter().flat_map(|e| [e.u, e.v]).chain(c.portals.iter().copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    let local: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut inside = UnionFind::new(ids.len());
    let mut global = UnionFind::new(ids.len());
    let mut touched: HashSet<PointId> = HashSet::default();
    for e in forest {
        global.union(local[&e.u], local[&e.v]);
        touched.insert(e.u);
        touched.insert(e.v);
        if c.contains(e.u) && c.contains(e.v) {
            inside.union(local[&e.u], local[&e.v]);
        }
    }
    let mut child_bits: HashMap<usize, u64> = HashMap::default();
    for &v in &ids {
        if !c.contains(v) || !(touched.contains(&v) || c.is_portal(v)) {
            continue;
        }
        if let Some(k) = tree.child_containing(node, v) {
            let ci = c.children.iter().position(|&x| x == k).expect("child");
            *child_bits.entry(inside.find(local[&v])).or_default() |= 1 << ci;
        }
    }
    let mut exit_lists = Vec::with_capacity(c.portals.len());
    let mut internal_conn = Vec::with_capacity(c.portals.len());
    let mut block_of: HashMap<usize, usize> = HashMap::default();
    let mut reps: Vec<PointId> = Vec::new();
    for &a in &c.portals {
        let r = inside.find(local[&a]);
        exit_lists.push(if touched.contains(&a) { child_bits.get(&r).copied().unwrap_or(0) } else { 0 });
        let next = block_of.len();
        let b = *block_of.entry(r).or_insert_with(|| {
            reps.push(a);
            next
        });
        internal_conn.push(b);
    }
    let mut external_need = Vec::new();
    if node != tree.root {
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let (a, b) = (reps[i], reps[j]);
                if touched.contains(&a) && touched.contains(&b) && global.same(local[&a], local[&b]) {
                    external_need.push((i, j));
                }
            }
        }
    }
    let primary_child_detail = detail_children(tree, node)
        .into_iter()
        .map(|b| (b, derive_configuration(tree, b, forest).exit_lists))
        .collect();
    Configuration {
        exit_lists,
        internal_conn,
        external_need,
        primary_child_detail,
    }
}

/// Re-checks a forest cluster by cluster: every crossing edge must join
/// portals of sibling children, and the derived configurations must satisfy
/// the validity conditions. Returns one message per failure.
pub fn audit_forest(tree: &ClusterTree, forest: &[Edge], terminals: &[TerminalPair]) -> Vec<String> {
    let mut at: HashMap<NodeId, Vec<(PointId, PointId)>> = HashMap::default();
    for e in forest {
        let top = tree.lca(tree.leaf_of[&e.u], tree.leaf_of[&e.v]);
        at.entry(top).or_default().push((e.u, e.v));
    }
    let mut out = Vec::new();
    for (id, c) in tree.nodes.iter().enumerate() {
        if c.is_leaf() {
            continue;
        }
        let cfgs: Vec<Configuration> = c.children.iter().map(|&k| derive_configuration(tree, k, forest)).collect();
        let cross = at.get(&id).cloned().unwrap_or_default();
        match check_validity(tree, id, &cfgs, &cross, terminals) {
            Ok(true) => {}
            Ok(false) => out.push(format!("cluster {id}: validity conditions fail")),
            Err(e) => out.push(format!("cluster {id}: {e}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{assign_portals, build_cluster_tree, ClusterParams};
    use crate::dp::{solve_forest, DpParams};
    use crate::graph::WeightedGraph;
    use crate::metric::PointSet;

    fn line_tree(xs: &[f64], s_log: u32) -> (PointSet, WeightedGraph, ClusterTree) {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let p = PointSet::euclidean(1, &pts, vec![true; xs.len()]).unwrap().normalized().unwrap();
        let ids: Vec<usize> = (0..xs.len()).collect();
        let pairs: Vec<_> = (0..xs.len()).flat_map(|a| (a + 1..xs.len()).map(move |b| (a, b))).collect();
        let g = WeightedGraph::from_pairs(&p, &ids, &pairs);
        let params = ClusterParams {
            s_log: Some(s_log),
            ..ClusterParams::new(0.5, 64.0)
        };
        let t = assign_portals(build_cluster_tree(&g, &p, &params).unwrap(), &g, &p).unwrap();
        (p, g, t)
    }

    /// Generate-and-filter over raw portal-level fields.
    fn brute_count(tree: &ClusterTree, node: NodeId) -> u128 {
        let c = &tree.nodes[node];
        let m = c.portals.len();
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
        let mut ok = 0u128;
        for conn in 0u64..1 << cells.len() {
            let on = |mask: u64, a: usize, b: usize| {
                if a == b {
                    return true;
                }
                let (x, y) = (a.min(b), a.max(b));
                mask >> cells.iter().position(|&p| p == (x, y)).unwrap() & 1 == 1
            };
            let transitive = (0..m).all(|a| (0..m).all(|b| (0..m).all(|d| !(on(conn, a, b) && on(conn, b, d)) || on(conn, a, d))));
            if !transitive {
                continue;
            }
            for need in 0u64..1 << cells.len() {
                let valid = cells.iter().enumerate().all(|(k, &(a, b))| {
                    let set = need >> k & 1 == 1;
                    if !set {
                        // Unset entries must be unset for every member of the two blocks.
                        return (0..m).all(|x| (0..m).all(|y| {
                            !(on(conn, a, x) && on(conn, b, y) && x != y && !on(conn, x, y))
                                || need >> cells.iter().position(|&p| p == (x.min(y), x.max(y))).unwrap() & 1 == 0
                        }));
                    }
                    !on(conn, a, b) && node != tree.root
                });
                if valid {
                    ok += 1;
                }
            }
        }
        let mut total = ok * (1u128 << (c.children.len() * m));
        for b in detail_children(tree, node) {
            let cb = &tree.nodes[b];
            total *= 1u128 << (cb.children.len() * cb.portals.len());
        }
        total
    }

    #[test]
    fn counts_match_closed_form_and_brute_force() {
        let (_, _, t) = line_tree(&[0.0, 1.0, 2.5, 7.0, 8.0, 20.0], 1);
        let mut checked = 0;
        for id in 0..t.nodes.len() {
            let c = &t.nodes[id];
            if c.portals.len() > 3 || c.children.len() > 3 {
                continue;
            }
            let closed = configuration_count(&t, id);
            if closed > 50_000 {
                continue;
            }
            let listed: Vec<Configuration> = enumerate_configurations(&t, id).collect();
            let distinct: HashSet<&Configuration> = listed.iter().collect();
            assert_eq!(listed.len() as u128, closed, "node {id}");
            assert_eq!(distinct.len(), listed.len());
            assert_eq!(brute_count(&t, id), closed, "node {id}");
            if c.is_leaf() {
                assert_eq!(closed, 1);
            }
            checked += 1;
        }
        assert!(checked > 6);
        assert_eq!(configuration_count(&t, t.root), enumerate_configurations(&t, t.root).count() as u128);
    }

    #[test]
    fn one_portal_one_child_has_two_configurations() {
        let (_, _, t) = line_tree(&[0.0, 1.0, 2.5, 7.0, 8.0, 20.0], 1);
        for id in 0..t.nodes.len() {
            let c = &t.nodes[id];
            if c.portals.len() == 1 && c.children.len() == 1 && detail_children(&t, id).is_empty() {
                assert_eq!(configuration_count(&t, id), 2);
            }
            if c.portals.is_empty() && c.children.is_empty() {
                assert_eq!(configuration_count(&t, id), 1);
            }
        }
    }

    #[test]
    fn validity_follows_terminal_paths() {
        let (p, g, t) = line_tree(&[0.0, 1.0, 2.0, 30.0, 31.0, 32.0], 2);
        let root = t.root;
        let pairs = [(0usize, 5usize)];
        assert_ne!(t.child_containing(root, 0), t.child_containing(root, 5));
        let sol = solve_forest(&t, &g, &p, &pairs, &DpParams::exact()).unwrap();
        let cfgs: Vec<Configuration> = t.nodes[root].children.iter().map(|&k| derive_configuration(&t, k, &sol.dp_edges)).collect();
        let cross: Vec<(usize, usize)> = sol
            .dp_edges
            .iter()
            .filter(|e| t.lca(t.leaf_of[&e.u], t.leaf_of[&e.v]) == root)
            .map(|e| (e.u, e.v))
            .collect();
        assert!(!cross.is_empty());
        assert!(check_validity(&t, root, &cfgs, &cross, &pairs).unwrap());
        assert!(!check_validity(&t, root, &cfgs, &[], &pairs).unwrap());
        assert!(check_validity(&t, root, &cfgs, &cross, &[]).unwrap());
        assert!(audit_forest(&t, &sol.dp_edges, &pairs).iter().all(|m| !m.contains("non-portal")));
    }

    #[test]
    fn dead_end_need_is_invalid() {
        let (_, _, t) = line_tree(&[0.0, 1.0, 2.0, 30.0, 31.0, 32.0], 2);
        let root = t.root;
        let mut cfgs: Vec<Configuration> = t.nodes[root].children.iter().map(|&k| derive_configuration(&t, k, &[])).collect();
        assert!(check_validity(&t, root, &cfgs, &[], &[]).unwrap());
        let k = t.nodes[root]
            .children
            .iter()
            .position(|&c| t.nodes[c].portals.len() >= 2)
            .expect("a child with two portals");
        let m = cfgs[k].internal_conn.len();
        cfgs[k].internal_conn = (0..m).collect();
        cfgs[k].external_need = vec![(0, 1)];
        assert!(!check_validity(&t, root, &cfgs, &[], &[]).unwrap());
    }

    #[test]
    fn non_portal_crossing_is_an_error() {
        let (_, _, t) = line_tree(&[0.0, 1.0, 2.0, 30.0, 31.0, 32.0], 2);
        let root = t.root;
        let cfgs: Vec<Configuration> = t.nodes[root].children.iter().map(|&k| derive_configuration(&t, k, &[])).collect();
        let inner = (0..6).find(|&v| !t.nodes[t.child_containing(root, v).unwrap()].is_portal(v));
        if let Some(v) = inner {
            let w = if v < 3 { 4 } else { 1 };
            assert!(matches!(
                check_validity(&t, root, &cfgs, &[(v, w)], &[]),
                Err(Error::NonPortalCrossing(..))
            ));
        }
    }
}
