//! Forest solutions and their audits.

use std::collections::BTreeMap;
use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::graph::{edge_order, Edge, UnionFind};
use crate::metric::PointId;

pub type TerminalPair = (PointId, PointId);

/// An edge set forming a forest, with a component label per touched vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForestSolution {
    pub edges: Vec<Edge>,
    pub components: BTreeMap<PointId, usize>,
    pub total_weight: f64,
}

impl ForestSolution {
    pub fn empty() -> Self {
        ForestSolution::default()
    }

    /// Builds a solution from edges, dropping duplicates and any edge that would
    /// close a cycle (processed in weight order, so the result is a minimum
    /// spanning forest of the given edges). Edges come out sorted by `(u, v)`.
    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut all: Vec<Edge> = edges.into_iter().collect();
        all.sort_by(edge_order);
        all.dedup_by(|a, b| a.key() == b.key());
        let mut ids: Vec<PointId> = all.iter().flat_map(|e| [e.u, e.v]).collect();
        ids.sort_unstable();
        ids.dedup();
        let local: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut uf = UnionFind::new(ids.len());
        let mut kept: Vec<Edge> = all
            .into_iter()
            .filter(|e| uf.union(local[&e.u], local[&e.v]))
            .collect();
        kept.sort_by_key(|a| a.key());
        let mut label_of_root = HashMap::default();
        let mut components = BTreeMap::new();
        for &v in &ids {
            let r = uf.find(local[&v]);
            let next = label_of_root.len();
            let label = *label_of_root.entry(r).or_insert(next);
            components.insert(v, label);
        }
        let total_weight = kept.iter().map(|e| e.w).sum();
        ForestSolution {
            edges: kept,
            components,
            total_weight,
        }
    }

    pub fn weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// True if `a` and `b` are the same vertex or lie in the same tree.
    pub fn connects(&self, a: PointId, b: PointId) -> bool {
        if a == b {
            return true;
        }
        match (self.components.get(&a), self.components.get(&b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Exact audit: acyclic, labels consistent with edges, weight is the edge sum,
    /// and every pair connected.
    pub fn audit(&self, pairs: &[TerminalPair]) -> Result<()> {
        let mut ids: Vec<PointId> = self.edges.iter().flat_map(|e| [e.u, e.v]).collect();
        ids.sort_unstable();
        ids.dedup();
        let local: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut uf = UnionFind::new(ids.len());
        for e in &self.edges {
            if !uf.union(local[&e.u], local[&e.v]) {
                return Err(Error::Infeasible(format!("cycle through edge ({}, {})", e.u, e.v)));
            }
        }
        let sum: f64 = self.edges.iter().map(|e| e.w).sum();
        if sum != self.total_weight {
            return Err(Error::Infeasible(format!(
                "recorded weight {} differs from edge sum {sum}",
                self.total_weight
            )));
        }
        for &(a, b) in pairs {
            if a == b {
                continue;
            }
            let ok = match (local.get(&a), local.get(&b)) {
                (Some(&x), Some(&y)) => uf.same(x, y),
                _ => false,
            };
            if !ok || !self.connects(a, b) {
                return Err(Error::TerminalDisconnected(a, b));
            }
        }
        Ok(())
    }

    /// Removes Steiner leaves repeatedly: any leaf vertex that is not a terminal
    /// endpoint, and any whole tree that contains no demanded pair.
    pub fn pruned(&self, pairs: &[TerminalPair]) -> ForestSolution {
        let mut needed: rustc_hash::FxHashSet<PointId> = rustc_hash::FxHashSet::default();
        for &(a, b) in pairs {
            if a != b {
                needed.insert(a);
                needed.insert(b);
            }
        }
        let mut edges = self.edges.clone();
        loop {
            let mut deg: HashMap<PointId, usize> = HashMap::default();
            for e in &edges {
                *deg.entry(e.u).or_default() += 1;
                *deg.entry(e.v).or_default() += 1;
            }
            let before = edges.len();
            edges.retain(|e| {
                let leaf_u = deg[&e.u] == 1 && !needed.contains(&e.u);
                let leaf_v = deg[&e.v] == 1 && !needed.contains(&e.v);
                !(leaf_u || leaf_v)
            });
            if edges.len() == before {
                break;
            }
        }
        // Drop trees that carry no demand.
        let f = ForestSolution::from_edges(edges);
        let mut useful = rustc_hash::FxHashSet::default();
        for &(a, b) in pairs {
            if a != b {
                if let Some(&c) = f.components.get(&a) {
                    useful.insert(c);
                }
                if let Some(&c) = f.components.get(&b) {
                    useful.insert(c);
                }
            }
        }
        let keep: Vec<Edge> = f
            .edges
            .iter()
            .copied()
            .filter(|e| useful.contains(&f.components[&e.u]))
            .collect();
        ForestSolution::from_edges(keep)
    }
}

/// Pairs `(x1,x2), (x2,x3), …` encoding "connect all of `ids`".
pub fn chain_pairs(ids: &[PointId]) -> Vec<TerminalPair> {
    ids.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_edges_drops_cycles_and_duplicates() {
        let f = ForestSolution::from_edges(vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 2, 1.0),
            Edge::new(0, 2, 1.5),
            Edge::new(1, 0, 1.0),
        ]);
        assert_eq!(f.edges.len(), 2);
        assert_eq!(f.total_weight, 2.0);
        f.audit(&[(0, 2)]).unwrap();
        assert_eq!(f.audit(&[(0, 5)]).unwrap_err(), Error::TerminalDisconnected(0, 5));
    }

    #[test]
    fn pruning_removes_steiner_leaves() {
        let f = ForestSolution::from_edges(vec![
            Edge::new(0, 1, 1.0),
            Edge::new(1, 2, 1.0),
            Edge::new(2, 3, 1.0),
            Edge::new(5, 6, 1.0),
        ]);
        let p = f.pruned(&[(0, 2)]);
        assert_eq!(p.edges.len(), 2);
        p.audit(&[(0, 2)]).unwrap();
        assert!(f.pruned(&[]).is_empty());
    }
}
