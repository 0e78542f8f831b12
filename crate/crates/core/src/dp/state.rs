//! Boundary states: a partition of tracked vertices into blocks connected in
//! the partial forest, a grouping of blocks that must end up connected, and
//! the open terminal pairs carried by each group.

use std::sync::Arc;

/// Realizing edge set, shared between states.
#[derive(Debug)]
pub enum Cert {
    Nil,
    Edge(u32, Arc<Cert>),
    Join(Arc<Cert>, Arc<Cert>),
}

impl Cert {
    pub fn edges(root: &Arc<Cert>) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![root.clone()];
        while let Some(c) = stack.pop() {
            match &*c {
                Cert::Nil => {}
                Cert::Edge(e, rest) => {
                    out.push(*e);
                    stack.push(rest.clone());
                }
                Cert::Join(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Canonical state key. `block[k]` is the block of the `k`-th tracked vertex
/// (first-occurrence numbering), `group[b]` the group of block `b`, and
/// `labels` the sorted `(pair, group)` list of pairs with one endpoint inside.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key {
    pub block: Vec<u16>,
    pub group: Vec<u16>,
    pub labels: Vec<(u32, u16)>,
}

#[derive(Debug, Clone)]
pub struct State {
    pub key: Key,
    pub weight: f64,
    /// Weight plus an estimate of the cost still owed; orders the beam.
    pub score: f64,
    pub cert: Arc<Cert>,
}

/// Mutable form used while editing a state.
#[derive(Debug, Clone)]
pub struct Work {
    pub block: Vec<usize>,
    pub group: Vec<usize>,
    pub labels: Vec<(u32, usize)>,
}

impl Work {
    pub fn from_key(k: &Key) -> Self {
        Work {
            block: k.block.iter().map(|&b| b as usize).collect(),
            group: k.group.iter().map(|&g| g as usize).collect(),
            labels: k.labels.iter().map(|&(p, g)| (p, g as usize)).collect(),
        }
    }

    /// Disjoint union: `other`'s vertices are appended after `self`'s.
    pub fn concat(&mut self, other: &Key) {
        let nb = self.group.len();
        let ng = self.group.iter().copied().max().map_or(0, |g| g + 1);
        self.block.extend(other.block.iter().map(|&b| b as usize + nb));
        self.group.extend(other.group.iter().map(|&g| g as usize + ng));
        self.labels.extend(other.labels.iter().map(|&(p, g)| (p, g as usize + ng)));
        self.settle_labels();
    }

    fn relabel_group(&mut self, from: usize, to: usize) {
        for g in self.group.iter_mut() {
            if *g == from {
                *g = to;
            }
        }
        for l in self.labels.iter_mut() {
            if l.1 == from {
                l.1 = to;
            }
        }
    }

    /// Pairs seen at both endpoints: same group means done; different groups
    /// must be joined eventually, so the groups merge.
    fn settle_labels(&mut self) {
        loop {
            self.labels.sort_unstable();
            let dup = self.labels.windows(2).position(|w| w[0].0 == w[1].0);
            let Some(k) = dup else { return };
            let (a, b) = (self.labels[k].1, self.labels[k + 1].1);
            self.labels.drain(k..k + 2);
            if a != b {
                self.relabel_group(b.max(a), a.min(b));
            }
        }
    }

    /// Joins the blocks of tracked vertices `x` and `y`. Returns false if they
    /// already share a block.
    pub fn join(&mut self, x: usize, y: usize) -> bool {
        let (bx, by) = (self.block[x], self.block[y]);
        if bx == by {
            return false;
        }
        for b in self.block.iter_mut() {
            if *b == by {
                *b = bx;
            }
        }
        let (gx, gy) = (self.group[bx], self.group[by]);
        if gx != gy {
            self.relabel_group(gy, gx);
        }
        self.settle_labels();
        true
    }

    /// Stops tracking vertex `x`. Fails if that seals a block whose group
    /// still has other blocks or open pairs.
    pub fn forget(&mut self, x: usize) -> bool {
        let b = self.block.remove(x);
        if self.block.contains(&b) {
            return true;
        }
        let g = self.group[b];
        let shared = self
            .block
            .iter()
            .any(|&o| o != b && self.group[o] == g);
        if shared || self.labels.iter().any(|l| l.1 == g) {
            return false;
        }
        true
    }

    pub fn to_key(&self) -> Key {
        let mut bmap: Vec<Option<u16>> = vec![None; self.group.len()];
        let mut gmap: rustc_hash::FxHashMap<usize, u16> = Default::default();
        let mut block = Vec::with_capacity(self.block.len());
        let mut group = Vec::new();
        for &b in &self.block {
            let id = match bmap[b] {
                Some(id) => id,
                None => {
                    let id = group.len() as u16;
                    bmap[b] = Some(id);
                    let ng = gmap.len() as u16;
                    let g = *gmap.entry(self.group[b]).or_insert(ng);
                    group.push(g);
                    id
                }
            };
            block.push(id);
        }
        let mut labels: Vec<(u32, u16)> = self
            .labels
            .iter()
            .map(|&(p, g)| (p, *gmap.get(&g).expect("labelled group has a tracked block")))
            .collect();
        labels.sort_unstable();
        Key { block, group, labels }
    }

    /// Groups whose blocks are all tracked and which carry an obligation.
    pub fn open_groups(&self) -> usize {
        let mut gs: Vec<usize> = self.labels.iter().map(|l| l.1).collect();
        gs.sort_unstable();
        gs.dedup();
        gs.len()
    }
}
