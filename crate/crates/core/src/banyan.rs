//! Forest banyans: a light spanner over the real points plus a small set of
//! Steiner points that preserves near-optimal Steiner forests.

mod candidates;
mod heavy;
mod proper;

pub use candidates::{candidate_scales, steiner_candidates_for_cluster, SteinerPool};
pub use heavy::{identify_heavy_clusters, ClusterFamily, HeavyCluster};
pub use proper::{
    binarize, depth_bound, properize, properize_with_depth, ProperDecomposition, ProperTree, SteinerTree, Violation,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::{PointId, PointSet};
use crate::oracles;
use crate::spanner::{greedy_spanner_over, SpannerMode};

pub const DEFAULT_T_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanyanParams {
    pub eps: f64,
    /// Upper bound on the depth parameter `t`; `None` uses `depth_bound(eps)`.
    pub t_cap: Option<usize>,
    pub spanner_mode: SpannerMode,
}

impl BanyanParams {
    pub fn new(eps: f64) -> Self {
        BanyanParams {
            eps,
            t_cap: Some(DEFAULT_T_CAP),
            spanner_mode: SpannerMode::Auto,
        }
    }

    /// Effective depth parameter.
    pub fn t(&self) -> usize {
        let t = depth_bound(self.eps);
        self.t_cap.map_or(t, |c| t.min(c.max(1)))
    }
}

#[derive(Debug, Clone)]
pub struct Banyan {
    pub graph: WeightedGraph,
    pub real: Vec<PointId>,
    /// The selected Steiner subset `S'`.
    pub steiner: Vec<PointId>,
    pub family: ClusterFamily,
    pub t: usize,
    /// `w(graph) / w(MST(X))`.
    pub lightness: f64,
    /// `w(MST(X + S')) / w(MST(X))`.
    pub mst_ratio: f64,
}

/// Selects `S'` from the heavy clusters of `X` and returns a `(1+eps)`-spanner
/// over `X + S'`. Every non-`X` point of `points` is a Steiner candidate.
pub fn build_banyan(x_ids: &[PointId], points: &PointSet, params: &BanyanParams) -> Result<Banyan> {
    let mut xs = x_ids.to_vec();
    xs.sort_unstable();
    xs.dedup();
    if xs.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    for &x in &xs {
        points.check_id(x)?;
    }
    let t = params.t();
    let in_x: rustc_hash::FxHashSet<PointId> = xs.iter().copied().collect();
    let pool_ids: Vec<PointId> = points.ids().filter(|p| !in_x.contains(p)).collect();
    let (family, steiner) = if pool_ids.is_empty() || xs.len() < 2 {
        (ClusterFamily::default(), Vec::new())
    } else {
        let family = identify_heavy_clusters(&xs, points, params.eps, t)?;
        let pool = SteinerPool::new(points, &pool_ids);
        let per: Vec<Vec<PointId>> = family
            .clusters
            .par_iter()
            .map(|c| steiner_candidates_for_cluster(&c.members, points, &pool, params.eps, t))
            .collect::<Result<_>>()?;
        let mut s: Vec<PointId> = per.into_iter().flatten().collect();
        s.sort_unstable();
        s.dedup();
        log::debug!("banyan: {} clusters, |S'| = {}", family.len(), s.len());
        (family, s)
    };
    let mut all = xs.clone();
    all.extend(&steiner);
    all.sort_unstable();
    let graph = greedy_spanner_over(points, &all, params.eps, params.spanner_mode)?;
    let mst_x = oracles::mst_weight(&xs, points);
    let (lightness, mst_ratio) = if mst_x > 0.0 {
        (graph.weight() / mst_x, oracles::mst_weight(&all, points) / mst_x)
    } else {
        (1.0, 1.0)
    };
    Ok(Banyan {
        graph,
        real: xs,
        steiner,
        family,
        t,
        lightness,
        mst_ratio,
    })
}
