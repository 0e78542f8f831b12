//! Multi-scale Steiner candidate nets around a cluster of real points.

use rustc_hash::FxHashMap as HashMap;

use crate::error::Result;
use crate::hierarchy::build_net;
use crate::metric::{PointId, PointSet, SpatialIndex};

/// Index over the Steiner pool, shared by every cluster query.
#[derive(Debug, Clone)]
pub struct SteinerPool {
    index: SpatialIndex,
}

impl SteinerPool {
    pub fn new(points: &PointSet, steiner: &[PointId]) -> Self {
        SteinerPool {
            index: SpatialIndex::new(points, steiner, 4.0),
        }
    }

    pub fn ids(&self) -> &[PointId] {
        self.index.ids()
    }

    pub fn is_empty(&self) -> bool {
        self.index.ids().is_empty()
    }
}

/// Scale range `[floor(log r'), ceil(log 2rt)]` with `r = diam(D)`, `r' = eps r / 2^t`.
pub fn candidate_scales(diam: f64, eps: f64, t: usize) -> (i64, i64) {
    let lo = (eps * diam / 2f64.powi(t as i32)).log2().floor() as i64;
    let hi = (2.0 * diam * t as f64).log2().ceil() as i64;
    (lo, hi)
}

/// Union over scales `i` of a `2^i eps^2 / 64`-net of the pool points within
/// `2^i` of `D`. Singletons and zero-diameter clusters yield nothing.
pub fn steiner_candidates_for_cluster(
    d: &[PointId],
    points: &PointSet,
    pool: &SteinerPool,
    eps: f64,
    t: usize,
) -> Result<Vec<PointId>> {
    let diam = points.diameter_of(d);
    if d.len() < 2 || diam <= 0.0 || pool.is_empty() {
        return Ok(Vec::new());
    }
    let (lo, hi) = candidate_scales(diam, eps, t);
    let reach = 2f64.powi(hi as i32);
    let mut near: HashMap<PointId, f64> = HashMap::default();
    for &x in d {
        pool.index.for_each_within(points, x, reach, |s, dist| {
            let e = near.entry(s).or_insert(f64::INFINITY);
            if dist < *e {
                *e = dist;
            }
        });
    }
    let mut by_dist: Vec<(f64, PointId)> = near.into_iter().map(|(s, dist)| (dist, s)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::new();
    for i in lo..=hi {
        let radius = 2f64.powi(i as i32);
        let end = by_dist.partition_point(|&(dist, _)| dist <= radius + crate::metric::METRIC_TOL);
        if end == 0 {
            continue;
        }
        let mut close: Vec<PointId> = by_dist[..end].iter().map(|&(_, s)| s).collect();
        close.sort_unstable();
        let spacing = radius * eps * eps / 64.0;
        if spacing <= 1.0 {
            out.extend(close);
        } else {
            out.extend(build_net(&close, spacing, points)?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_cluster_has_no_candidates() {
        let p = PointSet::euclidean(1, &[vec![0.0], vec![3.0]], vec![true, false]).unwrap();
        let pool = SteinerPool::new(&p, &[1]);
        assert!(steiner_candidates_for_cluster(&[0], &p, &pool, 0.5, 4).unwrap().is_empty());
    }

    #[test]
    fn nearby_steiner_point_is_found() {
        let p = PointSet::euclidean(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.1]], vec![true, true, false])
            .unwrap();
        // Unnormalized on purpose: the pool point sits 0.51 from D.
        let pool = SteinerPool::new(&p, &[2]);
        let out = steiner_candidates_for_cluster(&[0, 1], &p, &pool, 0.5, 12).unwrap();
        assert_eq!(out, vec![2]);
    }

    #[test]
    fn scale_range() {
        let (lo, hi) = candidate_scales(8.0, 0.5, 4);
        assert_eq!(lo, -2);
        assert_eq!(hi, 6);
    }
}
