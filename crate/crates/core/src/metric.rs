//! Point sets, metric access and normalization.

use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};

pub type PointId = usize;

/// Absolute tolerance used for every metric comparison on normalized distances.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Metric {
    Euclidean { dim: usize, coords: Vec<f64> },
    Explicit { dist: Vec<f64> },
}

/// A finite metric space whose points are tagged real (terminal ground set)
/// or Steiner (optional relay points).
///
/// Ids are `0..len()`. After [`PointSet::normalize`] the minimum
/// inter-point distance is exactly 1; the original unit is kept so weights
/// can be mapped back with [`PointSet::denormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    metric: Metric,
    real: Vec<bool>,
    unit: f64,
    normalized: bool,
}

impl PointSet {
    pub fn euclidean(dim: usize, points: &[Vec<f64>], real: Vec<bool>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if real.len() != points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} real flags for {} points",
                real.len(),
                points.len()
            )));
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidMetric(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMetric(format!("point {i} has a non-finite coordinate")));
            }
            coords.extend_from_slice(p);
        }
        Ok(PointSet {
            metric: Metric::Euclidean { dim, coords },
            real,
            unit: 1.0,
            normalized: false,
        })
    }

    /// Builds a point set from an explicit distance matrix, checking symmetry,
    /// zero diagonal, positivity and the triangle inequality (within `METRIC_TOL`
    /// relative to the largest entry).
    pub fn explicit(matrix: &[Vec<f64>], real: Vec<bool>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::EmptyPointSet);
        }
        if real.len() != n {
            return Err(Error::InvalidParameter(format!("{} real flags for {n} points", real.len())));
        }
        let mut dist = vec![0.0; n * n];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) = {d} is not a nonnegative number")));
                }
                dist[i * n + j] = d;
            }
        }
        let scale = dist.iter().cloned().fold(0.0_f64, f64::max).max(1.0);
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidMetric(format!("d({i},{i}) is not zero")));
            }
            for j in (i + 1)..n {
                if (dist[i * n + j] - dist[j * n + i]).abs() > METRIC_TOL * scale {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let dij = dist[i * n + j];
                for k in 0..n {
                    if dij > dist[i * n + k] + dist[k * n + j] + METRIC_TOL * scale {
                        return Err(Error::InvalidMetric(format!("triangle inequality fails for ({i},{k},{j})")));
                    }
                }
            }
        }
        Ok(PointSet {
            metric: Metric::Explicit { dist },
            real,
            unit: 1.0,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> {
        0..self.len()
    }

    pub fn is_real(&self, id: PointId) -> bool {
        self.real[id]
    }

    pub fn real_flags(&self) -> &[bool] {
        &self.real
    }

    pub fn real_ids(&self) -> Vec<PointId> {
        self.ids().filter(|&i| self.real[i]).collect()
    }

    pub fn steiner_ids(&self) -> Vec<PointId> {
        self.ids().filter(|&i| !self.real[i]).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.metric, Metric::Euclidean { .. })
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.metric {
            Metric::Euclidean { dim, .. } => Some(*dim),
            Metric::Explicit { .. } => None,
        }
    }

    /// Normalized coordinates of a point (Euclidean mode only).
    pub fn coords(&self, id: PointId) -> Option<&[f64]> {
        match &self.metric {
            Metric::Euclidean { dim, coords } => Some(&coords[id * dim..(id + 1) * dim]),
            Metric::Explicit { .. } => None,
        }
    }

    /// Raw distance of one normalized unit.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn denormalize(&self, w: f64) -> f64 {
        w * self.unit
    }

    pub fn check_id(&self, id: PointId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownId(id))
        }
    }

    #[inline]
    pub fn dist(&self, a: PointId, b: PointId) -> f64 {
        match &self.metric {
            Metric::Euclidean { dim, coords } => {
                let pa = &coords[a * dim..(a + 1) * dim];
                let pb = &coords[b * dim..(b + 1) * dim];
                pa.iter()
                    .zip(pb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            Metric::Explicit { dist } => dist[a * self.real.len() + b],
        }
    }

    /// Smallest pairwise distance together with a pair realizing it.
    pub fn min_distance(&self) -> Option<(f64, PointId, PointId)> {
        let n = self.len();
        let mut best: Option<(f64, PointId, PointId)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.dist(i, j);
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, i, j));
                }
            }
        }
        best
    }

    /// Rescales so that the minimum inter-point distance is 1.
    pub fn normalize(&mut self) -> Result<()> {
        let Some((min, i, j)) = self.min_distance() else {
            self.normalized = true;
            return Ok(());
        };
        if min <= 0.0 {
            return Err(Error::MinDistanceZero(i, j));
        }
        let factor = 1.0 / min;
        match &mut self.metric {
            Metric::Euclidean { coords, .. } => coords.iter_mut().for_each(|c| *c *= factor),
            Metric::Explicit { dist } => dist.iter_mut().for_each(|d| *d *= factor),
        }
        self.unit *= min;
        self.normalized = true;
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn diameter_of(&self, ids: &[PointId]) -> f64 {
        let mut d = 0.0_f64;
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                d = d.max(self.dist(a, b));
            }
        }
        d
    }

    pub fn diameter(&self) -> f64 {
        let ids: Vec<_> = self.ids().collect();
        self.diameter_of(&ids)
    }

    /// Distance between two point sets (minimum over pairs); infinite if either is empty.
    pub fn set_distance(&self, a: &[PointId], b: &[PointId]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in a {
            for &y in b {
                best = best.min(self.dist(x, y));
            }
        }
        best
    }

    /// The subset of `ids` within closed distance `r` of `center`, by linear scan.
    pub fn ball_scan(&self, ids: &[PointId], center: PointId, r: f64) -> Vec<PointId> {
        ids.iter()
            .copied()
            .filter(|&v| self.dist(center, v) <= r + METRIC_TOL)
            .collect()
    }
}

/// Uniform-grid bucketing of a subset of a Euclidean point set. Falls back to
/// a linear scan for explicit metrics.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<PointId>>,
    ids: Vec<PointId>,
    grid: bool,
}

impl SpatialIndex {
    pub fn new(points: &PointSet, ids: &[PointId], cell: f64) -> Self {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let grid = points.is_euclidean() && cell > 0.0 && cell.is_finite();
        let mut buckets: HashMap<Vec<i64>, Vec<PointId>> = HashMap::default();
        if grid {
            for &id in &ids {
                buckets.entry(key(points, id, cell)).or_default().push(id);
            }
        }
        SpatialIndex {
            cell,
            buckets,
            ids,
            grid,
        }
    }

    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    /// Indexed ids within closed distance `r` (plus tolerance) of `center`, ascending.
    pub fn within(&self, points: &PointSet, center: PointId, r: f64) -> Vec<PointId> {
        let mut out = Vec::new();
        self.for_each_within(points, center, r, |v, _| out.push(v));
        out.sort_unstable();
        out
    }

    /// Visits every indexed id within `r` of `center` (unordered) with its distance.
    pub fn for_each_within(&self, points: &PointSet, center: PointId, r: f64, mut f: impl FnMut(PointId, f64)) {
        let lim = r + METRIC_TOL;
        if !self.grid {
            for &v in &self.ids {
                let d = points.dist(center, v);
                if d <= lim {
                    f(v, d);
                }
            }
            return;
        }
        let c = points.coords(center).expect("euclidean");
        let span = (lim / self.cell).ceil() as i64;
        let dim = c.len();
        let boxes = (2 * span + 1).checked_pow(dim as u32).unwrap_or(i64::MAX);
        if boxes as usize > self.buckets.len() {
            for bucket in self.buckets.values() {
                for &v in bucket {
                    let d = points.dist(center, v);
                    if d <= lim {
                        f(v, d);
                    }
                }
            }
            return;
        }
        let base: Vec<i64> = c.iter().map(|x| (x / self.cell).floor() as i64).collect();
        let mut offset = vec![-span; dim];
        let mut k = base.clone();
        loop {
            for (slot, (b, o)) in k.iter_mut().zip(base.iter().zip(&offset)) {
                *slot = b + o;
            }
            if let Some(bucket) = self.buckets.get(&k) {
                for &v in bucket {
                    let d = points.dist(center, v);
                    if d <= lim {
                        f(v, d);
                    }
                }
            }
            let mut axis = 0;
            loop {
                if axis == dim {
                    return;
                }
                offset[axis] += 1;
                if offset[axis] > span {
                    offset[axis] = -span;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// Nearest indexed id to `center` (ties by smaller id).
    pub fn nearest(&self, points: &PointSet, center: PointId) -> Option<(PointId, f64)> {
        if self.ids.is_empty() {
            return None;
        }
        let mut r = self.cell.max(1.0);
        loop {
            let mut best: Option<(PointId, f64)> = None;
            self.for_each_within(points, center, r, |v, d| {
                if best.is_none_or(|(b, bd)| d < bd || (d == bd && v < b)) {
                    best = Some((v, d));
                }
            });
            if let Some(b) = best {
                return Some(b);
            }
            r *= 2.0;
        }
    }
}

fn key(points: &PointSet, id: PointId, cell: f64) -> Vec<i64> {
    points
        .coords(id)
        .expect("euclidean")
        .iter()
        .map(|x| (x / cell).floor() as i64)
        .collect()
}

/// A point set with coordinates `0, 1, .., n-1` on a line, all real.
pub fn line(n: usize) -> PointSet {
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    PointSet::euclidean(1, &pts, vec![true; n]).expect("valid line")
}
