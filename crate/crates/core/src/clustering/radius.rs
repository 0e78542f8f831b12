//! Radius selection: cut-edge counts and greedy annulus covers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::{PointId, PointSet, SpatialIndex, METRIC_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusConstants {
    /// Cut edges allowed, in units of `q`.
    pub c1: f64,
    /// Border cover allowance, in units of `q` (and `q c` for the wide annulus).
    pub c2: f64,
    /// Admissibility allowance, in units of `q c log(r / gamma)`.
    pub c3: f64,
}

impl Default for RadiusConstants {
    fn default() -> Self {
        RadiusConstants {
            c1: 4.0,
            c2: 4.0,
            c3: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusCheck {
    pub radius: f64,
    pub cut_edges: usize,
    /// Cover of the width-`gamma` inner annulus by `gamma`-balls.
    pub alpha0: usize,
    /// Cover of the width-`c gamma` inner annulus by `gamma`-balls.
    pub alpha0_wide: usize,
    /// Sum of inner and outer annulus covers over all scales.
    pub admissibility: usize,
    pub cut_ok: bool,
    pub border_ok: bool,
    pub admissible_ok: bool,
}

impl RadiusCheck {
    pub fn passes(&self) -> bool {
        self.cut_ok && self.border_ok && self.admissible_ok
    }

    fn violations(&self) -> usize {
        [self.cut_ok, self.border_ok, self.admissible_ok].iter().filter(|&&ok| !ok).count()
    }
}

/// Number of closed `radius`-balls centered at members of `ids` picked greedily
/// (most newly covered points first, ties to the smaller id) to cover `ids`.
pub fn greedy_ball_cover(points: &PointSet, ids: &[PointId], radius: f64) -> usize {
    match ids.len() {
        0 => return 0,
        1 => return 1,
        _ => {}
    }
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    let pos: HashMap<PointId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let index = SpatialIndex::new(points, &ids, radius.max(METRIC_TOL));
    let cover: Vec<Vec<usize>> = ids
        .iter()
        .map(|&v| index.within(points, v, radius).into_iter().map(|u| pos[&u]).collect())
        .collect();
    let mut covered = vec![false; ids.len()];
    let mut left = ids.len();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..ids.len()).map(|k| (cover[k].len(), Reverse(k))).collect();
    let mut count = 0;
    while left > 0 {
        let (_, Reverse(k)) = heap.pop().expect("uncovered points remain");
        let fresh = cover[k].iter().filter(|&&b| !covered[b]).count();
        if fresh == 0 {
            continue;
        }
        if heap.peek().is_some_and(|&top| (fresh, Reverse(k)) < top) {
            heap.push((fresh, Reverse(k)));
            continue;
        }
        for &b in &cover[k] {
            if !covered[b] {
                covered[b] = true;
                left -= 1;
            }
        }
        count += 1;
    }
    count
}

pub const MAX_CANDIDATES: usize = 32;

/// Distances from one center to the graph vertices within `4r`, sorted.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub center: PointId,
    pub base: f64,
    near: Vec<(f64, PointId)>,
}

impl Neighborhood {
    pub fn new(points: &PointSet, index: &SpatialIndex, center: PointId, r: f64) -> Self {
        let mut near = Vec::new();
        index.for_each_within(points, center, 4.0 * r, |v, d| near.push((d, v)));
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Neighborhood { center, base: r, near }
    }

    /// Points with `lo < d <= hi`.
    fn band(&self, lo: f64, hi: f64) -> Vec<PointId> {
        let a = self.near.partition_point(|&(d, _)| d <= lo + METRIC_TOL);
        let b = self.near.partition_point(|&(d, _)| d <= hi + METRIC_TOL);
        if a >= b {
            return Vec::new();
        }
        self.near[a..b].iter().map(|&(_, v)| v).collect()
    }

    /// Midpoints between consecutive events (`r`, vertex distances, `2r`) in
    /// `[r, 2r]`, thinned by a fixed stride to at most `MAX_CANDIDATES`.
    pub fn candidates(&self) -> Vec<f64> {
        let (lo, hi) = (self.base, 2.0 * self.base);
        let mut ev = vec![lo];
        ev.extend(self.near.iter().map(|&(d, _)| d).filter(|&d| d > lo && d < hi));
        ev.push(hi);
        ev.dedup();
        let mut out: Vec<f64> = ev.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        if out.is_empty() {
            out.push(lo);
        }
        if out.len() > MAX_CANDIDATES {
            let stride = out.len().div_ceil(MAX_CANDIDATES);
            out = out.into_iter().step_by(stride).collect();
        }
        out
    }
}

/// Evaluates the three radius conditions for `B(center, rho)`.
#[allow(clippy::too_many_arguments)]
pub fn check_radius(
    g: &WeightedGraph,
    points: &PointSet,
    hood: &Neighborhood,
    rho: f64,
    gamma: f64,
    c: f64,
    q: f64,
    k: &RadiusConstants,
) -> RadiusCheck {
    let x = hood.center;
    let lim = rho + METRIC_TOL;
    let mut cut = 0;
    for &(d, u) in &hood.near {
        if d > lim {
            break;
        }
        for (v, w) in g.neighbors(u) {
            if w <= lim && points.dist(x, v) > lim {
                cut += 1;
            }
        }
    }
    let alpha0 = greedy_ball_cover(points, &hood.band(rho - gamma, rho), gamma);
    let alpha0_wide = greedy_ball_cover(points, &hood.band(rho - c * gamma, rho), gamma);
    let delta = c * gamma;
    let top = (rho / gamma).log2().floor().max(0.0) as i32;
    let mut adm = 0;
    for i in 0..=top {
        let outer = 2f64.powi(i);
        let inner = if i == 0 { 0.0 } else { 2f64.powi(i - 1) };
        let b = gamma * outer;
        let hi_in = rho - delta * inner;
        if hi_in > 0.0 {
            adm += greedy_ball_cover(points, &hood.band(rho - delta * outer, hi_in), b);
        }
        adm += greedy_ball_cover(points, &hood.band(rho + delta * inner, rho + delta * outer), b);
    }
    let logs = (rho / gamma).log2().max(1.0);
    RadiusCheck {
        radius: rho,
        cut_edges: cut,
        alpha0,
        alpha0_wide,
        admissibility: adm,
        cut_ok: cut as f64 <= k.c1 * q,
        border_ok: alpha0 as f64 <= k.c2 * q && alpha0_wide as f64 <= k.c2 * q * c,
        admissible_ok: adm as f64 <= k.c3 * q * c * logs,
    }
}

/// Shared state for radius choices over one graph.
#[derive(Debug, Clone)]
pub struct RadiusChooser<'a> {
    pub g: &'a WeightedGraph,
    pub points: &'a PointSet,
    pub q: f64,
    pub constants: RadiusConstants,
    index: SpatialIndex,
}

impl<'a> RadiusChooser<'a> {
    pub fn new(g: &'a WeightedGraph, points: &'a PointSet, q: f64, constants: RadiusConstants) -> Self {
        Self::with_cell(g, points, q, constants, 1.0)
    }

    /// Grid cell size should match the radii queried.
    pub fn with_cell(g: &'a WeightedGraph, points: &'a PointSet, q: f64, constants: RadiusConstants, cell: f64) -> Self {
        let vs = g.sorted_vertices();
        RadiusChooser {
            g,
            points,
            q,
            constants,
            index: SpatialIndex::new(points, &vs, cell),
        }
    }

    pub fn neighborhood(&self, center: PointId, r: f64) -> Neighborhood {
        Neighborhood::new(self.points, &self.index, center, r)
    }

    pub fn check(&self, hood: &Neighborhood, rho: f64, gamma: f64, c: f64) -> RadiusCheck {
        check_radius(self.g, self.points, hood, rho, gamma, c, self.q, &self.constants)
    }

    /// First candidate radius in `[r, 2r]` passing all conditions.
    pub fn choose(&self, center: PointId, r: f64, gamma: f64, c: f64) -> Result<RadiusCheck> {
        validate(r, gamma, c)?;
        let hood = self.neighborhood(center, r);
        for rho in hood.candidates() {
            let chk = self.check(&hood, rho, gamma, c);
            if chk.passes() {
                return Ok(chk);
            }
        }
        Err(Error::NoAdmissibleRadius {
            center,
            lo: r,
            hi: 2.0 * r,
        })
    }

    /// Like `choose`, but falls back to the candidate with the fewest failed
    /// conditions (then fewest cut edges). The flag reports a fallback.
    pub fn choose_relaxed(&self, center: PointId, r: f64, gamma: f64, c: f64) -> Result<(RadiusCheck, bool)> {
        validate(r, gamma, c)?;
        let hood = self.neighborhood(center, r);
        let mut best: Option<RadiusCheck> = None;
        for rho in hood.candidates() {
            let chk = self.check(&hood, rho, gamma, c);
            if chk.passes() {
                return Ok((chk, false));
            }
            if best.is_none_or(|b| (chk.violations(), chk.cut_edges) < (b.violations(), b.cut_edges)) {
                best = Some(chk);
            }
        }
        Ok((best.expect("at least one candidate"), true))
    }

    /// Fraction of `samples` evenly spaced radii in `[r, 2r]` passing all conditions.
    pub fn pass_fraction(&self, center: PointId, r: f64, gamma: f64, c: f64, samples: usize) -> Result<f64> {
        validate(r, gamma, c)?;
        let hood = self.neighborhood(center, r);
        let n = samples.max(1);
        let ok = (0..n)
            .filter(|&k| {
                let rho = r + (k as f64 + 0.5) * r / n as f64;
                self.check(&hood, rho, gamma, c).passes()
            })
            .count();
        Ok(ok as f64 / n as f64)
    }
}

fn validate(r: f64, gamma: f64, c: f64) -> Result<()> {
    if !(gamma > 0.0 && r > gamma && c >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "radius needs r > gamma > 0 and c >= 1 (r = {r}, gamma = {gamma}, c = {c})"
        )));
    }
    Ok(())
}

/// Radius in `[r, 2r]` around `center` satisfying the cut, border and
/// admissibility conditions for `g`.
#[allow(clippy::too_many_arguments)]
pub fn choose_radius(
    center: PointId,
    r: f64,
    gamma: f64,
    c: f64,
    g: &WeightedGraph,
    points: &PointSet,
    q: f64,
    constants: &RadiusConstants,
) -> Result<f64> {
    Ok(RadiusChooser::new(g, points, q, *constants).choose(center, r, gamma, c)?.radius)
}
