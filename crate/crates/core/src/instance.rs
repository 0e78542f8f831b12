//! Problem instances: file format, validation and seeded generators.
//!
//! Files are JSON documents with a fixed field order:
//! `name`, `dim`, `points`, `real`, `metric`, `terminals`, `seed`,
//! `generator`. Floats are written with 17 significant digits, so saving a
//! loaded file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::forest::TerminalPair;
use crate::metric::{PointId, PointSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    /// Raw coordinates (Euclidean instances).
    pub coords: Option<Vec<Vec<f64>>>,
    /// Raw distance matrix (explicit instances).
    pub matrix: Option<Vec<Vec<f64>>>,
    pub real: Vec<bool>,
    pub terminals: Vec<TerminalPair>,
    pub seed: Option<u64>,
    pub generator: Option<String>,
    /// Validated, normalized metric. `points.unit()` is the scale applied.
    pub points: PointSet,
}

fn malformed(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Malformed {
        location: location.into(),
        message: message.into(),
    }
}

fn num(v: &Value, at: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| malformed(at, "expected a number"))
}

fn id(v: &Value, at: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| malformed(at, "expected a non-negative integer"))
}

fn array<'v>(v: &'v Value, at: &str) -> Result<&'v Vec<Value>> {
    v.as_array().ok_or_else(|| malformed(at, "expected an array"))
}

fn float_rows(v: &Value, field: &str) -> Result<Vec<Vec<f64>>> {
    array(v, field)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let at = format!("{field}[{i}]");
            array(row, &at)?
                .iter()
                .enumerate()
                .map(|(j, x)| num(x, &format!("{at}[{j}]")))
                .collect()
        })
        .collect()
}

impl Instance {
    /// Validates raw data and builds the normalized metric.
    pub fn new(
        name: &str,
        coords: Option<Vec<Vec<f64>>>,
        matrix: Option<Vec<Vec<f64>>>,
        real: Vec<bool>,
        terminals: Vec<TerminalPair>,
    ) -> Result<Self> {
        let points = match (&coords, &matrix) {
            (Some(c), None) => {
                let dim = c.first().map_or(0, |p| p.len());
                PointSet::euclidean(dim, c, real.clone())?
            }
            (None, Some(m)) => PointSet::explicit(m, real.clone())?,
            _ => return Err(malformed("points", "give exactly one of `points` and `metric`")),
        };
        let points = points.normalized()?;
        for &(a, b) in &terminals {
            for v in [a, b] {
                points.check_id(v)?;
                if !points.is_real(v) {
                    return Err(Error::SteinerTerminal(v));
                }
            }
        }
        Ok(Instance {
            name: name.to_string(),
            coords,
            matrix,
            real,
            terminals,
            seed: None,
            generator: None,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    pub fn real_ids(&self) -> Vec<PointId> {
        self.points.real_ids()
    }

    /// Distinct terminal endpoints, sorted.
    pub fn terminal_ids(&self) -> Vec<PointId> {
        let mut v: Vec<PointId> = self.terminals.iter().flat_map(|&(a, b)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| malformed(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        let obj = doc.as_object().ok_or_else(|| malformed("document", "expected an object"))?;
        for key in obj.keys() {
            if !["name", "dim", "points", "real", "metric", "terminals", "seed", "generator"].contains(&key.as_str()) {
                return Err(malformed(key.as_str(), "unknown field"));
            }
        }
        let name = match obj.get("name") {
            Some(v) => v.as_str().ok_or_else(|| malformed("name", "expected a string"))?.to_string(),
            None => String::new(),
        };
        let coords = match obj.get("points") {
            Some(Value::Null) | None => None,
            Some(v) => Some(float_rows(v, "points")?),
        };
        let matrix = match obj.get("metric") {
            Some(Value::Null) | None => None,
            Some(v) => Some(float_rows(v, "metric")?),
        };
        let n = coords.as_ref().or(matrix.as_ref()).map_or(0, |r| r.len());
        if let (Some(c), Some(d)) = (&coords, obj.get("dim")) {
            let dim = id(d, "dim")?;
            if let Some(i) = c.iter().position(|p| p.len() != dim) {
                return Err(malformed(format!("points[{i}]"), format!("expected {dim} coordinates")));
            }
        }
        let real = match obj.get("real") {
            None => vec![true; n],
            Some(v) => {
                let mut flags = vec![false; n];
                for (k, x) in array(v, "real")?.iter().enumerate() {
                    let at = format!("real[{k}]");
                    let i = id(x, &at)?;
                    if i >= n {
                        return Err(malformed(at, format!("id {i} out of range")));
                    }
                    flags[i] = true;
                }
                flags
            }
        };
        let mut terminals = Vec::new();
        if let Some(v) = obj.get("terminals") {
            for (k, pair) in array(v, "terminals")?.iter().enumerate() {
                let at = format!("terminals[{k}]");
                let p = array(pair, &at)?;
                if p.len() != 2 {
                    return Err(malformed(at, "expected a pair"));
                }
                terminals.push((id(&p[0], &format!("{at}[0]"))?, id(&p[1], &format!("{at}[1]"))?));
            }
        }
        let mut inst = Instance::new(&name, coords, matrix, real, terminals)?;
        inst.seed = match obj.get("seed") {
            Some(Value::Null) | None => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| malformed("seed", "expected an integer"))?),
        };
        inst.generator = match obj.get("generator") {
            Some(Value::Null) | None => None,
            Some(v) => Some(v.as_str().ok_or_else(|| malformed("generator", "expected a string"))?.to_string()),
        };
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        fn f(x: f64) -> String {
            format!("{x:.16e}")
        }
        fn rows(r: &[Vec<f64>]) -> String {
            let body: Vec<String> = r
                .iter()
                .map(|p| format!("    [{}]", p.iter().map(|&x| f(x)).collect::<Vec<_>>().join(", ")))
                .collect();
            if body.is_empty() {
                "[]".into()
            } else {
                format!("[\n{}\n  ]", body.join(",\n"))
            }
        }
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"name\": {},", Value::String(self.name.clone()));
        let dim = self.coords.as_ref().and_then(|c| c.first()).map_or(0, |p| p.len());
        let _ = writeln!(s, "  \"dim\": {dim},");
        match &self.coords {
            Some(c) => {
                let _ = writeln!(s, "  \"points\": {},", rows(c));
            }
            None => s.push_str("  \"points\": null,\n"),
        }
        let real: Vec<String> = (0..self.real.len()).filter(|&i| self.real[i]).map(|i| i.to_string()).collect();
        let _ = writeln!(s, "  \"real\": [{}],", real.join(", "));
        match &self.matrix {
            Some(m) => {
                let _ = writeln!(s, "  \"metric\": {},", rows(m));
            }
            None => s.push_str("  \"metric\": null,\n"),
        }
        let t: Vec<String> = self.terminals.iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
        let _ = writeln!(s, "  \"terminals\": [{}],", t.join(", "));
        match self.seed {
            Some(x) => {
                let _ = writeln!(s, "  \"seed\": {x},");
            }
            None => s.push_str("  \"seed\": null,\n"),
        }
        match &self.generator {
            Some(g) => {
                let _ = writeln!(s, "  \"generator\": {}", Value::String(g.clone()));
            }
            None => s.push_str("  \"generator\": null\n"),
        }
        s.push_str("}\n");
        s
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    Instance::from_json(&text)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, inst.to_json())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Uniform,
    Clustered,
    Grid,
    Line,
}

impl GeneratorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorKind::Uniform => "uniform",
            GeneratorKind::Clustered => "clustered",
            GeneratorKind::Grid => "grid",
            GeneratorKind::Line => "line",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GeneratorKind::Uniform),
            "clustered" => Ok(GeneratorKind::Clustered),
            "grid" => Ok(GeneratorKind::Grid),
            "line" => Ok(GeneratorKind::Line),
            _ => Err(Error::InvalidParameter(format!("unknown generator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub dim: usize,
    /// Number of terminal pairs.
    pub pairs: usize,
    pub seed: u64,
    /// Cluster count for the clustered generator.
    pub centers: usize,
    /// Fraction of points marked Steiner.
    pub steiner_fraction: f64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, dim: usize, pairs: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            dim,
            pairs,
            seed,
            centers: 3,
            steiner_fraction: 0.0,
        }
    }

    fn label(&self) -> String {
        let mut s = format!("{} n={} d={} pairs={}", self.kind.as_str(), self.n, self.dim, self.pairs);
        if self.kind == GeneratorKind::Clustered {
            let _ = write!(s, " centers={}", self.centers);
        }
        if self.steiner_fraction > 0.0 {
            let _ = write!(s, " steiner={}", self.steiner_fraction);
        }
        s
    }
}

/// Spread of each cluster relative to the spacing between cluster centers.
pub const CLUSTER_SPREAD: f64 = 0.05;

fn coordinates(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (n, d) = (spec.n, spec.dim.max(1));
    match spec.kind {
        GeneratorKind::Uniform => {
            let side = (n as f64).powf(1.0 / d as f64);
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect()).collect()
        }
        GeneratorKind::Clustered => {
            let k = spec.centers.clamp(1, n);
            let per = (n as f64 / k as f64).powf(1.0 / d as f64);
            let spacing = per / CLUSTER_SPREAD;
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..d).map(|a| if a == 0 { i as f64 * spacing } else { rng.gen_range(0.0..per) }).collect())
                .collect();
            (0..n)
                .map(|i| {
                    let c = &centers[i % k];
                    c.iter().map(|&x| x + rng.gen_range(-per / 2.0..per / 2.0)).collect()
                })
                .collect()
        }
        GeneratorKind::Grid => {
            let side = ((n as f64).powf(1.0 / d as f64)).ceil().max(1.0) as usize;
            let side = if side.pow(d as u32) < n { side + 1 } else { side };
            (0..n)
                .map(|mut k| {
                    (0..d)
                        .map(|_| {
                            let x = (k % side) as f64;
                            k /= side;
                            x
                        })
                        .collect()
                })
                .collect()
        }
        GeneratorKind::Line => (0..n).map(|k| std::iter::once(k as f64).chain((1..d).map(|_| 0.0)).collect()).collect(),
    }
}

/// Seeded instance. Terminal pairs are sampled among real points with
/// distinct endpoints.
pub fn generate_instance(spec: &GeneratorSpec) -> Result<Instance> {
    if spec.n < 2 {
        return Err(Error::InvalidParameter("an instance needs at least two points".into()));
    }
    if !(0.0..1.0).contains(&spec.steiner_fraction) {
        return Err(Error::InvalidParameter("Steiner fraction must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coords = coordinates(spec, &mut rng);
    let steiner = ((spec.n as f64 * spec.steiner_fraction).floor() as usize).min(spec.n - 2);
    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut rng);
    let mut real = vec![true; spec.n];
    for &i in &order[..steiner] {
        real[i] = false;
    }
    let reals: Vec<usize> = (0..spec.n).filter(|&i| real[i]).collect();
    let terminals: Vec<TerminalPair> = (0..spec.pairs)
        .map(|_| {
            let a = reals[rng.gen_range(0..reals.len())];
            let mut b = a;
            while b == a {
                b = reals[rng.gen_range(0..reals.len())];
            }
            (a, b)
        })
        .collect();
    let name = format!("{}-{}-d{}-s{}", spec.kind.as_str(), spec.n, spec.dim, spec.seed);
    let mut inst = Instance::new(&name, Some(coords), None, real, terminals)?;
    inst.seed = Some(spec.seed);
    inst.generator = Some(spec.label());
    Ok(inst)
}

/// The fixed instance corpus used by the acceptance suite.
pub fn corpus() -> Vec<GeneratorSpec> {
    use GeneratorKind::*;
    let mut out = Vec::new();
    for seed in 0..4 {
        out.push(GeneratorSpec::new(Uniform, 200, 2, 8, seed));
    }
    out.push(GeneratorSpec::new(Uniform, 150, 3, 6, 10));
    out.push(GeneratorSpec::new(Uniform, 400, 2, 12, 11));
    for seed in 20..23 {
        let mut s = GeneratorSpec::new(Clustered, 180, 2, 8, seed);
        s.centers = 3 + (seed as usize % 3);
        out.push(s);
    }
    out.push(GeneratorSpec::new(Grid, 256, 2, 8, 30));
    out.push(GeneratorSpec::new(Grid, 125, 3, 6, 31));
    out.push(GeneratorSpec::new(Line, 64, 1, 4, 40));
    let mut s = GeneratorSpec::new(Uniform, 200, 2, 8, 50);
    s.steiner_fraction = 0.3;
    out.push(s);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UnionFind;

    #[test]
    fn minimal_instance_loads() {
        let inst = Instance::from_json(r#"{"name": "two", "dim": 1, "points": [[0.0], [3.0]], "terminals": [[0, 1]]}"#).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst.points.unit(), 3.0);
        assert_eq!(inst.terminal_ids(), vec![0, 1]);
    }

    #[test]
    fn duplicate_points_rejected() {
        let e = Instance::from_json(r#"{"points": [[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]}"#).unwrap_err();
        assert!(matches!(e, Error::MinDistanceZero(..)));
    }

    #[test]
    fn steiner_terminal_rejected() {
        let e = Instance::from_json(r#"{"points": [[0.0], [1.0], [2.0]], "real": [0, 1], "terminals": [[0, 2]]}"#).unwrap_err();
        assert_eq!(e, Error::SteinerTerminal(2));
    }

    #[test]
    fn malformed_field_reports_location() {
        let e = Instance::from_json(r#"{"points": [[0.0], ["x"]]}"#).unwrap_err();
        assert_eq!(
            e,
            Error::Malformed {
                location: "points[1][0]".into(),
                message: "expected a number".into()
            }
        );
        let e = Instance::from_json("{\n  \"points\": [[0.0],\n").unwrap_err();
        assert!(matches!(e, Error::Malformed { ref location, .. } if location.starts_with("line ")));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for spec in corpus().iter().take(3) {
            let inst = generate_instance(spec).unwrap();
            let text = inst.to_json();
            let back = Instance::from_json(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(back.to_json(), text);
        }
        let m = Instance::new("m", None, Some(vec![vec![0.0, 2.0], vec![2.0, 0.0]]), vec![true, true], vec![(0, 1)]).unwrap();
        assert_eq!(Instance::from_json(&m.to_json()).unwrap().to_json(), m.to_json());
    }

    #[test]
    fn generators_are_seeded() {
        let spec = GeneratorSpec::new(GeneratorKind::Uniform, 100, 2, 5, 7);
        assert_eq!(generate_instance(&spec).unwrap(), generate_instance(&spec).unwrap());
        let other = GeneratorSpec { seed: 8, ..spec };
        assert_ne!(generate_instance(&other).unwrap().coords, generate_instance(&spec).unwrap().coords);
    }

    #[test]
    fn grid_has_integer_coordinates() {
        let inst = generate_instance(&GeneratorSpec::new(GeneratorKind::Grid, 16, 2, 0, 99)).unwrap();
        let c = inst.coords.unwrap();
        assert_eq!(c.len(), 16);
        assert!(c.iter().flatten().all(|x| x.fract() == 0.0 && (0.0..4.0).contains(x)));
    }

    #[test]
    fn clustered_has_requested_cluster_count() {
        let inst = generate_instance(&GeneratorSpec::new(GeneratorKind::Clustered, 90, 2, 4, 3)).unwrap();
        let c = inst.coords.as_ref().unwrap();
        let per = (30f64).sqrt();
        let threshold = 3.0 * per;
        let mut uf = UnionFind::new(c.len());
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                let d: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if d <= threshold {
                    uf.union(i, j);
                }
            }
        }
        let mut roots: Vec<usize> = (0..c.len()).map(|i| uf.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        assert_eq!(roots.len(), 3);
    }

    #[test]
    fn steiner_fraction_marks_points() {
        let mut spec = GeneratorSpec::new(GeneratorKind::Uniform, 50, 2, 5, 1);
        spec.steiner_fraction = 0.4;
        let inst = generate_instance(&spec).unwrap();
        assert_eq!(inst.real.iter().filter(|r| !**r).count(), 20);
        assert!(inst.terminals.iter().all(|&(a, b)| inst.real[a] && inst.real[b] && a != b));
    }
}
