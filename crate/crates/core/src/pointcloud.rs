//! Point clouds: sampling on the circle and sphere, CSV ingestion, neighbor queries.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::kdtree::{sq_dist, KdTree};

/// Above this ambient dimension the kd-tree stops pruning well; scan instead.
const BRUTE_FORCE_DIM: usize = 16;
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Circle,
    Sphere,
    Abstract,
}

impl Manifold {
    /// Intrinsic dimension and volume of the known manifolds.
    pub fn dim_and_volume(self) -> Option<(usize, f64)> {
        match self {
            Manifold::Circle => Some((1, 2.0 * PI)),
            Manifold::Sphere => Some((2, 4.0 * PI)),
            Manifold::Abstract => None,
        }
    }
}

/// n points in R^d stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<f64>,
    n: usize,
    d: usize,
    manifold: Manifold,
}

impl PointCloud {
    pub fn new(points: Vec<f64>, d: usize, manifold: Manifold) -> Result<Self> {
        if d == 0 || points.len() % d != 0 {
            return invalid(format!("{} coordinates do not form rows of dimension {d}", points.len()));
        }
        let n = points.len() / d;
        if n < 2 {
            return invalid(format!("point cloud needs at least 2 points, got {n}"));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite coordinate in point {}", i / d));
        }
        let want_d = match manifold {
            Manifold::Circle => Some(2),
            Manifold::Sphere => Some(3),
            Manifold::Abstract => None,
        };
        if let Some(wd) = want_d {
            if d != wd {
                return invalid(format!("{manifold:?} needs ambient dimension {wd}, got {d}"));
            }
            for (i, row) in points.chunks(d).enumerate() {
                let r = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (r - 1.0).abs() > NORM_TOL {
                    return invalid(format!("point {i} has norm {r}, expected 1"));
                }
            }
        }
        Ok(PointCloud { points, n, d, manifold })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j)).sqrt()
    }
}

/// n i.i.d. uniform points on the unit circle.
pub fn sample_circle(n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return invalid(format!("need n >= 2, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t: f64 = rng.random_range(0.0..2.0 * PI);
        pts.push(t.cos());
        pts.push(t.sin());
    }
    PointCloud::new(pts, 2, Manifold::Circle)
}

/// n i.i.d. uniform points on the unit sphere S² (normalized Gaussians).
pub fn sample_sphere(n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return invalid(format!("need n >= 2, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(3 * n);
    while pts.len() < 3 * n {
        let g: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let r = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if r < 1e-12 {
            continue;
        }
        pts.extend(g.iter().map(|v| v / r));
    }
    PointCloud::new(pts, 3, Manifold::Sphere)
}

/// Sparse list of pairwise distances on n nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeListInput {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeListInput {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (k, &(i, j, d)) in edges.iter().enumerate() {
            check_edge(n, i, j, d, &mut seen).map_err(|msg| Error::Ingest { line: k + 1, msg })?;
        }
        Ok(EdgeListInput { n, edges })
    }
}

fn check_edge(
    n: usize,
    i: usize,
    j: usize,
    d: f64,
    seen: &mut std::collections::HashSet<(usize, usize)>,
) -> std::result::Result<(), String> {
    if i >= n || j >= n {
        return Err(format!("index out of range ({i},{j}) for n={n}"));
    }
    if i == j {
        return Err(format!("self-edge at node {i}"));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(format!("invalid distance {d}"));
    }
    if !seen.insert((i.min(j), i.max(j))) {
        return Err(format!("duplicate pair ({i},{j})"));
    }
    Ok(())
}

fn csv_lines<R: Read>(reader: R) -> impl Iterator<Item = Result<(usize, Vec<String>)>> {
    BufReader::new(reader).lines().enumerate().filter_map(|(k, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((k + 1, t.split(',').map(|f| f.trim().to_string()).collect())))
            }
        }
    })
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Ingest { line, msg: format!("cannot parse number '{s}'") })
}

fn parse_index(line: usize, s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Ingest { line, msg: format!("cannot parse index '{s}'") })
}

/// One point per line, comma-separated coordinates, no header.
pub fn read_points_csv<R: Read>(reader: R, manifold: Manifold) -> Result<PointCloud> {
    let mut pts = Vec::new();
    let mut d = None;
    for row in csv_lines(reader) {
        let (line, fields) = row?;
        match d {
            None => d = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(Error::Ingest { line, msg: format!("expected {d} columns, found {}", fields.len()) })
            }
            _ => {}
        }
        for f in &fields {
            let v = parse_f64(line, f)?;
            if !v.is_finite() {
                return Err(Error::Ingest { line, msg: "non-finite coordinate".into() });
            }
            pts.push(v);
        }
    }
    PointCloud::new(pts, d.unwrap_or(0), manifold)
}

pub fn load_points_csv(path: impl AsRef<Path>, manifold: Manifold) -> Result<PointCloud> {
    read_points_csv(File::open(path)?, manifold)
}

/// Lines "i,j,dist" with 0-based indices. `n` defaults to one past the largest index.
pub fn read_edge_list_csv<R: Read>(reader: R, n: Option<usize>) -> Result<EdgeListInput> {
    let mut raw = Vec::new();
    for row in csv_lines(reader) {
        let (line, f) = row?;
        if f.len() != 3 {
            return Err(Error::Ingest { line, msg: format!("expected 3 columns, found {}", f.len()) });
        }
        raw.push((line, parse_index(line, &f[0])?, parse_index(line, &f[1])?, parse_f64(line, &f[2])?));
    }
    let n = n.unwrap_or_else(|| raw.iter().map(|r| r.1.max(r.2) + 1).max().unwrap_or(0));
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (line, i, j, d) in raw {
        check_edge(n, i, j, d, &mut seen).map_err(|msg| Error::Ingest { line, msg })?;
        edges.push((i, j, d));
    }
    Ok(EdgeListInput { n, edges })
}

pub fn load_edge_list_csv(path: impl AsRef<Path>, n: Option<usize>) -> Result<EdgeListInput> {
    read_edge_list_csv(File::open(path)?, n)
}

/// Lines "index,label" with labels ±1; indices must be distinct.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in csv_lines(reader) {
        let (line, f) = row?;
        if f.len() != 2 {
            return Err(Error::Ingest { line, msg: format!("expected 2 columns, found {}", f.len()) });
        }
        let i = parse_index(line, &f[0])?;
        let y = parse_f64(line, &f[1])?;
        if y != 1.0 && y != -1.0 {
            return Err(Error::Ingest { line, msg: format!("label must be +1 or -1, got {y}") });
        }
        if !seen.insert(i) {
            return Err(Error::Ingest { line, msg: format!("duplicate index {i}") });
        }
        out.push((i, y));
    }
    Ok(out)
}

pub fn load_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    read_labels_csv(File::open(path)?)
}

/// Lines "index,value" with finite values; indices must be distinct.
pub fn read_node_values_csv<R: Read>(reader: R) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in csv_lines(reader) {
        let (line, f) = row?;
        if f.len() != 2 {
            return Err(Error::Ingest { line, msg: format!("expected 2 columns, found {}", f.len()) });
        }
        let i = parse_index(line, &f[0])?;
        let v = parse_f64(line, &f[1])?;
        if !v.is_finite() {
            return Err(Error::Ingest { line, msg: "non-finite value".into() });
        }
        if !seen.insert(i) {
            return Err(Error::Ingest { line, msg: format!("duplicate index {i}") });
        }
        out.push((i, v));
    }
    Ok(out)
}

pub fn load_node_values_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    read_node_values_csv(File::open(path)?)
}

/// One integer class label per line (e.g. MNIST digits).
pub fn read_class_labels_csv<R: Read>(reader: R) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for row in csv_lines(reader) {
        let (line, f) = row?;
        if f.len() != 1 {
            return Err(Error::Ingest { line, msg: format!("expected 1 column, found {}", f.len()) });
        }
        out.push(
            f[0].parse::<i64>().map_err(|_| Error::Ingest { line, msg: format!("cannot parse label '{}'", f[0]) })?,
        );
    }
    Ok(out)
}

pub fn load_class_labels_csv(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    read_class_labels_csv(File::open(path)?)
}

/// Per-node lists of (neighbor, Euclidean distance), sorted by neighbor index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    lists: Vec<Vec<(usize, f64)>>,
}

impl NeighborLists {
    pub fn from_lists(mut lists: Vec<Vec<(usize, f64)>>) -> Self {
        for l in &mut lists {
            l.sort_by_key(|e| e.0);
        }
        NeighborLists { lists }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.lists[i]
    }

    pub fn edge_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Union with the transposed relation.
    pub fn symmetrized(&self) -> NeighborLists {
        let mut lists = self.lists.clone();
        for (i, l) in self.lists.iter().enumerate() {
            for &(j, d) in l {
                lists[j].push((i, d));
            }
        }
        for l in &mut lists {
            l.sort_by_key(|e| e.0);
            l.dedup_by_key(|e| e.0);
        }
        NeighborLists { lists }
    }
}

/// Exact fixed-radius neighbors, |x_i - x_j| < h (strict), excluding i itself.
pub fn neighbors_within(cloud: &PointCloud, h: f64) -> Result<NeighborLists> {
    if !(h > 0.0) {
        return invalid(format!("radius must be positive, got {h}"));
    }
    let n = cloud.len();
    let mut lists = Vec::with_capacity(n);
    if cloud.dim() > BRUTE_FORCE_DIM {
        for i in 0..n {
            let l = (0..n).filter(|&j| j != i).map(|j| (j, cloud.distance(i, j))).filter(|&(_, d)| d < h).collect();
            lists.push(l);
        }
    } else {
        let tree = KdTree::build(cloud.as_slice(), cloud.dim());
        let mut buf = Vec::new();
        for i in 0..n {
            buf.clear();
            tree.within(cloud.point(i), h, &mut buf);
            lists.push(buf.iter().copied().filter(|&(j, _)| j != i).collect());
        }
    }
    Ok(NeighborLists::from_lists(lists))
}

/// k-nearest-neighbor relation (not symmetrized) with the k-th neighbor distance δ(i).
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub neighbors: NeighborLists,
    pub delta: Vec<f64>,
}

/// k nearest neighbors of every point, ties broken by lower index.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<Knn> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return invalid(format!("k must satisfy 1 <= k < n={n}, got {k}"));
    }
    let mut lists = Vec::with_capacity(n);
    if cloud.dim() > BRUTE_FORCE_DIM {
        for i in 0..n {
            let mut all: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, sq_dist(cloud.point(i), cloud.point(j)))).collect();
            all.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            lists.push(all.into_iter().map(|(j, d2)| (j, d2.sqrt())).collect::<Vec<_>>());
        }
    } else {
        let tree = KdTree::build(cloud.as_slice(), cloud.dim());
        for i in 0..n {
            lists.push(tree.nearest(cloud.point(i), k, Some(i)));
        }
    }
    let delta = lists.iter().map(|l: &Vec<(usize, f64)>| l[k - 1].1).collect();
    Ok(Knn { neighbors: NeighborLists::from_lists(lists), delta })
}

/// Index of the nearest cloud point for each query (ties to the lower index).
pub fn nearest_indices(cloud: &PointCloud, queries: &[f64]) -> Result<Vec<usize>> {
    let d = cloud.dim();
    if queries.len() % d != 0 {
        return invalid(format!("query coordinates not a multiple of dimension {d}"));
    }
    let tree = KdTree::build(cloud.as_slice(), d);
    Ok(queries.chunks(d).map(|q| tree.nearest(q, 1, None)[0].0).collect())
}
