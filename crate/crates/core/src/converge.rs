//! Empirical convergence checks against manifolds with closed-form spectra.
//!
//! Discrete eigenvectors live in the empirical L² normalization and are
//! extended to the manifold by nearest-neighbor interpolation. Continuum
//! eigenfunctions are orthonormal in L² of the uniform probability measure.
//! Degenerate continuum eigenvalues are compared as subspaces.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::graph::{epsilon_weights, Laplacian, LaplacianKind};
use crate::pointcloud::{nearest_indices, sample_circle, sample_sphere, Manifold, PointCloud};
use crate::spectral::{dense_eigh, eigs_smallest, ls_slope, EigenBasis, EigenOptions, Normalization};

/// Largest truncation used when coupling discrete and continuum fields.
pub const MAX_FIELD_TERMS: usize = 50;

/// Spectrum and eigenfunctions of the Laplace–Beltrami operator on the unit
/// circle or unit sphere, up to a maximal frequency or degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumReference {
    manifold: Manifold,
    degree: usize,
    values: Vec<f64>,
    groups: Vec<Range<usize>>,
}

/// Eigenvalues k² (k ≤ k_max); eigenfunctions 1, √2 cos kt, √2 sin kt.
pub fn circle_reference(k_max: usize) -> ContinuumReference {
    let mut values = vec![0.0];
    let mut groups = vec![0..1];
    for k in 1..=k_max {
        groups.push(values.len()..values.len() + 2);
        values.extend([(k * k) as f64; 2]);
    }
    ContinuumReference { manifold: Manifold::Circle, degree: k_max, values, groups }
}

/// Eigenvalues ℓ(ℓ+1) with multiplicity 2ℓ+1 (ℓ ≤ ell_max); real spherical harmonics.
pub fn sphere_reference(ell_max: usize) -> ContinuumReference {
    let mut values = Vec::new();
    let mut groups = Vec::new();
    for l in 0..=ell_max {
        let start = values.len();
        values.extend(std::iter::repeat_n((l * (l + 1)) as f64, 2 * l + 1));
        groups.push(start..values.len());
    }
    ContinuumReference { manifold: Manifold::Sphere, degree: ell_max, values, groups }
}

/// Legendre polynomials P_0..=P_l at t.
pub fn legendre_all(l: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(l + 1);
    p.push(1.0);
    if l >= 1 {
        p.push(t);
    }
    for k in 2..=l {
        let kf = k as f64;
        p.push(((2.0 * kf - 1.0) * t * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf);
    }
    p
}

/// Associated Legendre P_l^m(x) without the Condon–Shortley phase.
fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= (2 * i - 1) as f64 * somx2;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pll = 0.0;
    for ll in m + 2..=l {
        pll = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = pll;
    }
    pll
}

/// Real spherical harmonics of degree l at (θ, φ), orthonormal for the
/// uniform probability measure, ordered m = 0, then (cos, sin) pairs for m = 1..=l.
fn real_harmonics(l: usize, theta: f64, phi: f64) -> Vec<f64> {
    let x = theta.cos();
    let mut out = Vec::with_capacity(2 * l + 1);
    out.push(((2 * l + 1) as f64).sqrt() * legendre_all(l, x)[l]);
    for m in 1..=l {
        // (l-m)!/(l+m)! as a running product
        let ratio: f64 = (l - m + 1..=l + m).map(|k| 1.0 / k as f64).product();
        let norm = (2.0 * (2 * l + 1) as f64 * ratio).sqrt();
        let p = assoc_legendre(l, m, x);
        out.push(norm * p * (m as f64 * phi).cos());
        out.push(norm * p * (m as f64 * phi).sin());
    }
    out
}

impl ContinuumReference {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    /// Intrinsic dimension.
    pub fn m(&self) -> usize {
        self.manifold.dim_and_volume().expect("circle or sphere").0
    }

    /// Riemannian volume (2π or 4π).
    pub fn vol(&self) -> f64 {
        self.manifold.dim_and_volume().expect("circle or sphere").1
    }

    pub fn ambient_dim(&self) -> usize {
        self.m() + 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index ranges of equal eigenvalues.
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Groups lying entirely within the first k eigenpairs.
    pub fn groups_within(&self, k: usize) -> Vec<Range<usize>> {
        self.groups.iter().filter(|g| g.end <= k).cloned().collect()
    }

    /// Largest group boundary not exceeding k.
    pub fn boundary_at_most(&self, k: usize) -> usize {
        self.groups.iter().map(|g| g.end).filter(|&e| e <= k).max().unwrap_or(0)
    }

    /// All eigenfunctions at an ambient point on the manifold.
    pub fn eigenfunctions(&self, x: &[f64]) -> Vec<f64> {
        match self.manifold {
            Manifold::Circle => {
                let t = x[1].atan2(x[0]);
                let mut out = vec![1.0];
                for k in 1..=self.degree {
                    let kt = k as f64 * t;
                    out.push(2f64.sqrt() * kt.cos());
                    out.push(2f64.sqrt() * kt.sin());
                }
                out
            }
            _ => {
                let theta = x[2].clamp(-1.0, 1.0).acos();
                let phi = x[1].atan2(x[0]);
                (0..=self.degree).flat_map(|l| real_harmonics(l, theta, phi)).collect()
            }
        }
    }

    /// Matrix of the first k eigenfunctions at the given points (rows).
    pub fn eval_matrix(&self, points: &[f64], k: usize) -> Mat<f64> {
        let d = self.ambient_dim();
        let q = points.len() / d;
        let mut out = Mat::zeros(q, k);
        for (r, x) in points.chunks(d).enumerate() {
            let f = self.eigenfunctions(x);
            for c in 0..k {
                out[(r, c)] = f[c];
            }
        }
        out
    }

    /// c(x, y) = Σ (τ + λ_i)^{-s} ψ_i(x) ψ_i(y) over the stored spectrum, summed
    /// in closed form per degree (addition theorem on the sphere).
    pub fn covariance(&self, x: &[f64], y: &[f64], tau: f64, s: f64) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        match self.manifold {
            Manifold::Circle => {
                let dt = y[1].atan2(y[0]) - x[1].atan2(x[0]);
                tau.powf(-s)
                    + (1..=self.degree)
                        .map(|k| 2.0 * (tau + (k * k) as f64).powf(-s) * (k as f64 * dt).cos())
                        .sum::<f64>()
            }
            _ => legendre_all(self.degree, dot.clamp(-1.0, 1.0))
                .iter()
                .enumerate()
                .map(|(l, p)| (2 * l + 1) as f64 * (tau + (l * (l + 1)) as f64).powf(-s) * p)
                .sum(),
        }
    }

    /// q i.i.d. uniform points on the manifold, flattened.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(q * self.ambient_dim());
        match self.manifold {
            Manifold::Circle => {
                for _ in 0..q {
                    let t: f64 = rng.random_range(0.0..2.0 * PI);
                    out.extend([t.cos(), t.sin()]);
                }
            }
            _ => {
                while out.len() < 3 * q {
                    let g: [f64; 3] =
                        [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                    let r = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                    if r > 1e-12 {
                        out.extend(g.iter().map(|v| v / r));
                    }
                }
            }
        }
        out
    }

    fn sample_cloud(&self, n: usize, seed: u64) -> Result<PointCloud> {
        match self.manifold {
            Manifold::Circle => sample_circle(n, seed),
            _ => sample_sphere(n, seed),
        }
    }
}

/// Index of the nearest cloud point for each evaluation point (ties to the lower index).
pub fn nearest_neighbor_map(cloud: &PointCloud, eval_points: &[f64]) -> Result<Vec<usize>> {
    nearest_indices(cloud, eval_points)
}

fn check_cloud(cloud: &PointCloud, reference: &ContinuumReference) -> Result<()> {
    if cloud.dim() != reference.ambient_dim() {
        return invalid(format!(
            "cloud has ambient dimension {}, reference needs {}",
            cloud.dim(),
            reference.ambient_dim()
        ));
    }
    Ok(())
}

/// The first k eigenpairs (empirical L²) of the ε-graph Laplacian with the
/// reference's dimension and volume.
pub fn graph_spectrum(cloud: &PointCloud, reference: &ContinuumReference, h: f64, k: usize) -> Result<EigenBasis> {
    check_cloud(cloud, reference)?;
    let w = epsilon_weights(cloud, h, reference.m(), reference.vol())?;
    let lap = Laplacian::new(&w.matrix, LaplacianKind::Unnormalized)?;
    eigs_smallest(lap.require_symmetric()?, k, Normalization::EmpiricalL2, EigenOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueError {
    /// Eigenvalues of τI + κΔ_n.
    pub discrete: Vec<f64>,
    /// τ + κλ^{(i)}.
    pub reference: Vec<f64>,
    /// |discrete - reference| / reference, NaN where the reference is zero.
    pub relative: Vec<f64>,
    /// Largest finite relative error.
    pub max: f64,
}

/// Compares the first k eigenvalues of τI + Δ_n (weights scaled by a constant κ)
/// with τ + κλ^{(i)}. Zero reference values are skipped.
pub fn eigenvalue_error(
    cloud: &PointCloud,
    reference: &ContinuumReference,
    h: f64,
    tau: f64,
    kappa: f64,
    k: usize,
) -> Result<EigenvalueError> {
    if k == 0 || k > reference.len() {
        return invalid(format!("k={k} must be in 1..={}", reference.len()));
    }
    if !(tau >= 0.0) || !(kappa > 0.0) {
        return invalid("tau must be non-negative and kappa positive");
    }
    let basis = graph_spectrum(cloud, reference, h, k)?;
    let discrete: Vec<f64> = basis.values.iter().map(|l| tau + kappa * l).collect();
    let refv: Vec<f64> = reference.values[..k].iter().map(|l| tau + kappa * l).collect();
    let relative: Vec<f64> =
        discrete.iter().zip(&refv).map(|(a, b)| if *b == 0.0 { f64::NAN } else { (a - b).abs() / b }).collect();
    let max = relative.iter().filter(|v| v.is_finite()).fold(0.0, |a: f64, &b| a.max(b));
    Ok(EigenvalueError { discrete, reference: refv, relative, max })
}

/// Orthonormal basis (under the empirical inner product of the rows) of the column span.
fn orthonormal_columns(a: &Mat<f64>) -> Mat<f64> {
    let q = a.nrows() as f64;
    a.qr().compute_thin_Q() * faer::Scale(q.sqrt())
}

/// sin of the largest principal angle between the column spans of a and b,
/// both sampled at the same quadrature points.
pub fn subspace_sine(a: &Mat<f64>, b: &Mat<f64>) -> Result<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let m = qa.transpose() * &qb * faer::Scale(1.0 / a.nrows() as f64);
    let sv = m.singular_values().map_err(|e| Error::Solver(format!("svd failed: {e:?}")))?;
    let cmin = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    Ok((1.0 - cmin * cmin).max(0.0).sqrt())
}

fn columns(m: &Mat<f64>, r: &Range<usize>) -> Mat<f64> {
    m.subcols(r.start, r.len()).to_owned()
}

/// Per continuum eigen-group, sin of the largest principal angle between the
/// interpolated discrete eigenvectors and the continuum eigenfunctions, on
/// `quad_points` fresh uniform points. Only groups within the first k pairs are used.
pub fn eigenspace_error<R: Rng + ?Sized>(
    cloud: &PointCloud,
    reference: &ContinuumReference,
    h: f64,
    k: usize,
    quad_points: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let groups = reference.groups_within(k);
    if groups.is_empty() {
        return invalid(format!("no complete eigen-group within the first {k} pairs"));
    }
    let basis = graph_spectrum(cloud, reference, h, k)?;
    eigenspace_error_with(cloud, reference, &basis, &groups, quad_points, rng)
}

fn eigenspace_error_with<R: Rng + ?Sized>(
    cloud: &PointCloud,
    reference: &ContinuumReference,
    basis: &EigenBasis,
    groups: &[Range<usize>],
    quad_points: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let k = groups.last().map_or(0, |g| g.end);
    let pts = reference.sample_uniform(quad_points, rng);
    let (a, b) = interpolated(cloud, reference, basis, &pts, k)?;
    groups.iter().map(|g| subspace_sine(&columns(&a, g), &columns(&b, g))).collect()
}

/// Discrete eigenvectors through the nearest-neighbor map and continuum
/// eigenfunctions, both at `pts`.
fn interpolated(
    cloud: &PointCloud,
    reference: &ContinuumReference,
    basis: &EigenBasis,
    pts: &[f64],
    k: usize,
) -> Result<(Mat<f64>, Mat<f64>)> {
    let idx = nearest_neighbor_map(cloud, pts)?;
    let a = Mat::from_fn(idx.len(), k, |r, c| basis.vectors[(idx[r], c)]);
    Ok((a, reference.eval_matrix(pts, k)))
}

/// Truncation for field coupling: the largest group boundary ≤ min(50, n/10).
pub fn field_truncation(reference: &ContinuumReference, n: usize) -> usize {
    reference.boundary_at_most(MAX_FIELD_TERMS.min(n / 10))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    /// Monte-Carlo mean of ‖u_n∘T_n - u‖ over the draws.
    pub mean: f64,
    /// Standard error of that mean.
    pub std_error: f64,
    pub k: usize,
}

/// E‖u_n∘T_n − u‖_{L²} for KL fields u = Σ (τ+λ_i)^{-s/2} ξ_i ψ_i and
/// u_n = Σ (τ+λ_{n,i})^{-s/2} (Rξ)_i ψ_{n,i} sharing ξ, where R aligns each
/// discrete eigen-group to the continuum one (orthogonal Procrustes on one
/// quadrature set). The L² norm uses a second, independent quadrature set.
#[allow(clippy::too_many_arguments)]
pub fn field_error<R: Rng + ?Sized>(
    cloud: &PointCloud,
    reference: &ContinuumReference,
    h: f64,
    s: f64,
    tau: f64,
    k: Option<usize>,
    n_draws: usize,
    quad_points: usize,
    rng: &mut R,
) -> Result<FieldError> {
    let n = cloud.len();
    let k_max = field_truncation(reference, n);
    let k = k.unwrap_or(k_max);
    if k == 0 || k > k_max || reference.boundary_at_most(k) != k {
        return invalid(format!("truncation {k} must be a group boundary in 1..={k_max} for n={n}"));
    }
    if n_draws == 0 || quad_points == 0 {
        return invalid("need at least one draw and one quadrature point");
    }
    let basis = graph_spectrum(cloud, reference, h, k)?;
    let groups = reference.groups_within(k);

    let pts = reference.sample_uniform(quad_points, rng);
    let (a, b) = interpolated(cloud, reference, &basis, &pts, k)?;
    let mut rot = Mat::<f64>::zeros(k, k);
    for g in &groups {
        let m = columns(&a, g).transpose() * columns(&b, g);
        let svd = m.thin_svd().map_err(|e| Error::Solver(format!("svd failed: {e:?}")))?;
        let r = svd.U() * svd.V().transpose();
        for i in 0..g.len() {
            for j in 0..g.len() {
                rot[(g.start + i, g.start + j)] = r[(i, j)];
            }
        }
    }

    let pts = reference.sample_uniform(quad_points, rng);
    let (a, b) = interpolated(cloud, reference, &basis, &pts, k)?;
    let wc: Vec<f64> = reference.values[..k].iter().map(|l| (tau + l).powf(-s / 2.0)).collect();
    let wd: Vec<f64> = basis.values.iter().map(|l| (tau + l.max(0.0)).powf(-s / 2.0)).collect();
    let mut errs = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let xi: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let cc = Mat::from_fn(k, 1, |i, _| wc[i] * xi[i]);
        let cd = Mat::from_fn(k, 1, |i, _| wd[i] * (0..k).map(|j| rot[(i, j)] * xi[j]).sum::<f64>());
        let diff = &a * &cd - &b * &cc;
        let ms = (0..quad_points).map(|r| diff[(r, 0)].powi(2)).sum::<f64>() / quad_points as f64;
        errs.push(ms.sqrt());
    }
    let mean = errs.iter().sum::<f64>() / n_draws as f64;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n_draws.max(2) - 1) as f64;
    Ok(FieldError { mean, std_error: (var / n_draws as f64).sqrt(), k })
}

/// Connectivity radius as a function of n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// c · sqrt(log n / n)
    SqrtLog { c: f64 },
    /// c · n^{-exponent}
    Power { c: f64, exponent: f64 },
}

impl Bandwidth {
    pub fn h(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Bandwidth::SqrtLog { c } => c * (nf.ln() / nf).sqrt(),
            Bandwidth::Power { c, exponent } => c * nf.powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub k: usize,
    /// Max relative eigenvalue error over nonzero eigenvalues.
    pub eigenvalue_error: f64,
    /// Largest eigen-group subspace sine.
    pub eigenspace_error: f64,
    pub field_error: f64,
}

/// Errors per n, each averaged over independent clouds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSlopes {
    pub eigenvalue: f64,
    pub eigenspace: f64,
    pub field: f64,
}

impl RateTable {
    pub fn push(&mut self, row: RateRow) -> Result<()> {
        if self.rows.last().is_some_and(|r| r.n >= row.n) {
            return invalid("rate table rows must have strictly increasing n");
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,h,k,eigenvalue_error,eigenspace_error,field_error")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.10e},{},{:.10e},{:.10e},{:.10e}",
                r.n, r.h, r.k, r.eigenvalue_error, r.eigenspace_error, r.field_error
            )?;
        }
        Ok(())
    }
}

/// Least-squares slope of log error against log n for each error column.
pub fn rate_fit(table: &RateTable) -> Result<RateSlopes> {
    if table.rows.len() < 2 {
        return invalid("need at least two rows to fit a rate");
    }
    let x: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).ln()).collect();
    let fit = |f: fn(&RateRow) -> f64| ls_slope(&x, &table.rows.iter().map(|r| f(r).ln()).collect::<Vec<_>>());
    Ok(RateSlopes {
        eigenvalue: fit(|r| r.eigenvalue_error),
        eigenspace: fit(|r| r.eigenspace_error),
        field: fit(|r| r.field_error),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub ns: Vec<usize>,
    pub bandwidth: Bandwidth,
    pub s: f64,
    pub tau: f64,
    /// Independent clouds per n.
    pub replicates: usize,
    pub n_draws: usize,
    pub quad_points: usize,
    /// Eigenvalues compared in the eigenvalue column.
    pub k_eigenvalues: usize,
    pub seed: u64,
}

/// Builds a rate table on the reference manifold; cloud j at size n uses
/// sampling seed derived from (seed, n, j) and an independent quadrature stream.
pub fn rate_table(reference: &ContinuumReference, study: &RateStudy) -> Result<RateTable> {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    if study.replicates == 0 {
        return invalid("need at least one replicate");
    }
    let mut table = RateTable::default();
    for &n in &study.ns {
        let h = study.bandwidth.h(n);
        let k = field_truncation(reference, n);
        let ke = study.k_eigenvalues.min(reference.len());
        let (mut ev, mut es, mut fe) = (0.0, 0.0, 0.0);
        for j in 0..study.replicates {
            let cell = study.seed ^ ((n as u64) << 32) ^ j as u64;
            let cloud = reference.sample_cloud(n, cell)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cell.wrapping_add(0x9E37_79B9_7F4A_7C15));
            let basis = graph_spectrum(&cloud, reference, h, k.max(ke))?;
            let rel = basis.values[..ke]
                .iter()
                .zip(&reference.values[..ke])
                .filter(|(_, r)| **r > 0.0)
                .map(|(a, r)| (a - r).abs() / r)
                .fold(0.0, f64::max);
            ev += rel;
            let groups = reference.groups_within(k);
            let sub = eigenspace_error_with(&cloud, reference, &basis, &groups, study.quad_points, &mut rng)?;
            es += sub.iter().copied().fold(0.0, f64::max);
            fe += field_error(
                &cloud,
                reference,
                h,
                study.s,
                study.tau,
                Some(k),
                study.n_draws,
                study.quad_points,
                &mut rng,
            )?
            .mean;
        }
        let r = study.replicates as f64;
        table.push(RateRow { n, h, k, eigenvalue_error: ev / r, eigenspace_error: es / r, field_error: fe / r })?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRow {
    /// Position along the chain (0 is the anchor x_1).
    pub k: usize,
    pub node: usize,
    pub geodesic: f64,
    pub c_full: f64,
    pub c_truncated: f64,
    pub c_theory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceStudy {
    pub n: usize,
    pub h: f64,
    pub s: f64,
    pub truncation: usize,
    pub rows: Vec<CovarianceRow>,
}

impl CovarianceStudy {
    /// Largest |c_n(x_1, x_k) - c(x_1, x_k)| / c(x_1, x_1) over chain positions ≥ from.
    pub fn max_relative_error(&self, from: usize, truncated: bool) -> f64 {
        let c0 = self.rows[0].c_theory;
        self.rows
            .iter()
            .filter(|r| r.k >= from)
            .map(|r| ((if truncated { r.c_truncated } else { r.c_full }) - r.c_theory).abs() / c0)
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,node,geodesic,c_full,c_truncated,c_theory")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.k, r.node, r.geodesic, r.c_full, r.c_truncated, r.c_theory
            )?;
        }
        Ok(())
    }
}

/// Cloud points nearest to (sin θ_k, 0, cos θ_k), θ_k = kπ/(len-1): a chain
/// along one meridian from the north to the south pole.
pub fn meridian_chain(cloud: &PointCloud, len: usize) -> Result<Vec<usize>> {
    if cloud.dim() != 3 || len < 2 {
        return invalid("meridian chain needs a cloud in R³ and at least two points");
    }
    let targets: Vec<f64> = (0..len)
        .flat_map(|k| {
            let t = k as f64 * PI / (len - 1) as f64;
            [t.sin(), 0.0, t.cos()]
        })
        .collect();
    nearest_indices(cloud, &targets)
}

/// Graph covariances c_n(x_1, x_k) = Σ_i (τ + λ_{n,i})^{-s} ψ_{n,i}(x_1) ψ_{n,i}(x_k)
/// (all n terms and the first `truncation`) against the continuum covariance,
/// along a 50-point meridian chain of a uniform sphere sample.
pub fn covariance_study(
    n: usize,
    h: f64,
    s: f64,
    tau: f64,
    truncation: usize,
    ell_max: usize,
    seed: u64,
) -> Result<CovarianceStudy> {
    let reference = sphere_reference(ell_max);
    let cloud = sample_sphere(n, seed)?;
    if truncation == 0 || truncation > n {
        return invalid(format!("truncation {truncation} must be in 1..={n}"));
    }
    let w = epsilon_weights(&cloud, h, 2, reference.vol())?;
    let lap = Laplacian::new(&w.matrix, LaplacianKind::Unnormalized)?;
    let (values, vectors) = dense_eigh(&lap.require_symmetric()?.to_dense())?;
    let chain = meridian_chain(&cloud, 50)?;
    let weight: Vec<f64> = values.iter().map(|l| (tau + l.max(0.0)).powf(-s)).collect();
    let nf = n as f64;
    let x1 = chain[0];
    let rows = chain
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let term = |i: usize| weight[i] * vectors[(x1, i)] * vectors[(j, i)] * nf;
            let c_full = (0..n).map(term).sum();
            let c_truncated = (0..truncation).map(term).sum();
            let dot: f64 = cloud.point(x1).iter().zip(cloud.point(j)).map(|(a, b)| a * b).sum();
            CovarianceRow {
                k,
                node: j,
                geodesic: dot.clamp(-1.0, 1.0).acos(),
                c_full,
                c_truncated,
                c_theory: reference.covariance(cloud.point(x1), cloud.point(j), tau, s),
            }
        })
        .collect();
    Ok(CovarianceStudy { n, h, s, truncation, rows })
}
