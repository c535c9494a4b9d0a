//! Weight matrices on point clouds and the graph Laplacians built from them.

use crate::error::{invalid, Result};
use crate::pointcloud::{knn, neighbors_within, EdgeListInput, PointCloud};
use crate::sparse::SparseSymmetric;
use crate::special::unit_ball_volume;

/// A symmetric weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub matrix: SparseSymmetric,
    /// Set when no pair of nodes is connected; the resulting Laplacian is zero.
    pub edgeless: bool,
}

impl Weights {
    fn from_upper(n: usize, t: &[(usize, usize, f64)]) -> Result<Self> {
        let matrix = SparseSymmetric::from_triplets(n, t)?;
        let edgeless = matrix.nnz() == 0;
        Ok(Weights { matrix, edgeless })
    }
}

fn check_eps_args(h: f64, m: usize, vol: f64) -> Result<()> {
    if !(h > 0.0) {
        return invalid(format!("h must be positive, got {h}"));
    }
    if m == 0 {
        return invalid("intrinsic dimension must be at least 1");
    }
    if !(vol > 0.0) {
        return invalid(format!("volume must be positive, got {vol}"));
    }
    Ok(())
}

/// The constant 2(m+2)·vol / (n ν_m h^{m+2}) multiplying the radius indicator.
pub fn epsilon_scale(n: usize, h: f64, m: usize, vol: f64) -> f64 {
    2.0 * (m as f64 + 2.0) * vol / (n as f64 * unit_ball_volume(m) * h.powi(m as i32 + 2))
}

/// ε-graph weights W_ij = 2(m+2)·vol/(n ν_m h^{m+2}) for |x_i - x_j| < h.
pub fn epsilon_weights(cloud: &PointCloud, h: f64, m: usize, vol: f64) -> Result<Weights> {
    kappa_weights(cloud, h, m, vol, &vec![1.0; cloud.len()])
}

/// ε-graph weights scaled by √(κ_i κ_j).
pub fn kappa_weights(cloud: &PointCloud, h: f64, m: usize, vol: f64, kappa: &[f64]) -> Result<Weights> {
    check_eps_args(h, m, vol)?;
    let n = cloud.len();
    if kappa.len() != n {
        return invalid(format!("kappa has length {}, expected {n}", kappa.len()));
    }
    if let Some(i) = kappa.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
        return invalid(format!("kappa[{i}] = {} is not positive", kappa[i]));
    }
    let c = epsilon_scale(n, h, m, vol);
    let nb = neighbors_within(cloud, h)?;
    let mut t = Vec::with_capacity(nb.edge_count() / 2);
    for i in 0..n {
        for &(j, _) in nb.neighbors(i) {
            if j > i {
                t.push((i, j, c * (kappa[i] * kappa[j]).sqrt()));
            }
        }
    }
    Weights::from_upper(n, &t)
}

/// Rescales existing weights by √(κ_i κ_j).
pub fn reweight_kappa(w: &SparseSymmetric, kappa: &[f64]) -> Result<SparseSymmetric> {
    if kappa.len() != w.n() {
        return invalid(format!("kappa has length {}, expected {}", kappa.len(), w.n()));
    }
    if let Some(i) = kappa.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
        return invalid(format!("kappa[{i}] = {} is not positive", kappa[i]));
    }
    let t: Vec<_> = w.upper_triplets().into_iter().map(|(i, j, v)| (i, j, v * (kappa[i] * kappa[j]).sqrt())).collect();
    SparseSymmetric::from_triplets(w.n(), &t)
}

/// Density-corrected ε-graph weights (m+2)/(n ν_m h^{m+2}) · (1/q_i + 1/q_j), where
/// q_i = #{j : |x_i - x_j| < h} / (n ν_m h^m) counts i itself, so isolated nodes
/// keep a finite q.
pub fn density_corrected_weights(cloud: &PointCloud, h: f64, m: usize) -> Result<Weights> {
    check_eps_args(h, m, 1.0)?;
    let n = cloud.len();
    let nb = neighbors_within(cloud, h)?;
    let nu = unit_ball_volume(m);
    let q: Vec<f64> = (0..n).map(|i| (nb.neighbors(i).len() + 1) as f64 / (n as f64 * nu * h.powi(m as i32))).collect();
    let c = (m as f64 + 2.0) / (n as f64 * nu * h.powi(m as i32 + 2));
    let mut t = Vec::new();
    for i in 0..n {
        for &(j, _) in nb.neighbors(i) {
            if j > i {
                t.push((i, j, c * (1.0 / q[i] + 1.0 / q[j])));
            }
        }
    }
    Weights::from_upper(n, &t)
}

/// Self-tuning weights exp(-|x_i - x_j|² / (2 δ_i δ_j)) on the symmetrized k-NN relation,
/// δ_i being the distance from x_i to its k-th neighbor.
pub fn selftuning_knn_weights(cloud: &PointCloud, k: usize) -> Result<Weights> {
    let r = knn(cloud, k)?;
    if let Some(i) = r.delta.iter().position(|&d| d == 0.0) {
        return invalid(format!("node {i} has k-th neighbor distance zero (duplicate points)"));
    }
    let nb = r.neighbors.symmetrized();
    let mut t = Vec::new();
    for i in 0..cloud.len() {
        for &(j, d) in nb.neighbors(i) {
            if j > i {
                t.push((i, j, (-d * d / (2.0 * r.delta[i] * r.delta[j])).exp()));
            }
        }
    }
    Weights::from_upper(cloud.len(), &t)
}

/// Gaussian weights exp(-d² / (2 d̄²)) on recorded pairs, d̄ the mean recorded distance.
pub fn distance_gaussian_weights(input: &EdgeListInput) -> Result<Weights> {
    if input.edges.is_empty() {
        return invalid("edge list is empty");
    }
    let dbar = input.edges.iter().map(|e| e.2).sum::<f64>() / input.edges.len() as f64;
    let t: Vec<_> = input
        .edges
        .iter()
        .map(|&(i, j, d)| {
            let w = if dbar > 0.0 { (-d * d / (2.0 * dbar * dbar)).exp() } else { 1.0 };
            (i, j, w)
        })
        .collect();
    Weights::from_upper(input.n, &t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    /// D - W
    Unnormalized,
    /// I - D^{-1/2} W D^{-1/2}
    Symmetric,
    /// D^{-1}(D - W); not symmetric, available only through products.
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    kind: LaplacianKind,
    /// D - W for the unnormalized and random-walk kinds, the normalized matrix otherwise.
    matrix: SparseSymmetric,
    degrees: Vec<f64>,
}

impl Laplacian {
    pub fn new(w: &SparseSymmetric, kind: LaplacianKind) -> Result<Self> {
        let n = w.n();
        let mut degrees = vec![0.0; n];
        let mut off = Vec::new();
        for (i, j, v) in w.upper_triplets() {
            if i == j {
                return invalid(format!("weight matrix has a diagonal entry at {i}"));
            }
            if v < 0.0 {
                return invalid(format!("negative weight at ({i},{j})"));
            }
            degrees[i] += v;
            degrees[j] += v;
            off.push((i, j, v));
        }
        if kind != LaplacianKind::Unnormalized {
            if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
                return invalid(format!("node {i} has zero degree; normalized Laplacian undefined"));
            }
        }
        let mut t = Vec::with_capacity(off.len() + n);
        match kind {
            LaplacianKind::Unnormalized | LaplacianKind::RandomWalk => {
                t.extend(off.iter().map(|&(i, j, v)| (i, j, -v)));
                t.extend(degrees.iter().enumerate().map(|(i, &d)| (i, i, d)));
            }
            LaplacianKind::Symmetric => {
                t.extend(off.iter().map(|&(i, j, v)| (i, j, -v / (degrees[i] * degrees[j]).sqrt())));
                t.extend((0..n).map(|i| (i, i, 1.0)));
            }
        }
        Ok(Laplacian { kind, matrix: SparseSymmetric::from_triplets(n, &t)?, degrees })
    }

    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// The symmetric matrix for the unnormalized and symmetric kinds.
    pub fn symmetric_matrix(&self) -> Option<&SparseSymmetric> {
        match self.kind {
            LaplacianKind::RandomWalk => None,
            _ => Some(&self.matrix),
        }
    }

    /// Symmetric matrix or an invalid-argument error for the random-walk kind.
    pub fn require_symmetric(&self) -> Result<&SparseSymmetric> {
        self.symmetric_matrix()
            .ok_or_else(|| crate::Error::InvalidArgument("random-walk Laplacian is not symmetric".into()))
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.matvec(u);
        if self.kind == LaplacianKind::RandomWalk {
            y.iter_mut().zip(&self.degrees).for_each(|(v, d)| *v /= d);
        }
        y
    }

    /// uᵀ L u.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        self.matvec(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }
}

/// ½ Σ_ij W_ij (u_i - u_j)², the Dirichlet energy of u.
pub fn dirichlet_energy(w: &SparseSymmetric, u: &[f64]) -> f64 {
    w.upper_triplets().iter().map(|&(i, j, v)| v * (u[i] - u[j]).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::Manifold;

    fn complete3() -> SparseSymmetric {
        SparseSymmetric::from_triplets(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn scale_constants() {
        let n = 2500;
        let h: f64 = 0.3;
        let got = epsilon_scale(n, h, 2, 4.0 * std::f64::consts::PI);
        assert!((got - 32.0 / (n as f64 * h.powi(4))).abs() < 1e-12 * got);
        assert!((epsilon_scale(100, 0.5, 2, 1.0) - 0.407_436_654_315_252_1).abs() < 1e-12);
    }

    #[test]
    fn far_points_no_edges() {
        let c = PointCloud::new(vec![0.0, 0.0, 3.0, 0.0], 2, Manifold::Abstract).unwrap();
        let w = epsilon_weights(&c, 1.0, 2, 1.0).unwrap();
        assert!(w.edgeless);
    }

    #[test]
    fn kappa_scaling() {
        let c = PointCloud::new(vec![0.0, 0.0, 0.1, 0.0], 2, Manifold::Abstract).unwrap();
        let base = epsilon_weights(&c, 0.5, 2, 1.0).unwrap().matrix;
        let w = kappa_weights(&c, 0.5, 2, 1.0, &[1.0, 9.0]).unwrap().matrix;
        assert!((w.get(0, 1) - 3.0 * base.get(0, 1)).abs() < 1e-15);
        assert!(kappa_weights(&c, 0.5, 2, 1.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn selftuning_value() {
        // Equilateral-ish: two points at distance 1 with k=1 gives δ = 1 on both ends.
        let c = PointCloud::new(vec![0.0, 1.0], 1, Manifold::Abstract).unwrap();
        let w = selftuning_knn_weights(&c, 1).unwrap().matrix;
        assert!((w.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        let dup = PointCloud::new(vec![0.0, 0.0, 1.0], 1, Manifold::Abstract).unwrap();
        assert!(selftuning_knn_weights(&dup, 1).is_err());
    }

    #[test]
    fn distance_weights() {
        let e = EdgeListInput::new(2, vec![(0, 1, 7.0)]).unwrap();
        let w = distance_gaussian_weights(&e).unwrap().matrix;
        assert!((w.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        let e = EdgeListInput::new(3, vec![(0, 1, 0.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(distance_gaussian_weights(&e).unwrap().matrix.get(0, 1), 1.0);
        assert!(distance_gaussian_weights(&EdgeListInput::new(3, vec![]).unwrap()).is_err());
    }

    #[test]
    fn laplacian_kinds() {
        let w = complete3();
        let l = Laplacian::new(&w, LaplacianKind::Unnormalized).unwrap();
        assert_eq!(l.matvec(&[1.0, 1.0, 1.0]), vec![0.0, 0.0, 0.0]);
        assert!((l.quadratic_form(&[1.0, 0.0, 0.0]) - 2.0).abs() < 1e-15);
        let s = Laplacian::new(&w, LaplacianKind::Symmetric).unwrap();
        assert!((s.symmetric_matrix().unwrap().get(0, 1) + 0.5).abs() < 1e-15);
        let rw = Laplacian::new(&w, LaplacianKind::RandomWalk).unwrap();
        assert!(rw.symmetric_matrix().is_none());
        assert!(rw.matvec(&[2.0, 2.0, 2.0]).iter().all(|v| v.abs() < 1e-15));
        let isolated = SparseSymmetric::from_triplets(3, &[(0, 1, 1.0)]).unwrap();
        assert!(Laplacian::new(&isolated, LaplacianKind::Symmetric).is_err());
        assert!(Laplacian::new(&isolated, LaplacianKind::Unnormalized).is_ok());
    }
}
