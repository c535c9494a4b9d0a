//! Discrete Matérn models: operator, precision, covariance and samplers.
//!
//! With B = diag(τ) + Δ^κ and prefactor D = τ^{s/2-m/4} κ^{m/4}, the field is
//! u = D ⊙ w where w has covariance B^{-s}. Hence Cov(u) = D B^{-s} D and, for
//! integer s, the precision is Q = D^{-1} B^s D^{-1}.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::graph::Laplacian;
use crate::sparse::SparseSymmetric;
use crate::spectral::{dense_eigh, CholeskyFactor, EigenBasis, Normalization};

/// Largest integer smoothness with an assembled sparse precision.
pub const MAX_SPARSE_S: u32 = 4;
/// Largest n for which dense covariances are formed.
pub const DENSE_COVARIANCE_MAX: usize = 8192;

#[derive(Debug, Clone)]
pub struct MaternModel {
    laplacian: SparseSymmetric,
    tau: Vec<f64>,
    kappa: Vec<f64>,
    s: f64,
    m: f64,
}

pub(crate) fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

impl MaternModel {
    /// `laplacian` must already carry the κ weighting when `kappa` is not all ones.
    pub fn new(laplacian: &Laplacian, tau: Vec<f64>, kappa: Option<Vec<f64>>, s: f64, m: f64) -> Result<Self> {
        Self::from_matrix(laplacian.require_symmetric()?.clone(), tau, kappa, s, m)
    }

    pub fn from_matrix(
        laplacian: SparseSymmetric,
        tau: Vec<f64>,
        kappa: Option<Vec<f64>>,
        s: f64,
        m: f64,
    ) -> Result<Self> {
        let n = laplacian.n();
        let kappa = kappa.unwrap_or_else(|| vec![1.0; n]);
        for (name, v) in [("tau", &tau), ("kappa", &kappa)] {
            if v.len() != n {
                return invalid(format!("{name} has length {}, expected {n}", v.len()));
            }
            if let Some(i) = v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                return invalid(format!("{name}[{i}] = {} must be positive", v[i]));
            }
        }
        if !(s > 0.0 && s.is_finite()) {
            return invalid(format!("smoothness s must be positive, got {s}"));
        }
        if !(m >= 1.0 && m.is_finite()) {
            return invalid(format!("effective dimension m must be >= 1, got {m}"));
        }
        Ok(MaternModel { laplacian, tau, kappa, s, m })
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn laplacian(&self) -> &SparseSymmetric {
        &self.laplacian
    }

    /// Same graph and κ with a new τ.
    pub fn with_tau(&self, tau: Vec<f64>) -> Result<Self> {
        Self::from_matrix(self.laplacian.clone(), tau, Some(self.kappa.clone()), self.s, self.m)
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::from_matrix(self.laplacian.clone(), self.tau.clone(), Some(self.kappa.clone()), s, self.m)
    }

    /// B = diag(τ) + Δ.
    pub fn operator_matrix(&self) -> SparseSymmetric {
        self.laplacian.add_diagonal(&self.tau)
    }

    /// D_i = τ_i^{s/2 - m/4} κ_i^{m/4}.
    pub fn prefactor(&self) -> Vec<f64> {
        let (a, b) = (self.s / 2.0 - self.m / 4.0, self.m / 4.0);
        self.tau.iter().zip(&self.kappa).map(|(t, k)| t.powf(a) * k.powf(b)).collect()
    }

    /// s as an integer in 1..=4, or an error directing to the spectral path.
    pub fn integer_s(&self) -> Result<u32> {
        if self.s.fract() != 0.0 || self.s < 1.0 || self.s > MAX_SPARSE_S as f64 {
            return invalid(format!(
                "sparse precision needs integer s in 1..={MAX_SPARSE_S}, got {}; use the spectral path",
                self.s
            ));
        }
        Ok(self.s as u32)
    }

    /// Q = D^{-1} B^s D^{-1}.
    pub fn precision(&self) -> Result<SparseSymmetric> {
        let s = self.integer_s()?;
        let dinv: Vec<f64> = self.prefactor().iter().map(|d| 1.0 / d).collect();
        Ok(self.operator_matrix().pow(s).scale_sym(&dinv))
    }

    pub fn cholesky_sampler(&self) -> Result<CholeskySampler> {
        let s = self.integer_s()?;
        let factor = CholeskyFactor::new(&self.operator_matrix())?;
        Ok(CholeskySampler { factor, s, prefactor: self.prefactor() })
    }

    /// One draw via a Cholesky factor of B (factored on every call).
    pub fn sample_cholesky<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.cholesky_sampler()?.draw(rng))
    }

    /// Full eigendecomposition of B, unit-norm eigenvectors.
    pub fn eigenbasis(&self) -> Result<EigenBasis> {
        let (values, vectors) = dense_eigh(&self.operator_matrix().to_dense())?;
        Ok(EigenBasis { values, vectors, normalization: Normalization::Euclidean })
    }

    fn unit_basis(&self, basis: &EigenBasis, k: Option<usize>) -> Result<(EigenBasis, usize)> {
        if basis.n() != self.n() {
            return invalid(format!("basis has {} rows, model has {} nodes", basis.n(), self.n()));
        }
        let k = k.unwrap_or(basis.len());
        if k > basis.len() {
            return invalid(format!("truncation {k} exceeds the {} available eigenpairs", basis.len()));
        }
        if let Some(v) = basis.values[..k].iter().find(|v| !(**v > 0.0)) {
            return invalid(format!("operator eigenvalue {v} is not positive"));
        }
        Ok((basis.renormalized(Normalization::Euclidean), k))
    }

    /// Truncated Karhunen–Loève draw u = D ⊙ Σ_{i<k} λ_i^{-s/2} ξ_i ψ_i from an
    /// eigenbasis of B; valid for fractional s.
    pub fn sample_spectral<R: Rng + ?Sized>(
        &self,
        basis: &EigenBasis,
        k_trunc: Option<usize>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let (_, k) = self.unit_basis(basis, k_trunc)?;
        let xi = standard_normals(rng, k);
        self.spectral_field(basis, &xi)
    }

    /// KL field for given coefficients ξ (length = truncation).
    pub fn spectral_field(&self, basis: &EigenBasis, xi: &[f64]) -> Result<Vec<f64>> {
        let (unit, k) = self.unit_basis(basis, Some(xi.len()))?;
        let mut w = vec![0.0; self.n()];
        for i in 0..k {
            let c = unit.values[i].powf(-self.s / 2.0) * xi[i];
            w.iter_mut().zip(unit.vector(i)).for_each(|(a, b)| *a += c * b);
        }
        Ok(w.iter().zip(self.prefactor()).map(|(a, d)| a * d).collect())
    }

    /// Dense covariance D (Σ_{i<k} λ_i^{-s} ψ_i ψ_iᵀ) D.
    pub fn covariance_matrix(&self, basis: &EigenBasis, k_trunc: Option<usize>) -> Result<Mat<f64>> {
        let n = self.n();
        if n > DENSE_COVARIANCE_MAX {
            return invalid(format!("n={n} exceeds the dense covariance cap; use marginal_variances"));
        }
        let (unit, k) = self.unit_basis(basis, k_trunc)?;
        let d = self.prefactor();
        let scaled = Mat::from_fn(n, k, |i, j| unit.vectors[(i, j)] * d[i] * unit.values[j].powf(-self.s / 2.0));
        Ok(&scaled * scaled.transpose())
    }

    /// Diagonal of the covariance, accumulated row by row.
    pub fn marginal_variances(&self, basis: &EigenBasis) -> Result<Vec<f64>> {
        let (unit, k) = self.unit_basis(basis, None)?;
        let d = self.prefactor();
        let w: Vec<f64> = unit.values[..k].iter().map(|l| l.powf(-self.s)).collect();
        Ok((0..self.n())
            .map(|i| d[i] * d[i] * (0..k).map(|j| w[j] * unit.vectors[(i, j)].powi(2)).sum::<f64>())
            .collect())
    }
}

/// Reusable Cholesky-based sampler for integer s.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    factor: CholeskyFactor,
    s: u32,
    prefactor: Vec<f64>,
}

impl CholeskySampler {
    /// w = B^{-p} ξ for s = 2p and w = B^{-p} R^{-1} ξ for s = 2p + 1, then u = D ⊙ w.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let xi = standard_normals(rng, self.factor.n());
        self.field(&xi)
    }

    pub fn field(&self, xi: &[f64]) -> Vec<f64> {
        let mut w = if self.s % 2 == 1 { self.factor.solve_r(xi) } else { xi.to_vec() };
        for _ in 0..self.s / 2 {
            w = self.factor.solve(&w);
        }
        w.iter().zip(&self.prefactor).map(|(a, d)| a * d).collect()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LaplacianKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn complete3_laplacian() -> Laplacian {
        let w = SparseSymmetric::from_triplets(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        Laplacian::new(&w, LaplacianKind::Unnormalized).unwrap()
    }

    #[test]
    fn operator_shift() {
        let m = MaternModel::new(&complete3_laplacian(), vec![1.0; 3], None, 2.0, 2.0).unwrap();
        let b = m.eigenbasis().unwrap();
        for (got, want) in b.values.iter().zip([1.0, 4.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn edgeless_model_draws_xi() {
        // s/2 - m/4 = 0 makes the prefactor 1, and B = I gives u = ξ.
        let m = MaternModel::from_matrix(SparseSymmetric::zeros(4), vec![1.0; 4], None, 2.0, 4.0).unwrap();
        let xi = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(m.cholesky_sampler().unwrap().field(&xi), xi.to_vec());
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(m.sample_cholesky(&mut r1).unwrap(), m.sample_cholesky(&mut r2).unwrap());
    }

    #[test]
    fn precision_s1_is_operator() {
        let m = MaternModel::new(&complete3_laplacian(), vec![1.0; 3], None, 1.0, 2.0).unwrap();
        assert_eq!(m.precision().unwrap().to_dense(), m.operator_matrix().to_dense());
        assert!(m.with_s(1.5).unwrap().precision().is_err());
        assert!(m.with_s(5.0).unwrap().precision().is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let l = complete3_laplacian();
        assert!(MaternModel::new(&l, vec![1.0, 0.0, 1.0], None, 2.0, 1.0).is_err());
        assert!(MaternModel::new(&l, vec![1.0; 3], Some(vec![1.0; 2]), 2.0, 1.0).is_err());
        assert!(MaternModel::new(&l, vec![1.0; 3], None, 0.0, 1.0).is_err());
        assert!(MaternModel::new(&l, vec![1.0; 3], None, 2.0, 0.5).is_err());
    }

    #[test]
    fn zero_coefficients_zero_field() {
        let m = MaternModel::new(&complete3_laplacian(), vec![2.0; 3], None, 1.5, 1.0).unwrap();
        let b = m.eigenbasis().unwrap();
        assert_eq!(m.spectral_field(&b, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(m.spectral_field(&b, &[0.0; 4]).is_err());
    }
}
