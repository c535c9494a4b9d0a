//! Hyperparameter-indexed Matérn priors and their precision operators.

use std::sync::OnceLock;

use faer::Mat;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::graph::{reweight_kappa, Laplacian, LaplacianKind};
use crate::matern::{standard_normals, MaternModel};
use crate::sparse::SparseSymmetric;
use crate::spectral::{dense_eigh, CholeskyFactor};

use super::hyper::{HyperKL, HyperTarget};

/// Maps θ to a Matérn model on a fixed weighted graph. Without a hyperprior
/// the family is the single model with constant τ.
#[derive(Debug, Clone)]
pub struct LatentFamily {
    weights: SparseSymmetric,
    kind: LaplacianKind,
    base: SparseSymmetric,
    m: f64,
    hyper: Option<HyperKL>,
    tau_const: f64,
    base_eig: OnceLock<(Vec<f64>, Mat<f64>)>,
}

impl LatentFamily {
    pub fn new(
        weights: &SparseSymmetric,
        kind: LaplacianKind,
        m: f64,
        hyper: Option<HyperKL>,
        tau_const: f64,
    ) -> Result<Self> {
        let base = Laplacian::new(weights, kind)?.require_symmetric()?.clone();
        if let Some(h) = &hyper {
            if h.n() != weights.n() {
                return invalid(format!("hyperprior has {} nodes, graph has {}", h.n(), weights.n()));
            }
        }
        if !(tau_const > 0.0) {
            return invalid(format!("tau must be positive, got {tau_const}"));
        }
        if !(m >= 1.0 && m.is_finite()) {
            return invalid(format!("effective dimension m must be >= 1, got {m}"));
        }
        Ok(LatentFamily { weights: weights.clone(), kind, base, m, hyper, tau_const, base_eig: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn hyper(&self) -> Option<&HyperKL> {
        self.hyper.as_ref()
    }

    pub fn n_theta(&self) -> usize {
        self.hyper.as_ref().map_or(0, |h| h.n0())
    }

    /// The Laplacian of the κ ≡ 1 graph.
    pub fn base_laplacian(&self) -> &SparseSymmetric {
        &self.base
    }

    /// (τ, κ) at θ.
    pub fn tau_kappa(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        match &self.hyper {
            None if theta.is_empty() => Ok((vec![self.tau_const; n], vec![1.0; n])),
            None => invalid("family has no hyperparameters but theta is non-empty"),
            Some(h) => {
                let f = h.field(theta)?;
                match h.target() {
                    HyperTarget::Tau => Ok((f, vec![1.0; n])),
                    HyperTarget::Kappa => Ok((vec![self.tau_const; n], f)),
                }
            }
        }
    }

    pub fn model(&self, theta: &[f64], s: f64) -> Result<MaternModel> {
        let (tau, kappa) = self.tau_kappa(theta)?;
        if self.hyper.as_ref().is_some_and(|h| h.target() == HyperTarget::Kappa) {
            let w = reweight_kappa(&self.weights, &kappa)?;
            let lap = Laplacian::new(&w, self.kind)?;
            MaternModel::new(&lap, tau, Some(kappa), s, self.m)
        } else {
            MaternModel::from_matrix(self.base.clone(), tau, None, s, self.m)
        }
    }

    /// Prior precision at (θ, s): sparse for integer s; for fractional s a
    /// spectral backend, reusing one eigendecomposition of Δ when τ is constant
    /// and κ ≡ 1.
    pub fn precision(&self, theta: &[f64], s: f64) -> Result<PriorPrecision> {
        let model = self.model(theta, s)?;
        if model.integer_s().is_ok() {
            return PriorPrecision::sparse(&model, None);
        }
        let tau = model.tau();
        let constant =
            tau.iter().all(|t| (t - tau[0]).abs() <= 1e-12 * tau[0]) && model.kappa().iter().all(|&k| k == 1.0);
        if !constant {
            return PriorPrecision::spectral(&model);
        }
        let (values, vectors) = match self.base_eig.get() {
            Some(e) => e,
            None => {
                let e = dense_eigh(&self.base.to_dense())?;
                self.base_eig.get_or_init(|| e)
            }
        };
        let values: Vec<f64> = values.iter().map(|l| l.max(0.0) + tau[0]).collect();
        Ok(PriorPrecision::Spectral { vectors: vectors.clone(), values, s, d: model.prefactor() })
    }
}

/// Precision Q = D⁻¹ Bˢ D⁻¹ of a Matérn model, through a sparse factor of B
/// for integer s or a dense eigendecomposition of B otherwise.
#[derive(Debug, Clone)]
pub enum PriorPrecision {
    Sparse { b: SparseSymmetric, factor: CholeskyFactor, s: u32, d: Vec<f64> },
    Spectral { vectors: Mat<f64>, values: Vec<f64>, s: f64, d: Vec<f64> },
}

impl PriorPrecision {
    /// Sparse when s is an integer in the supported range, spectral otherwise.
    pub fn new(model: &MaternModel) -> Result<Self> {
        match model.integer_s() {
            Ok(_) => Self::sparse(model, None),
            Err(_) => Self::spectral(model),
        }
    }

    /// Sparse backend; `previous` supplies a symbolic analysis to reuse.
    pub fn sparse(model: &MaternModel, previous: Option<&CholeskyFactor>) -> Result<Self> {
        let s = model.integer_s()?;
        let b = model.operator_matrix();
        let factor = match previous {
            Some(f) => f.refactor(&b)?,
            None => CholeskyFactor::new(&b)?,
        };
        Ok(PriorPrecision::Sparse { b, factor, s, d: model.prefactor() })
    }

    pub fn spectral(model: &MaternModel) -> Result<Self> {
        let (values, vectors) = dense_eigh(&model.operator_matrix().to_dense())?;
        if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
            return invalid(format!("operator eigenvalue {v} is not positive"));
        }
        Ok(PriorPrecision::Spectral { vectors, values, s: model.s(), d: model.prefactor() })
    }

    pub fn n(&self) -> usize {
        self.prefactor().len()
    }

    pub fn prefactor(&self) -> &[f64] {
        match self {
            PriorPrecision::Sparse { d, .. } | PriorPrecision::Spectral { d, .. } => d,
        }
    }

    /// Cholesky factor of B for the sparse backend.
    pub fn factor(&self) -> Option<&CholeskyFactor> {
        match self {
            PriorPrecision::Sparse { factor, .. } => Some(factor),
            PriorPrecision::Spectral { .. } => None,
        }
    }

    /// The assembled sparse Q (sparse backend only).
    pub fn matrix(&self) -> Option<SparseSymmetric> {
        match self {
            PriorPrecision::Sparse { b, s, d, .. } => {
                let dinv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
                Some(b.pow(*s).scale_sym(&dinv))
            }
            PriorPrecision::Spectral { .. } => None,
        }
    }

    /// log det Q = s log det B - 2 Σ log D.
    pub fn logdet(&self) -> f64 {
        let sum_log_d: f64 = self.prefactor().iter().map(|x| x.ln()).sum();
        match self {
            PriorPrecision::Sparse { factor, s, .. } => *s as f64 * factor.logdet() - 2.0 * sum_log_d,
            PriorPrecision::Spectral { values, s, .. } => {
                s * values.iter().map(|l| l.ln()).sum::<f64>() - 2.0 * sum_log_d
            }
        }
    }

    /// Q u.
    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let d = self.prefactor();
        let mut v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a / b).collect();
        match self {
            PriorPrecision::Sparse { b, s, .. } => {
                for _ in 0..*s {
                    v = b.matvec(&v);
                }
            }
            PriorPrecision::Spectral { vectors, values, s, .. } => {
                v = spectral_apply(vectors, values, &v, |l| l.powf(*s));
            }
        }
        v.iter().zip(d).map(|(a, b)| a / b).collect()
    }

    /// uᵀ Q u.
    pub fn quad(&self, u: &[f64]) -> f64 {
        self.matvec(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Q⁻¹ b = D B⁻ˢ D b.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.prefactor();
        let mut v: Vec<f64> = rhs.iter().zip(d).map(|(a, b)| a * b).collect();
        match self {
            PriorPrecision::Sparse { factor, s, .. } => {
                for _ in 0..*s {
                    v = factor.solve(&v);
                }
            }
            PriorPrecision::Spectral { vectors, values, s, .. } => {
                v = spectral_apply(vectors, values, &v, |l| l.powf(-*s));
            }
        }
        v.iter().zip(d).map(|(a, b)| a * b).collect()
    }

    /// Columns `idx` of Q⁻¹, as an n × |idx| matrix.
    pub fn cov_columns(&self, idx: &[usize]) -> Mat<f64> {
        let n = self.n();
        let mut out = Mat::zeros(n, idx.len());
        let mut e = vec![0.0; n];
        for (c, &j) in idx.iter().enumerate() {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            out.col_as_slice_mut(c).copy_from_slice(&col);
        }
        out
    }

    /// A draw from N(0, Q⁻¹).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.prefactor();
        let xi = standard_normals(rng, self.n());
        let w = match self {
            PriorPrecision::Sparse { factor, s, .. } => {
                let mut w = if s % 2 == 1 { factor.solve_r(&xi) } else { xi };
                for _ in 0..s / 2 {
                    w = factor.solve(&w);
                }
                w
            }
            PriorPrecision::Spectral { vectors, values, s, .. } => {
                let n = self.n();
                let mut w = vec![0.0; n];
                for (i, l) in values.iter().enumerate() {
                    let c = l.powf(-s / 2.0) * xi[i];
                    w.iter_mut().zip(vectors.col_as_slice(i)).for_each(|(a, v)| *a += c * v);
                }
                w
            }
        };
        w.iter().zip(d).map(|(a, b)| a * b).collect()
    }
}

/// V f(Λ) Vᵀ x.
fn spectral_apply(vectors: &Mat<f64>, values: &[f64], x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    for (i, &l) in values.iter().enumerate() {
        let v = vectors.col_as_slice(i);
        let c = f(l) * v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        y.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgm::dense::DenseChol;
    use crate::spectral::{eigs_smallest, EigenOptions, Normalization};

    fn ring(n: usize) -> SparseSymmetric {
        let t: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1.0 + 0.1 * i as f64)).collect();
        SparseSymmetric::from_triplets(n, &t).unwrap()
    }

    fn family(n: usize, target: HyperTarget) -> LatentFamily {
        let w = ring(n);
        let lap = Laplacian::new(&w, LaplacianKind::Unnormalized).unwrap();
        let basis =
            eigs_smallest(lap.symmetric_matrix().unwrap(), 4, Normalization::EmpiricalL2, EigenOptions::default())
                .unwrap();
        let h = HyperKL::new(&basis, 2.0, 1.0, 4, 1.0, target).unwrap();
        LatentFamily::new(&w, LaplacianKind::Unnormalized, 1.0, Some(h), 0.7).unwrap()
    }

    #[test]
    fn rejects_dimension_below_one() {
        let w = ring(8);
        assert!(LatentFamily::new(&w, LaplacianKind::Unnormalized, 0.97, None, 1.0).is_err());
        assert!(LatentFamily::new(&w, LaplacianKind::Unnormalized, 1.0, None, 1.0).is_ok());
    }

    #[test]
    fn sparse_and_spectral_agree() {
        let fam = family(12, HyperTarget::Tau);
        let theta = [0.3, -0.5, 0.2, 0.9];
        for s in [1.0, 2.0, 3.0] {
            let model = fam.model(&theta, s).unwrap();
            let a = PriorPrecision::sparse(&model, None).unwrap();
            let b = PriorPrecision::spectral(&model).unwrap();
            let dense = model.precision().unwrap().to_dense();
            let dc = DenseChol::new(&dense).unwrap();
            assert!((a.logdet() - dc.logdet()).abs() < 1e-8 * dc.logdet().abs().max(1.0));
            assert!((b.logdet() - dc.logdet()).abs() < 1e-8 * dc.logdet().abs().max(1.0));
            let u: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
            let qa = a.matvec(&u);
            let qb = b.matvec(&u);
            for i in 0..12 {
                let qd: f64 = (0..12).map(|j| dense[(i, j)] * u[j]).sum();
                assert!((qa[i] - qd).abs() < 1e-9 * (1.0 + qd.abs()));
                assert!((qb[i] - qd).abs() < 1e-8 * (1.0 + qd.abs()));
            }
            let x = a.solve(&qa);
            assert!(x.iter().zip(&u).all(|(p, q)| (p - q).abs() < 1e-9));
            let x = b.solve(&qb);
            assert!(x.iter().zip(&u).all(|(p, q)| (p - q).abs() < 1e-8));
        }
    }

    #[test]
    fn kappa_target_with_unit_kappa_matches_plain() {
        let fam = family(10, HyperTarget::Kappa);
        let m = fam.model(&[0.0; 4], 2.0).unwrap();
        let plain = MaternModel::from_matrix(fam.base_laplacian().clone(), vec![0.7; 10], None, 2.0, 1.0).unwrap();
        let a = m.precision().unwrap().to_dense();
        let b = plain.precision().unwrap().to_dense();
        for i in 0..10 {
            for j in 0..10 {
                assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cached_stationary_spectrum_matches_direct() {
        let w = ring(11);
        let fam = LatentFamily::new(&w, LaplacianKind::Unnormalized, 1.0, None, 0.8).unwrap();
        let a = fam.precision(&[], 1.7).unwrap();
        let b = PriorPrecision::spectral(&fam.model(&[], 1.7).unwrap()).unwrap();
        assert!((a.logdet() - b.logdet()).abs() < 1e-9);
        let u: Vec<f64> = (0..11).map(|i| i as f64 * 0.1 - 0.4).collect();
        assert!((a.quad(&u) - b.quad(&u)).abs() < 1e-9);
    }

    #[test]
    fn cov_columns_are_inverse_columns() {
        let fam = family(9, HyperTarget::Tau);
        let model = fam.model(&[0.1, 0.2, -0.3, 0.0], 2.0).unwrap();
        let p = PriorPrecision::new(&model).unwrap();
        let c = p.cov_columns(&[2, 5]);
        let q = model.precision().unwrap();
        let r = q.matvec(c.col_as_slice(1));
        for (i, v) in r.iter().enumerate() {
            assert!((v - if i == 5 { 1.0 } else { 0.0 }).abs() < 1e-9);
        }
    }
}
