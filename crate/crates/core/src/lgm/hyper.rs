//! Truncated Karhunen–Loève hyperprior for log τ or log κ, and data scaling.

use faer::Mat;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::matern::MaternModel;
use crate::spectral::{EigenBasis, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperTarget {
    Tau,
    Kappa,
}

/// log field(θ) = scale · ν^{s0/2 - m/4} Σ_{i≤n0} (ν + λ_i)^{-s0/2} θ_i ψ_i, with ψ_i
/// the leading graph-Laplacian eigenvectors in the empirical L² normalization.
#[derive(Debug, Clone)]
pub struct HyperKL {
    nu: f64,
    s0: f64,
    m: f64,
    target: HyperTarget,
    values: Vec<f64>,
    vectors: Mat<f64>,
    scale: f64,
}

impl HyperKL {
    pub fn new(basis: &EigenBasis, nu: f64, s0: f64, n0: usize, m: f64, target: HyperTarget) -> Result<Self> {
        if n0 == 0 || n0 > basis.len() {
            return invalid(format!("n0={n0} must be in 1..={}", basis.len()));
        }
        if !(nu > 0.0) || !(s0 > 0.0) {
            return invalid(format!("nu and s0 must be positive, got {nu}, {s0}"));
        }
        let b = basis.renormalized(Normalization::EmpiricalL2);
        let vectors = b.vectors.subcols(0, n0).to_owned();
        Ok(HyperKL { nu, s0, m, target, values: b.values[..n0].to_vec(), vectors, scale: 1.0 })
    }

    pub fn n0(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn target(&self) -> HyperTarget {
        self.target
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        HyperKL { scale, ..self.clone() }
    }

    /// Scaled so that the prior RMS standard deviation of the log field is |log(target)|.
    pub fn with_target(&self, target: f64) -> Result<Self> {
        Ok(self.with_scale(scale_hyper(self, target)?))
    }

    /// λ_{n0}, the default scale target.
    pub fn default_target(&self) -> f64 {
        self.values[self.n0() - 1]
    }

    fn unscaled_coefficients(&self) -> Vec<f64> {
        let pre = self.nu.powf(self.s0 / 2.0 - self.m / 4.0);
        self.values.iter().map(|l| pre * (self.nu + l).powf(-self.s0 / 2.0)).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.unscaled_coefficients().iter().map(|c| c * self.scale).collect()
    }

    pub fn log_field(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n0() {
            return invalid(format!("theta has length {}, expected {}", theta.len(), self.n0()));
        }
        let c = self.coefficients();
        let mut out = vec![0.0; self.n()];
        for (i, (&ci, &ti)) in c.iter().zip(theta).enumerate() {
            let w = ci * ti;
            out.iter_mut().zip(self.vectors.col_as_slice(i)).for_each(|(o, v)| *o += w * v);
        }
        Ok(out)
    }

    /// exp of the log field: τ(θ) or κ(θ).
    pub fn field(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_field(theta)?.into_iter().map(f64::exp).collect())
    }

    fn rms_std(&self, coeffs: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            acc += c * c * self.vectors.col_as_slice(i).iter().map(|v| v * v).sum::<f64>();
        }
        (acc / n as f64).sqrt()
    }

    /// Prior standard deviation of the log field, root-mean-square over nodes.
    pub fn prior_log_std(&self) -> f64 {
        self.rms_std(&self.coefficients())
    }
}

/// Factor on the KL prefactor making the prior RMS std of the log field equal |log(target)|.
pub fn scale_hyper(h: &HyperKL, target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) || target == 1.0 {
        return invalid(format!("scale target must be positive and different from 1, got {target}"));
    }
    let base = h.rms_std(&h.unscaled_coefficients());
    if !(base > 0.0) {
        return invalid("hyperprior has zero variance");
    }
    Ok(target.ln().abs() / base)
}

/// Centered and rescaled observations, with the map back to data units.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedObs {
    pub y: Vec<f64>,
    pub mean: f64,
    pub factor: f64,
}

impl NormalizedObs {
    pub fn to_data(&self, v: f64) -> f64 {
        v / self.factor + self.mean
    }

    pub fn var_to_data(&self, v: f64) -> f64 {
        v / (self.factor * self.factor)
    }
}

/// Centers y and scales it so that its mean square per entry equals the prior
/// mean square per node, E|u|²/n, estimated from `draws` prior samples of `model`
/// (which should have τ ≡ 1).
pub fn normalize_observations<R: Rng + ?Sized>(
    y: &[f64],
    model: &MaternModel,
    draws: usize,
    rng: &mut R,
) -> Result<NormalizedObs> {
    if y.is_empty() || draws == 0 {
        return invalid("need at least one observation and one draw");
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ysq = centered.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    if !(ysq > 0.0) {
        return invalid("observations are constant");
    }
    let eu2 = prior_mean_square(model, draws, rng)?;
    let factor = (eu2 / ysq).sqrt();
    Ok(NormalizedObs { y: centered.iter().map(|v| v * factor).collect(), mean, factor })
}

/// Monte-Carlo estimate of E|u|²/n.
pub(crate) fn prior_mean_square<R: Rng + ?Sized>(model: &MaternModel, draws: usize, rng: &mut R) -> Result<f64> {
    let n = model.n() as f64;
    let mut acc = 0.0;
    if model.integer_s().is_ok() {
        let sampler = model.cholesky_sampler()?;
        for _ in 0..draws {
            acc += sampler.draw(rng).iter().map(|v| v * v).sum::<f64>();
        }
    } else {
        let basis = model.eigenbasis()?;
        for _ in 0..draws {
            acc += model.sample_spectral(&basis, None, rng)?.iter().map(|v| v * v).sum::<f64>();
        }
    }
    Ok(acc / draws as f64 / n)
}
