//! Latent Gaussian models built on graph Matérn priors.
//!
//! y | u ~ likelihood, u | θ, s ~ N(0, Q(θ, s)⁻¹), with θ the coefficients of a
//! truncated Karhunen–Loève expansion of log τ (or log κ). Inference is either
//! Metropolis-within-Gibbs sampling or evidence maximization with Gaussian or
//! probit (Laplace-approximated) likelihoods.

mod dense;
mod evidence;
mod gaussian;
mod gibbs;
mod hyper;
mod optimize;
mod prior;
mod probit;
mod score;

pub use evidence::{fit_evidence, log_hyper_posterior, EvidenceConfig, FitMode, LgmFit, Likelihood, Smoothness};
pub use gaussian::{log_marginal_gaussian, predictive_gaussian, GaussianPosterior};
pub use gibbs::{conditional_gaussian_sample, gibbs_chain, log_post_theta, GibbsChain, GibbsOptions, ThetaPosterior};
pub use hyper::{normalize_observations, scale_hyper, HyperKL, HyperTarget, NormalizedObs};
pub use optimize::{maximize, NelderMeadOptions, OptimResult};
pub use prior::{LatentFamily, PriorPrecision};
pub use probit::{
    classify, probit_gradient, probit_laplace_evidence, probit_mode_newton, probit_objective, ProbitMode,
};
pub use score::{crps_gaussian, log_score, mean_crps, rmse};

use crate::error::{invalid, Result};

/// Gaussian observations y = S u + noise at distinct node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianObs {
    pub indices: Vec<usize>,
    pub y: Vec<f64>,
    pub sigma: f64,
}

impl GaussianObs {
    pub fn new(indices: Vec<usize>, y: Vec<f64>, sigma: f64, n: usize) -> Result<Self> {
        check_indices(&indices, n)?;
        if indices.len() != y.len() {
            return invalid(format!("{} indices but {} observations", indices.len(), y.len()));
        }
        if !(sigma > 0.0) {
            return invalid(format!("noise level must be positive, got {sigma}"));
        }
        Ok(GaussianObs { indices, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        GaussianObs { sigma, ..self.clone() }
    }
}

/// Binary labels ±1 at distinct node indices, probit link with noise σ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbitObs {
    pub indices: Vec<usize>,
    pub labels: Vec<f64>,
    pub sigma: f64,
}

impl ProbitObs {
    pub fn new(indices: Vec<usize>, labels: Vec<f64>, sigma: f64, n: usize) -> Result<Self> {
        check_indices(&indices, n)?;
        if indices.len() != labels.len() {
            return invalid(format!("{} indices but {} labels", indices.len(), labels.len()));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return invalid(format!("labels must be +1 or -1, got {l}"));
        }
        if !(sigma > 0.0) {
            return invalid(format!("noise level must be positive, got {sigma}"));
        }
        Ok(ProbitObs { indices, labels, sigma })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        ProbitObs { sigma, ..self.clone() }
    }
}

fn check_indices(indices: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return invalid(format!("observation index {i} out of range for n={n}"));
        }
        if std::mem::replace(&mut seen[i], true) {
            return invalid(format!("observation index {i} repeated"));
        }
    }
    Ok(())
}

/// Normal prior on the logarithm of a positive hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalPrior {
    pub mean_log: f64,
    pub var: f64,
}

impl LogNormalPrior {
    pub fn new(median: f64, var: f64) -> Self {
        LogNormalPrior { mean_log: median.ln(), var }
    }

    /// Log density of log x (the density is on the log scale).
    pub fn log_density(&self, log_x: f64) -> f64 {
        let d = log_x - self.mean_log;
        -0.5 * d * d / self.var - 0.5 * (2.0 * std::f64::consts::PI * self.var).ln()
    }
}

/// Standard normal log density of θ.
pub fn theta_log_prior(theta: &[f64]) -> f64 {
    -0.5 * theta.iter().map(|t| t * t).sum::<f64>() - 0.5 * theta.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}
