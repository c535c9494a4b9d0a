//! Evidence maximization over (log σ, log s, θ) and the resulting fits.

use crate::error::{invalid, Result};

use super::gaussian::GaussianPosterior;
use super::optimize::{maximize, NelderMeadOptions};
use super::prior::{LatentFamily, PriorPrecision};
use super::probit::probit_mode_newton;
use super::{theta_log_prior, GaussianObs, LogNormalPrior, ProbitObs};

/// Box bounds in log space: σ in [1e-4, 1e2], s in [0.5, 8], θ_i in [-10, 10].
const LOG_SIGMA_BOUNDS: (f64, f64) = (-9.210340371976182, 4.605170185988092);
const LOG_S_BOUNDS: (f64, f64) = (-std::f64::consts::LN_2, 2.0794415416798357);
const THETA_BOUND: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum Likelihood {
    Gaussian(GaussianObs),
    Probit(ProbitObs),
}

impl Likelihood {
    fn sigma(&self) -> f64 {
        match self {
            Likelihood::Gaussian(o) => o.sigma,
            Likelihood::Probit(o) => o.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Fixed(f64),
    /// Optimized with a normal prior on log s, starting from `init`.
    Inferred {
        prior: LogNormalPrior,
        init: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceConfig {
    pub sigma_prior: LogNormalPrior,
    /// Optimize σ starting from the likelihood's σ; otherwise keep it fixed.
    pub infer_sigma: bool,
    pub smoothness: Smoothness,
    pub optimizer: NelderMeadOptions,
    /// Compute posterior marginal variances at every node (one solve per node).
    pub variances: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Chain,
    EvidenceMax,
}

#[derive(Debug, Clone)]
pub struct LgmFit {
    pub mode: FitMode,
    pub sigma: f64,
    pub s: f64,
    pub theta: Vec<f64>,
    /// Posterior mean (Gaussian) or mode (probit) at every node.
    pub mean: Vec<f64>,
    /// Marginal variances at every node; empty when not requested.
    pub variances: Vec<f64>,
    /// Log hyperparameter posterior at the optimum (up to a constant).
    pub log_posterior: f64,
    pub trace: Vec<f64>,
    pub evals: usize,
    pub converged: bool,
}

struct Layout {
    sigma: bool,
    n_theta: usize,
}

impl Layout {
    fn unpack<'a>(&self, x: &'a [f64], cfg: &EvidenceConfig, sigma0: f64) -> (f64, f64, &'a [f64]) {
        let mut k = 0;
        let sigma = if self.sigma {
            k += 1;
            x[0].exp()
        } else {
            sigma0
        };
        let s = match cfg.smoothness {
            Smoothness::Fixed(s) => s,
            Smoothness::Inferred { .. } => {
                k += 1;
                x[k - 1].exp()
            }
        };
        (sigma, s, &x[k..k + self.n_theta])
    }
}

/// Log hyperparameter posterior log π(σ, s, θ | y) up to a constant.
pub fn log_hyper_posterior(
    family: &LatentFamily,
    lik: &Likelihood,
    cfg: &EvidenceConfig,
    sigma: f64,
    s: f64,
    theta: &[f64],
) -> Result<f64> {
    let mut lp = theta_log_prior(theta);
    if cfg.infer_sigma {
        lp += cfg.sigma_prior.log_density(sigma.ln());
    }
    if let Smoothness::Inferred { prior, .. } = cfg.smoothness {
        lp += prior.log_density(s.ln());
    }
    let prior = family.precision(theta, s)?;
    lp += data_term(&prior, lik, sigma)?;
    Ok(lp)
}

fn data_term(prior: &PriorPrecision, lik: &Likelihood, sigma: f64) -> Result<f64> {
    match lik {
        Likelihood::Gaussian(o) => Ok(GaussianPosterior::new(prior, &o.with_sigma(sigma))?.log_evidence()),
        Likelihood::Probit(o) => Ok(probit_mode_newton(prior, &o.with_sigma(sigma))?.log_evidence),
    }
}

/// Maximizes the log hyperparameter posterior from (σ of `lik`, s init, θ = theta0)
/// and returns the posterior summary at the optimum.
pub fn fit_evidence(family: &LatentFamily, lik: &Likelihood, cfg: &EvidenceConfig, theta0: &[f64]) -> Result<LgmFit> {
    let n_theta = family.n_theta();
    if theta0.len() != n_theta {
        return invalid(format!("theta0 has length {}, expected {n_theta}", theta0.len()));
    }
    let layout = Layout { sigma: cfg.infer_sigma, n_theta };
    let sigma0 = lik.sigma();
    let mut x0 = Vec::new();
    let mut bounds = Vec::new();
    if layout.sigma {
        x0.push(sigma0.ln());
        bounds.push(LOG_SIGMA_BOUNDS);
    }
    if let Smoothness::Inferred { init, .. } = cfg.smoothness {
        x0.push(init.ln());
        bounds.push(LOG_S_BOUNDS);
    }
    x0.extend_from_slice(theta0);
    bounds.extend(std::iter::repeat_n((-THETA_BOUND, THETA_BOUND), n_theta));

    let objective = |x: &[f64]| {
        let (sigma, s, theta) = layout.unpack(x, cfg, sigma0);
        log_hyper_posterior(family, lik, cfg, sigma, s, theta).unwrap_or(f64::NEG_INFINITY)
    };
    let (x, value, trace, evals, converged) = if x0.is_empty() {
        let v = objective(&x0);
        if !v.is_finite() {
            return invalid("objective is not finite at the initial point");
        }
        (x0, v, vec![v], 1, true)
    } else {
        let r = maximize(objective, &x0, Some(&bounds), cfg.optimizer)?;
        (r.x, r.value, r.trace, r.evals, r.converged)
    };
    let (sigma, s, theta) = layout.unpack(&x, cfg, sigma0);
    let prior = family.precision(theta, s)?;
    let all: Vec<usize> = (0..family.n()).collect();
    let (mean, variances) = match lik {
        Likelihood::Gaussian(o) => {
            let post = GaussianPosterior::new(&prior, &o.with_sigma(sigma))?;
            let v = if cfg.variances { post.variances(&all) } else { vec![] };
            (post.mean().to_vec(), v)
        }
        Likelihood::Probit(o) => {
            let o = o.with_sigma(sigma);
            let mode = probit_mode_newton(&prior, &o)?;
            let v = if cfg.variances { laplace_variances(&prior, &o, &mode.u)? } else { vec![] };
            (mode.u, v)
        }
    };
    Ok(LgmFit {
        mode: FitMode::EvidenceMax,
        sigma,
        s,
        theta: theta.to_vec(),
        mean,
        variances,
        log_posterior: value,
        trace,
        evals,
        converged,
    })
}

/// diag((Q + SᵀHS)⁻¹) = diag(Q⁻¹) - rows of G (H⁻¹ + K)⁻¹ Gᵀ, G = Q⁻¹Sᵀ.
fn laplace_variances(prior: &PriorPrecision, obs: &ProbitObs, u: &[f64]) -> Result<Vec<f64>> {
    use super::dense::DenseChol;
    use crate::special::inv_mills;
    let n = prior.n();
    let jn = obs.len();
    let g = prior.cov_columns(&obs.indices);
    let mut diag = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = 1.0;
        diag[i] = prior.solve(&e)[i];
        e[i] = 0.0;
    }
    if jn == 0 {
        return Ok(diag);
    }
    let h: Vec<f64> = obs
        .indices
        .iter()
        .zip(&obs.labels)
        .map(|(&i, y)| {
            let z = y * u[i] / obs.sigma;
            let r = inv_mills(z);
            r * (z + r) / (obs.sigma * obs.sigma)
        })
        .collect();
    let m = faer::Mat::from_fn(jn, jn, |a, b| g[(obs.indices[a], b)] + if a == b { 1.0 / h[a] } else { 0.0 });
    let c = DenseChol::new(&m)?;
    for (i, d) in diag.iter_mut().enumerate() {
        let row: Vec<f64> = (0..jn).map(|a| g[(i, a)]).collect();
        let t = c.forward(&row);
        *d = (*d - t.iter().map(|x| x * x).sum::<f64>()).max(0.0);
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LaplacianKind;
    use crate::sparse::SparseSymmetric;

    fn family() -> LatentFamily {
        let n = 30;
        let t: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 3.0)).collect();
        let w = SparseSymmetric::from_triplets(n, &t).unwrap();
        LatentFamily::new(&w, LaplacianKind::Unnormalized, 1.0, None, 1.0).unwrap()
    }

    #[test]
    fn sigma_fit_improves_posterior_and_variances_are_nonnegative() {
        let fam = family();
        let idx: Vec<usize> = (0..30).step_by(2).collect();
        let y: Vec<f64> = idx.iter().map(|&i| (i as f64 * 0.2).sin()).collect();
        let obs = GaussianObs::new(idx, y, 1.0, 30).unwrap();
        let cfg = EvidenceConfig {
            sigma_prior: LogNormalPrior::new(0.1, 1.0),
            infer_sigma: true,
            smoothness: Smoothness::Inferred { prior: LogNormalPrior::new(2.0, 1.0), init: 2.0 },
            optimizer: NelderMeadOptions::default(),
            variances: true,
        };
        let lik = Likelihood::Gaussian(obs);
        let start = log_hyper_posterior(&fam, &lik, &cfg, 1.0, 2.0, &[]).unwrap();
        let fit = fit_evidence(&fam, &lik, &cfg, &[]).unwrap();
        assert!(fit.log_posterior >= start);
        assert!(fit.variances.iter().all(|&v| v >= 0.0));
        assert_eq!(fit.mean.len(), 30);
    }

    #[test]
    fn probit_laplace_variances_match_dense() {
        let fam = family();
        let obs = ProbitObs::new(vec![3, 12, 20], vec![1.0, -1.0, 1.0], 0.3, 30).unwrap();
        let prior = fam.precision(&[], 2.0).unwrap();
        let mode = probit_mode_newton(&prior, &obs).unwrap();
        let v = laplace_variances(&prior, &obs, &mode.u).unwrap();
        let mut qh = prior.matrix().unwrap().to_dense();
        for (&i, y) in obs.indices.iter().zip(&obs.labels) {
            let z = y * mode.u[i] / obs.sigma;
            let r = crate::special::inv_mills(z);
            qh[(i, i)] += r * (z + r) / (obs.sigma * obs.sigma);
        }
        let c = super::super::dense::DenseChol::new(&qh).unwrap();
        for i in [0, 3, 15, 29] {
            let mut e = vec![0.0; 30];
            e[i] = 1.0;
            assert!((c.solve(&e)[i] - v[i]).abs() < 1e-9);
        }
    }
}
