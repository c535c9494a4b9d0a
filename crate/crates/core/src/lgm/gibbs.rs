//! Metropolis-within-Gibbs sampling of (u, θ) for Gaussian observations.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::matern::standard_normals;
use crate::spectral::CholeskyFactor;

use super::dense::{dot, DenseChol};
use super::prior::{LatentFamily, PriorPrecision};
use super::{theta_log_prior, GaussianObs};

/// Draw from u | y, θ. With the sparse backend the system
/// (Q + σ⁻²SᵀS) u = σ⁻²Sᵀy + σ⁻¹Sᵀξ₁ + η, Cov(η) = Q, is solved; `previous`
/// supplies a symbolic analysis of Q + σ⁻²SᵀS. The spectral backend uses
/// pathwise conditioning of a prior draw.
pub fn conditional_gaussian_sample<R: Rng + ?Sized>(
    prior: &PriorPrecision,
    obs: &GaussianObs,
    previous: Option<&CholeskyFactor>,
    rng: &mut R,
) -> Result<(Vec<f64>, Option<CholeskyFactor>)> {
    let n = prior.n();
    let s2 = obs.sigma * obs.sigma;
    match prior {
        PriorPrecision::Sparse { b, factor, s, d } => {
            // η = D⁻¹ B^p ζ with ζ = ξ₂ (s = 2p) or ζ = R_Bᵀ ξ₂ (s = 2p + 1)
            let xi2 = standard_normals(rng, n);
            let mut eta = if s % 2 == 1 { factor.mul_rt(&xi2) } else { xi2 };
            for _ in 0..s / 2 {
                eta = b.matvec(&eta);
            }
            let mut rhs: Vec<f64> = eta.iter().zip(d).map(|(a, b)| a / b).collect();
            let xi1 = standard_normals(rng, obs.len());
            let mut e = vec![0.0; n];
            for ((&i, &y), x) in obs.indices.iter().zip(&obs.y).zip(&xi1) {
                rhs[i] += y / s2 + x / obs.sigma;
                e[i] = 1.0 / s2;
            }
            let qt = prior.matrix().expect("sparse backend").add_diagonal(&e);
            let f = match previous {
                Some(p) => p.refactor(&qt)?,
                None => CholeskyFactor::new(&qt)?,
            };
            Ok((f.solve(&rhs), Some(f)))
        }
        PriorPrecision::Spectral { .. } => {
            let u0 = prior.sample(rng);
            if obs.is_empty() {
                return Ok((u0, None));
            }
            let g = prior.cov_columns(&obs.indices);
            let jn = obs.len();
            let c = faer::Mat::from_fn(jn, jn, |a, b| g[(obs.indices[a], b)] + if a == b { s2 } else { 0.0 });
            let c = DenseChol::new(&c)?;
            let eps = standard_normals(rng, jn);
            let r: Vec<f64> = (0..jn).map(|a| obs.y[a] - u0[obs.indices[a]] - obs.sigma * eps[a]).collect();
            let alpha = c.solve(&r);
            let u = (0..n).map(|i| u0[i] + (0..jn).map(|a| g[(i, a)] * alpha[a]).sum::<f64>()).collect();
            Ok((u, None))
        }
    }
}

/// log π(θ | u) up to a constant: ½ log det Q(θ) - ½ uᵀQ(θ)u - ½|θ|².
pub fn log_post_theta(family: &LatentFamily, s: f64, theta: &[f64], u: &[f64]) -> Result<f64> {
    ThetaPosterior::new(family, s).log_post(theta, u).map(|(v, _)| v)
}

/// Evaluates log π(θ | u), keeping the last factor of B for symbolic reuse.
#[derive(Debug, Clone)]
pub struct ThetaPosterior<'a> {
    family: &'a LatentFamily,
    s: f64,
    last: Option<CholeskyFactor>,
}

impl<'a> ThetaPosterior<'a> {
    pub fn new(family: &'a LatentFamily, s: f64) -> Self {
        ThetaPosterior { family, s, last: None }
    }

    /// The log density and the prior precision at θ.
    pub fn log_post(&mut self, theta: &[f64], u: &[f64]) -> Result<(f64, PriorPrecision)> {
        let model = self.family.model(theta, self.s)?;
        let prior = if model.integer_s().is_ok() {
            let p = PriorPrecision::sparse(&model, self.last.as_ref())?;
            self.last = p.factor().cloned();
            p
        } else {
            PriorPrecision::spectral(&model)?
        };
        let v = 0.5 * prior.logdet() - 0.5 * prior.quad(u) - 0.5 * dot(theta, theta);
        Ok((v, prior))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsOptions {
    pub steps: usize,
    /// Random-walk step for each coordinate of θ.
    pub beta: f64,
    /// Keep every `thin`-th u sample.
    pub thin: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions { steps: 1000, beta: 0.5, thin: 1 }
    }
}

/// Samples of the chain. θ is kept at every step, u every `thin` steps.
#[derive(Debug, Clone, Default)]
pub struct GibbsChain {
    pub theta: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub u_steps: Vec<usize>,
    pub proposed: usize,
    pub accepted: usize,
    /// Set when a numerical failure stopped the chain; the samples up to that point are kept.
    pub aborted: Option<String>,
}

impl GibbsChain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Mean of u over steps ≥ burn_in.
    pub fn mean_u(&self, burn_in: usize) -> Option<Vec<f64>> {
        let kept: Vec<&Vec<f64>> =
            self.u.iter().zip(&self.u_steps).filter(|(_, &k)| k >= burn_in).map(|(u, _)| u).collect();
        mean_of(&kept)
    }

    /// Mean of θ over steps ≥ burn_in.
    pub fn mean_theta(&self, burn_in: usize) -> Option<Vec<f64>> {
        let kept: Vec<&Vec<f64>> = self.theta.iter().skip(burn_in).collect();
        mean_of(&kept)
    }

    /// Posterior mean of the hyperparameter field exp(KL(θ)) over steps ≥ burn_in.
    pub fn mean_field(&self, family: &LatentFamily, burn_in: usize) -> Result<Option<Vec<f64>>> {
        let Some(h) = family.hyper() else { return Ok(None) };
        let fields = self.theta.iter().skip(burn_in).map(|t| h.field(t)).collect::<Result<Vec<_>>>()?;
        Ok(mean_of(&fields.iter().collect::<Vec<_>>()))
    }
}

fn mean_of(v: &[&Vec<f64>]) -> Option<Vec<f64>> {
    let first = v.first()?;
    let mut m = vec![0.0; first.len()];
    for x in v {
        m.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b);
    }
    let k = v.len() as f64;
    Some(m.into_iter().map(|a| a / k).collect())
}

/// Alternates u ~ π(u | θ, y) with one coordinatewise random-walk Metropolis
/// sweep over θ targeting π(θ | u).
pub fn gibbs_chain<R: Rng + ?Sized>(
    family: &LatentFamily,
    s: f64,
    obs: &GaussianObs,
    theta0: &[f64],
    opts: GibbsOptions,
    rng: &mut R,
) -> Result<GibbsChain> {
    if theta0.len() != family.n_theta() {
        return invalid(format!("theta0 has length {}, expected {}", theta0.len(), family.n_theta()));
    }
    if !(opts.beta >= 0.0) || opts.thin == 0 {
        return invalid("beta must be non-negative and thin positive");
    }
    debug_assert!(theta_log_prior(theta0).is_finite());
    let mut post = ThetaPosterior::new(family, s);
    let mut theta = theta0.to_vec();
    let mut chain = GibbsChain::default();
    let zeros = vec![0.0; family.n()];
    let (_, mut prior) = post.log_post(&theta, &zeros)?;
    let mut qt: Option<CholeskyFactor> = None;
    for step in 0..opts.steps {
        let u = match conditional_gaussian_sample(&prior, obs, qt.as_ref(), rng) {
            Ok((u, f)) => {
                if f.is_some() {
                    qt = f;
                }
                u
            }
            Err(e) => {
                chain.aborted = Some(format!("step {step}: {e}"));
                return Ok(chain);
            }
        };
        let mut current = 0.5 * prior.logdet() - 0.5 * prior.quad(&u) - 0.5 * dot(&theta, &theta);
        for j in 0..theta.len() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let mut prop = theta.clone();
            prop[j] += opts.beta * z;
            chain.proposed += 1;
            let cand = post.log_post(&prop, &u).ok().filter(|(v, _)| v.is_finite());
            let log_u: f64 = rng.random::<f64>().ln();
            if let Some((v, p)) = cand {
                if log_u < v - current {
                    theta = prop;
                    current = v;
                    prior = p;
                    chain.accepted += 1;
                }
            }
        }
        chain.theta.push(theta.clone());
        if step % opts.thin == 0 {
            chain.u.push(u);
            chain.u_steps.push(step);
        }
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LaplacianKind;
    use crate::lgm::{HyperKL, HyperTarget};
    use crate::sparse::SparseSymmetric;
    use crate::spectral::{eigs_smallest, EigenOptions, Normalization};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family(n: usize, n0: usize) -> LatentFamily {
        let t: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 4.0)).collect();
        let w = SparseSymmetric::from_triplets(n, &t).unwrap();
        let lap = crate::graph::Laplacian::new(&w, LaplacianKind::Unnormalized).unwrap();
        let basis =
            eigs_smallest(lap.symmetric_matrix().unwrap(), n0, Normalization::EmpiricalL2, EigenOptions::default())
                .unwrap();
        let h = HyperKL::new(&basis, 1.0, 1.0, n0, 1.0, HyperTarget::Tau).unwrap();
        LatentFamily::new(&w, LaplacianKind::Unnormalized, 1.0, Some(h), 1.0).unwrap()
    }

    #[test]
    fn conditional_sample_moments_match_posterior() {
        let fam = family(8, 2);
        let model = fam.model(&[0.2, -0.1], 2.0).unwrap();
        let obs = GaussianObs::new(vec![1, 5], vec![0.7, -0.4], 0.3, 8).unwrap();
        let post = crate::lgm::GaussianPosterior::new(&PriorPrecision::new(&model).unwrap(), &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for prior in [PriorPrecision::sparse(&model, None).unwrap(), PriorPrecision::spectral(&model).unwrap()] {
            let k = 20000;
            let mut mean = [0.0; 8];
            let mut sq = [0.0; 8];
            for _ in 0..k {
                let (u, _) = conditional_gaussian_sample(&prior, &obs, None, &mut rng).unwrap();
                for i in 0..8 {
                    mean[i] += u[i] / k as f64;
                    sq[i] += u[i] * u[i] / k as f64;
                }
            }
            let var = post.variances(&(0..8).collect::<Vec<_>>());
            for i in 0..8 {
                let sd = var[i].sqrt();
                assert!((mean[i] - post.mean()[i]).abs() < 5.0 * sd / (k as f64).sqrt(), "node {i}");
                let v = sq[i] - mean[i] * mean[i];
                assert!((v / var[i] - 1.0).abs() < 0.05, "node {i}: {v} vs {}", var[i]);
            }
        }
    }

    #[test]
    fn zero_step_accepts_everything_and_keeps_theta() {
        let fam = family(10, 3);
        let obs = GaussianObs::new(vec![0, 4], vec![1.0, 0.0], 0.5, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = GibbsOptions { steps: 20, beta: 0.0, thin: 1 };
        let c = gibbs_chain(&fam, 2.0, &obs, &[0.1, 0.2, 0.3], opts, &mut rng).unwrap();
        assert_eq!(c.accepted, c.proposed);
        assert!(c.theta.iter().all(|t| t == &vec![0.1, 0.2, 0.3]));
    }

    #[test]
    fn no_observations_recovers_theta_prior() {
        let fam = family(10, 1);
        let obs = GaussianObs::new(vec![], vec![], 1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = GibbsOptions { steps: 20000, beta: 1.5, thin: 1000 };
        let c = gibbs_chain(&fam, 1.0, &obs, &[0.0], opts, &mut rng).unwrap();
        let x: Vec<f64> = c.theta.iter().map(|t| t[0]).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(m.abs() < 0.1, "mean {m}");
        assert!((v - 1.0).abs() < 0.15, "var {v}");
    }

    #[test]
    fn log_post_matches_dense() {
        let fam = family(7, 2);
        let theta = [0.3, 0.4];
        let u: Vec<f64> = (0..7).map(|i| (i as f64).cos()).collect();
        let q = fam.model(&theta, 2.0).unwrap().precision().unwrap();
        let dc = DenseChol::new(&q.to_dense()).unwrap();
        let expect = 0.5 * dc.logdet() - 0.5 * q.quad_form(&u) - 0.5 * dot(&theta, &theta);
        let got = log_post_theta(&fam, 2.0, &theta, &u).unwrap();
        assert!((got - expect).abs() < 1e-9);
    }
}
