//! Conjugate Gaussian likelihood: evidence and posterior.

use faer::Mat;

use crate::error::Result;
use crate::spectral::CholeskyFactor;

use super::dense::{dot, DenseChol};
use super::prior::PriorPrecision;
use super::GaussianObs;

#[derive(Debug, Clone)]
enum Backend {
    /// Factor of the posterior precision Q̃ = Q + σ⁻² SᵀS.
    Sparse(CholeskyFactor),
    /// Prior covariance columns at the observed nodes, G = Q⁻¹Sᵀ, and a factor of C = SG + σ²I.
    Spectral { prior: PriorPrecision, g: Mat<f64>, c: DenseChol, indices: Vec<usize> },
}

/// u | y for y = S u + N(0, σ² I), u ~ N(0, Q⁻¹).
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    mean: Vec<f64>,
    log_evidence: f64,
    backend: Backend,
}

impl GaussianPosterior {
    pub fn new(prior: &PriorPrecision, obs: &GaussianObs) -> Result<Self> {
        Self::reusing(prior, obs, None)
    }

    /// As `new`, reusing the symbolic analysis of an earlier posterior on the same graph.
    pub fn reusing(prior: &PriorPrecision, obs: &GaussianObs, previous: Option<&GaussianPosterior>) -> Result<Self> {
        let n = prior.n();
        let s2 = obs.sigma * obs.sigma;
        match prior.matrix() {
            Some(q) => {
                let mut e = vec![0.0; n];
                let mut b = vec![0.0; n];
                for (&i, &y) in obs.indices.iter().zip(&obs.y) {
                    e[i] = 1.0 / s2;
                    b[i] = y;
                }
                let qt = q.add_diagonal(&e);
                let factor = match previous.map(|p| &p.backend) {
                    Some(Backend::Sparse(f)) => f.refactor(&qt)?,
                    _ => CholeskyFactor::new(&qt)?,
                };
                let t = factor.solve(&b);
                let j = obs.len() as f64;
                let log_evidence = -j * obs.sigma.ln() - dot(&obs.y, &obs.y) / (2.0 * s2)
                    + dot(&b, &t) / (2.0 * s2 * s2)
                    + 0.5 * (prior.logdet() - factor.logdet());
                let mean = t.iter().map(|v| v / s2).collect();
                Ok(GaussianPosterior { mean, log_evidence, backend: Backend::Sparse(factor) })
            }
            None => {
                let g = prior.cov_columns(&obs.indices);
                let jn = obs.len();
                let cm = Mat::from_fn(jn, jn, |a, b| g[(obs.indices[a], b)] + if a == b { s2 } else { 0.0 });
                let c = DenseChol::new(&cm)?;
                let alpha = c.solve(&obs.y);
                let log_evidence = -0.5 * dot(&obs.y, &alpha) - 0.5 * c.logdet();
                let mean = (0..n).map(|i| (0..jn).map(|a| g[(i, a)] * alpha[a]).sum()).collect();
                Ok(GaussianPosterior {
                    mean,
                    log_evidence,
                    backend: Backend::Spectral { prior: prior.clone(), g, c, indices: obs.indices.clone() },
                })
            }
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// log p(y | hyperparameters) without the -J/2 log 2π constant.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Posterior covariance restricted to `nodes`.
    pub fn cov_block(&self, nodes: &[usize]) -> Mat<f64> {
        let t = nodes.len();
        match &self.backend {
            Backend::Sparse(f) => {
                let n = f.n();
                let mut out = Mat::zeros(t, t);
                let mut e = vec![0.0; n];
                for (c, &j) in nodes.iter().enumerate() {
                    e[j] = 1.0;
                    let col = f.solve(&e);
                    e[j] = 0.0;
                    for (r, &i) in nodes.iter().enumerate() {
                        out[(r, c)] = col[i];
                    }
                }
                symmetrize(&mut out);
                out
            }
            Backend::Spectral { prior, g, c, indices } => {
                let k = prior.cov_columns(nodes);
                let jn = indices.len();
                let h: Vec<Vec<f64>> =
                    nodes.iter().map(|&i| c.forward(&(0..jn).map(|a| g[(i, a)]).collect::<Vec<_>>())).collect();
                let mut out = Mat::from_fn(t, t, |r, cc| k[(nodes[r], cc)] - dot(&h[r], &h[cc]));
                symmetrize(&mut out);
                out
            }
        }
    }

    /// Posterior marginal variances at `nodes`.
    pub fn variances(&self, nodes: &[usize]) -> Vec<f64> {
        match &self.backend {
            Backend::Sparse(f) => {
                let mut e = vec![0.0; f.n()];
                nodes
                    .iter()
                    .map(|&j| {
                        e[j] = 1.0;
                        let v = f.solve(&e)[j];
                        e[j] = 0.0;
                        v
                    })
                    .collect()
            }
            Backend::Spectral { .. } => nodes.iter().map(|&j| self.cov_block(&[j])[(0, 0)]).collect(),
        }
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// log p(y | hyperparameters) for the Gaussian likelihood, without the -J/2 log 2π constant.
pub fn log_marginal_gaussian(prior: &PriorPrecision, obs: &GaussianObs) -> Result<f64> {
    Ok(GaussianPosterior::new(prior, obs)?.log_evidence())
}

/// Posterior mean at every node and marginal variances at `nodes`; the variances
/// cost one solve per requested node.
pub fn predictive_gaussian(prior: &PriorPrecision, obs: &GaussianObs, nodes: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let post = GaussianPosterior::new(prior, obs)?;
    Ok((post.mean().to_vec(), post.variances(nodes)))
}
