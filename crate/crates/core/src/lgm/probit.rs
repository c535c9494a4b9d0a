//! Probit likelihood: Newton mode search and Laplace evidence.

use faer::Mat;

use crate::error::{Error, Result};
use crate::special::{inv_mills, norm_log_cdf};

use super::dense::{dot, DenseChol};
use super::prior::PriorPrecision;
use super::ProbitObs;

const MAX_NEWTON: usize = 100;
const NEWTON_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

/// Mode u* of π(u | y) ∝ exp(Σ log Φ(y_j u_j / σ) - ½ uᵀQu) and its Laplace quantities.
#[derive(Debug, Clone)]
pub struct ProbitMode {
    pub u: Vec<f64>,
    /// a with u*_J = K a, K = [Q⁻¹]_JJ.
    pub a: Vec<f64>,
    pub iterations: usize,
    /// Objective after each accepted Newton step (starting at u = 0).
    pub trace: Vec<f64>,
    /// Laplace log evidence, without the hyperprior.
    pub log_evidence: f64,
}

fn loglik(obs: &ProbitObs, f: &[f64]) -> f64 {
    f.iter().zip(&obs.labels).map(|(fi, y)| norm_log_cdf(y * fi / obs.sigma)).sum()
}

/// First derivative and negative second derivative of log Φ(y f / σ) in f.
fn derivs(obs: &ProbitObs, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = obs.sigma;
    f.iter()
        .zip(&obs.labels)
        .map(|(fi, y)| {
            let z = y * fi / s;
            let r = inv_mills(z);
            (y * r / s, r * (z + r) / (s * s))
        })
        .unzip()
}

/// Σ log Φ(y_j u_j / σ) - ½ uᵀQu.
pub fn probit_objective(prior: &PriorPrecision, obs: &ProbitObs, u: &[f64]) -> f64 {
    let f: Vec<f64> = obs.indices.iter().map(|&i| u[i]).collect();
    loglik(obs, &f) - 0.5 * prior.quad(u)
}

/// Gradient Sᵀ∇loglik - Qu.
pub fn probit_gradient(prior: &PriorPrecision, obs: &ProbitObs, u: &[f64]) -> Vec<f64> {
    let f: Vec<f64> = obs.indices.iter().map(|&i| u[i]).collect();
    let (g, _) = derivs(obs, &f);
    let mut out: Vec<f64> = prior.matvec(u).iter().map(|v| -v).collect();
    for (&i, gi) in obs.indices.iter().zip(g) {
        out[i] += gi;
    }
    out
}

/// Newton's method in the J-dimensional form with a backtracking line search on a.
pub fn probit_mode_newton(prior: &PriorPrecision, obs: &ProbitObs) -> Result<ProbitMode> {
    let n = prior.n();
    let jn = obs.len();
    if jn == 0 {
        return Ok(ProbitMode { u: vec![0.0; n], a: vec![], iterations: 0, trace: vec![0.0], log_evidence: 0.0 });
    }
    let g_cols = prior.cov_columns(&obs.indices);
    let k = Mat::from_fn(jn, jn, |r, c| 0.5 * (g_cols[(obs.indices[r], c)] + g_cols[(obs.indices[c], r)]));
    let kmul = |a: &[f64]| -> Vec<f64> { (0..jn).map(|r| (0..jn).map(|c| k[(r, c)] * a[c]).sum()).collect() };
    let psi = |a: &[f64], f: &[f64]| -0.5 * dot(a, f) + loglik(obs, f);

    let mut a = vec![0.0; jn];
    let mut f = vec![0.0; jn];
    let mut cur = psi(&a, &f);
    let mut trace = vec![cur];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_NEWTON {
        let (g, w) = derivs(obs, &f);
        if g.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < NEWTON_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let bm = Mat::from_fn(jn, jn, |r, c| sw[r] * k[(r, c)] * sw[c] + if r == c { 1.0 } else { 0.0 });
        let lb = DenseChol::new(&bm)?;
        let b: Vec<f64> = (0..jn).map(|i| w[i] * f[i] + g[i]).collect();
        let kb = kmul(&b);
        let t = lb.solve(&(0..jn).map(|i| sw[i] * kb[i]).collect::<Vec<_>>());
        let a_new: Vec<f64> = (0..jn).map(|i| b[i] - sw[i] * t[i]).collect();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let a_t: Vec<f64> = a.iter().zip(&a_new).map(|(x, y)| x + step * (y - x)).collect();
            let f_t = kmul(&a_t);
            let v = psi(&a_t, &f_t);
            if v >= cur {
                a = a_t;
                f = f_t;
                cur = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no ascent possible at working precision
            converged = true;
            break;
        }
        trace.push(cur);
    }
    if !converged {
        return Err(Error::Solver(format!("probit Newton did not converge in {MAX_NEWTON} iterations")));
    }
    let (_, w) = derivs(obs, &f);
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let bm = Mat::from_fn(jn, jn, |r, c| sw[r] * k[(r, c)] * sw[c] + if r == c { 1.0 } else { 0.0 });
    let log_evidence = cur - 0.5 * DenseChol::new(&bm)?.logdet();
    let u = (0..n).map(|i| (0..jn).map(|c| g_cols[(i, c)] * a[c]).sum()).collect();
    Ok(ProbitMode { u, a, iterations, trace, log_evidence })
}

/// Laplace approximation of log p(y | hyperparameters), without the hyperprior.
pub fn probit_laplace_evidence(prior: &PriorPrecision, obs: &ProbitObs) -> Result<f64> {
    Ok(probit_mode_newton(prior, obs)?.log_evidence)
}

/// Labels sign(u), with 0 mapped to +1.
pub fn classify(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()
}
