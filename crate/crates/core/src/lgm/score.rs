//! Predictive scores.

use faer::Mat;

use crate::error::{invalid, Result};
use crate::special::{norm_cdf, norm_pdf};

use super::dense::{dot, DenseChol};

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let s: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    (s / pred.len() as f64).sqrt()
}

/// CRPS of N(μ, sd²) at y: sd [z(2Φ(z) - 1) + 2φ(z) - 1/√π], z = (y - μ)/sd.
pub fn crps_gaussian(mu: f64, sd: f64, y: f64) -> f64 {
    if sd == 0.0 {
        return (y - mu).abs();
    }
    let z = (y - mu) / sd;
    sd * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}

pub fn mean_crps(mu: &[f64], sd: &[f64], y: &[f64]) -> f64 {
    mu.iter().zip(sd).zip(y).map(|((&m, &s), &v)| crps_gaussian(m, s, v)).sum::<f64>() / mu.len() as f64
}

/// Negative joint Gaussian log density -log N(y; μ, Σ).
pub fn log_score(mu: &[f64], cov: &Mat<f64>, y: &[f64]) -> Result<f64> {
    let k = mu.len();
    if cov.nrows() != k || cov.ncols() != k || y.len() != k {
        return invalid("log score dimensions disagree");
    }
    let c = DenseChol::new(cov)?;
    let r: Vec<f64> = y.iter().zip(mu).map(|(a, b)| a - b).collect();
    let alpha = c.solve(&r);
    Ok(0.5 * dot(&r, &alpha) + 0.5 * c.logdet() + 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln())
}
