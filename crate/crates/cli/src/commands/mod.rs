pub mod classify;
pub mod converge;
pub mod invert;
pub mod krige;
pub mod sample;

use graph_matern::experiments::HyperSettings;
use graph_matern::lgm::{HyperTarget, Smoothness};

use crate::config::{LogNormal, ScaleSpec, Variant};
use crate::error::Result;

/// Hyperprior and smoothness for one model variant. Stationary variants keep a
/// single KL mode but share the scale target of the nonstationary ones.
pub fn variant_model(
    v: Variant,
    nu: f64,
    s0: f64,
    n0: usize,
    scale: &ScaleSpec,
    s_fixed: f64,
    s_prior: LogNormal,
) -> Result<(HyperSettings, Smoothness)> {
    let hyper = HyperSettings {
        nu,
        s0,
        n0: if v.stationary() { 1 } else { n0 },
        target: HyperTarget::Tau,
        scale: scale.resolve(n0)?,
    };
    let smoothness = if v.inferred() {
        Smoothness::Inferred { prior: s_prior.prior("s_prior")?, init: s_prior.median }
    } else {
        Smoothness::Fixed(s_fixed)
    };
    Ok((hyper, smoothness))
}

/// Mean and sample standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}
