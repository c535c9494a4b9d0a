//! Convergence studies on the circle and sphere against continuum references.

use std::io::Write;
use std::path::PathBuf;

use graph_matern::converge::{
    circle_reference, covariance_study, rate_fit, rate_table, sphere_reference, Bandwidth, RateStudy,
};
use serde::Deserialize;
use serde_json::json;

use crate::config::{derive_seed, require, Common};
use crate::error::{config_err, Result};
use crate::output::{create, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Circle,
    Sphere,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthSpec {
    /// c sqrt(log n / n)
    SqrtLog { c: f64 },
    /// c n^(-exponent)
    Power { c: f64, exponent: f64 },
}

impl BandwidthSpec {
    fn resolve(self) -> Result<Bandwidth> {
        match self {
            BandwidthSpec::SqrtLog { c } if c > 0.0 => Ok(Bandwidth::SqrtLog { c }),
            BandwidthSpec::Power { c, exponent } if c > 0.0 && exponent > 0.0 => Ok(Bandwidth::Power { c, exponent }),
            _ => config_err("bandwidth constants must be positive"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "default_surface")]
    pub manifold: Surface,
    pub ns: Vec<usize>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: BandwidthSpec,
    /// Highest frequency (circle) or degree (sphere) of the reference;
    /// defaults 30 and 10.
    pub reference_degree: Option<usize>,
    #[serde(default = "default_rate_s")]
    pub s: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_quad")]
    pub quad_points: usize,
    #[serde(default = "default_k")]
    pub k_eigenvalues: usize,
}

fn default_surface() -> Surface {
    Surface::Circle
}
fn default_bandwidth() -> BandwidthSpec {
    BandwidthSpec::SqrtLog { c: 3.0 }
}
fn default_rate_s() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    40
}
fn default_draws() -> usize {
    200
}
fn default_quad() -> usize {
    100_000
}
fn default_k() -> usize {
    11
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    #[serde(default = "default_cov_n")]
    pub n: usize,
    /// Default 1.5 n^(-1/4).
    pub h: Option<f64>,
    #[serde(default = "default_cov_s")]
    pub s: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_ell_max")]
    pub ell_max: usize,
}

fn default_cov_n() -> usize {
    2500
}
fn default_cov_s() -> f64 {
    2.0
}
fn default_truncation() -> usize {
    50
}
fn default_ell_max() -> usize {
    300
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rates: Option<RatesConfig>,
    pub covariance: Option<CovarianceConfig>,
}

impl ConvergeConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.rates.is_some() || self.covariance.is_some(), "give a [rates] or [covariance] section")?;
        if let Some(r) = &self.rates {
            require(r.ns.len() >= 2, "rates.ns needs at least two sizes")?;
            require(r.ns.windows(2).all(|w| w[0] < w[1]), "rates.ns must be strictly increasing")?;
            require(r.ns[0] >= 10, "rates.ns must start at 10 or more")?;
            require(r.s > 0.0 && r.tau > 0.0, "rates: s and tau must be positive")?;
            require(
                r.replicates >= 1 && r.draws >= 2 && r.quad_points >= 1 && r.k_eigenvalues >= 1,
                "rates: counts must be positive, draws at least 2",
            )?;
            require(r.reference_degree.is_none_or(|d| d >= 1), "rates.reference_degree must be positive")?;
            r.bandwidth.resolve()?;
        }
        if let Some(c) = &self.covariance {
            require(c.n >= 50, "covariance.n must be at least 50")?;
            require(
                c.h.is_none_or(|h| h > 0.0) && c.s > 0.0 && c.tau > 0.0,
                "covariance: h, s and tau must be positive",
            )?;
            require(c.truncation >= 1 && c.truncation <= c.n, "covariance.truncation must be in 1..=n")?;
            require(c.ell_max >= 1, "covariance.ell_max must be positive")?;
        }
        Ok(())
    }
}

pub fn run(cfg: &ConvergeConfig, common: &Common) -> Result<()> {
    cfg.validate()?;
    let mut summary = serde_json::Map::new();
    if let Some(r) = &cfg.rates {
        let reference = match r.manifold {
            Surface::Circle => circle_reference(r.reference_degree.unwrap_or(30)),
            Surface::Sphere => sphere_reference(r.reference_degree.unwrap_or(10)),
        };
        let study = RateStudy {
            ns: r.ns.clone(),
            bandwidth: r.bandwidth.resolve()?,
            s: r.s,
            tau: r.tau,
            replicates: r.replicates,
            n_draws: r.draws,
            quad_points: r.quad_points,
            k_eigenvalues: r.k_eigenvalues,
            seed: derive_seed(common.seed, 1, 0),
        };
        let table = rate_table(&reference, &study)?;
        let mut w = create(&common.out, "rates.csv")?;
        table.write_csv(&mut w)?;
        w.flush()?;
        let slopes = rate_fit(&table)?;
        let slopes = json!({
            "eigenvalue": slopes.eigenvalue,
            "eigenspace": slopes.eigenspace,
            "field": slopes.field,
        });
        write_json(&common.out, "slopes.json", &slopes)?;
        summary.insert("slopes".into(), slopes);
    }
    if let Some(c) = &cfg.covariance {
        let h = c.h.unwrap_or(1.5 * (c.n as f64).powf(-0.25));
        let study = covariance_study(c.n, h, c.s, c.tau, c.truncation, c.ell_max, derive_seed(common.seed, 2, 0))?;
        let mut w = create(&common.out, "covariance.csv")?;
        study.write_csv(&mut w)?;
        w.flush()?;
        summary.insert(
            "covariance".into(),
            json!({
                "n": c.n,
                "h": h,
                "max_relative_error_full": study.max_relative_error(0, false),
                "max_relative_error_truncated": study.max_relative_error(0, true),
            }),
        );
    }
    write_json(&common.out, "summary.json", &serde_json::Value::Object(summary))
}
