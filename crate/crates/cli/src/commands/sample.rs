//! Draws graph Matérn fields on a circle, sphere or user-supplied point cloud.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use graph_matern::graph::{epsilon_weights, Laplacian, LaplacianKind};
use graph_matern::matern::MaternModel;
use graph_matern::pointcloud::{load_points_csv, sample_circle, sample_sphere, Manifold};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::config::{derive_seed, require, require_file, Common};
use crate::error::Result;
use crate::output::{create, row, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Circle,
    Sphere,
    Points,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Point CSV for `domain = "points"`.
    pub points: Option<PathBuf>,
    /// Intrinsic dimension and volume; required for point files.
    pub m: Option<usize>,
    pub vol: Option<f64>,
    /// Graph radius; circle default 3 sqrt(log n / n), sphere default 1.5 n^(-1/4).
    pub h: Option<f64>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "one")]
    pub tau: f64,
    /// Constant κ multiplying the weights.
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// KL truncation for the spectral sampler (fractional s).
    pub truncation: Option<usize>,
}

fn default_domain() -> Domain {
    Domain::Circle
}
fn default_n() -> usize {
    200
}
fn default_s() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn default_draws() -> usize {
    1
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.domain == Domain::Points || self.n >= 2, "n must be at least 2")?;
        if self.domain == Domain::Points {
            let Some(p) = &self.points else {
                return crate::error::config_err("domain \"points\" needs a `points` file");
            };
            require_file(p, "points")?;
            require(self.m.is_some() && self.vol.is_some() && self.h.is_some(), "point files need m, vol and h")?;
        } else {
            require(self.points.is_none(), "`points` is only used with domain \"points\"")?;
        }
        require(self.h.is_none_or(|h| h > 0.0), "h must be positive")?;
        require(self.s > 0.0 && self.tau > 0.0 && self.kappa > 0.0, "s, tau and kappa must be positive")?;
        require(self.draws >= 1, "draws must be at least 1")?;
        Ok(())
    }
}

pub fn run(cfg: &SampleConfig, common: &Common) -> Result<()> {
    cfg.validate()?;
    let cloud_seed = derive_seed(common.seed, 1, 0);
    let (cloud, manifold) = match cfg.domain {
        Domain::Circle => (sample_circle(cfg.n, cloud_seed)?, Manifold::Circle),
        Domain::Sphere => (sample_sphere(cfg.n, cloud_seed)?, Manifold::Sphere),
        Domain::Points => {
            (load_points_csv(cfg.points.as_ref().expect("validated"), Manifold::Abstract)?, Manifold::Abstract)
        }
    };
    let n = cloud.len();
    let (m0, vol0) = manifold.dim_and_volume().unwrap_or((1, 1.0));
    let (m, vol) = (cfg.m.unwrap_or(m0), cfg.vol.unwrap_or(vol0));
    let h = cfg.h.unwrap_or_else(|| match cfg.domain {
        Domain::Sphere => 1.5 * (n as f64).powf(-0.25),
        _ => 3.0 * ((n as f64).ln() / n as f64).sqrt(),
    });
    let weights = epsilon_weights(&cloud, h, m, vol)?.matrix.scale(cfg.kappa);
    let lap = Laplacian::new(&weights, LaplacianKind::Unnormalized)?;
    let model = MaternModel::new(&lap, vec![cfg.tau; n], None, cfg.s, m as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(common.seed, 2, 0));

    let t0 = Instant::now();
    let (method, fields, factor_seconds, solve_seconds) = if model.integer_s().is_ok() {
        let sampler = model.cholesky_sampler()?;
        let factor_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let fields: Vec<Vec<f64>> = (0..cfg.draws).map(|_| sampler.draw(&mut rng)).collect();
        let mut w = create(&common.out, "precision.mtx")?;
        model.precision()?.write_matrix_market(&mut w)?;
        w.flush()?;
        ("cholesky", fields, factor_seconds, t1.elapsed().as_secs_f64())
    } else {
        let basis = model.eigenbasis()?;
        let factor_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let fields = (0..cfg.draws)
            .map(|_| model.sample_spectral(&basis, cfg.truncation, &mut rng))
            .collect::<graph_matern::Result<Vec<_>>>()?;
        ("spectral", fields, factor_seconds, t1.elapsed().as_secs_f64())
    };

    let mut w = create(&common.out, "field.csv")?;
    let coords: Vec<String> = (0..cloud.dim()).map(|d| format!("x{d}")).collect();
    let draws: Vec<String> = (0..cfg.draws).map(|d| format!("u{d}")).collect();
    writeln!(w, "node,{},{}", coords.join(","), draws.join(","))?;
    for i in 0..n {
        let vals = cloud.point(i).iter().copied().chain(fields.iter().map(|f| f[i]));
        writeln!(w, "{i},{}", row(vals))?;
    }
    w.flush()?;
    let mut g = create(&common.out, "graph.mtx")?;
    weights.write_matrix_market(&mut g)?;
    g.flush()?;
    write_json(
        &common.out,
        "timing.json",
        &json!({
            "n": n,
            "h": h,
            "weight_nonzeros": weights.nnz(),
            "method": method,
            "draws": cfg.draws,
            "factor_seconds": factor_seconds,
            "solve_seconds": solve_seconds,
        }),
    )
}
