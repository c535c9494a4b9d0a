//! Kriging on a distance graph with held-out scoring across model variants.

use std::io::Write;
use std::path::PathBuf;

use graph_matern::experiments::{synthetic_distance_data, KrigeModel, Kriger};
use graph_matern::graph::distance_gaussian_weights;
use graph_matern::lgm::NelderMeadOptions;
use graph_matern::pointcloud::{load_edge_list_csv, load_node_values_csv};
use serde::Deserialize;
use serde_json::json;

use super::{mean_sd, variant_model};
use crate::config::{
    all_variants, check_variants, derive_seed, require, require_file, Common, LogNormal, ScaleSpec, Variant,
};
use crate::error::{config_err, CliError, Result};
use crate::output::{create, par_map, row, write_json};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synthetic {
    #[serde(default = "default_syn_n")]
    pub n: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_syn_n() -> usize {
    800
}
fn default_cutoff() -> f64 {
    0.1
}
fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrigeConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Edge list "i,j,distance".
    pub edges: Option<PathBuf>,
    /// Observed values "node,value".
    pub values: Option<PathBuf>,
    pub synthetic: Option<Synthetic>,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_train")]
    pub train_fraction: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_s")]
    pub s0: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_scale")]
    pub tau_scale: ScaleSpec,
    #[serde(default = "default_s")]
    pub s_fixed: f64,
    #[serde(default = "default_s_prior")]
    pub s_prior: LogNormal,
    #[serde(default = "default_sigma_prior")]
    pub sigma_prior: LogNormal,
    #[serde(default = "default_sigma_init")]
    pub sigma_init: f64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_normalize_draws")]
    pub normalize_draws: usize,
}

fn default_repeats() -> usize {
    20
}
fn default_train() -> f64 {
    0.9
}
fn default_m() -> f64 {
    2.0
}
fn default_nu() -> f64 {
    0.1
}
fn default_s() -> f64 {
    2.0
}
fn default_n0() -> usize {
    10
}
fn default_scale() -> ScaleSpec {
    ScaleSpec::Named("eigenvalue".into())
}
fn default_s_prior() -> LogNormal {
    LogNormal { median: 2.0, var: 1.0 }
}
fn default_sigma_prior() -> LogNormal {
    LogNormal { median: 0.01, var: 1.0 }
}
fn default_sigma_init() -> f64 {
    0.1
}
fn default_max_evals() -> usize {
    2000
}
fn default_normalize_draws() -> usize {
    100
}

impl KrigeConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.edges, &self.values, &self.synthetic) {
            (Some(e), Some(v), None) => {
                require_file(e, "edges")?;
                require_file(v, "values")?;
            }
            (None, None, Some(s)) => {
                require(
                    s.n >= 10 && s.cutoff > 0.0 && s.noise >= 0.0,
                    "synthetic: need n >= 10, cutoff > 0, noise >= 0",
                )?;
            }
            _ => return config_err("give either `edges` and `values` files or a [synthetic] section"),
        }
        check_variants(&self.variants)?;
        require(self.repeats >= 1, "repeats must be at least 1")?;
        require(self.train_fraction > 0.0 && self.train_fraction < 1.0, "train_fraction must be in (0, 1)")?;
        require(
            self.m > 0.0 && self.nu > 0.0 && self.s0 > 0.0 && self.s_fixed > 0.0,
            "m, nu, s0 and s_fixed must be positive",
        )?;
        require(self.n0 >= 1, "n0 must be at least 1")?;
        require(
            self.sigma_init > 0.0 && self.max_evals >= 1 && self.normalize_draws >= 2,
            "need sigma_init > 0, max_evals >= 1, normalize_draws >= 2",
        )?;
        self.s_prior.prior("s_prior")?;
        self.sigma_prior.prior("sigma_prior")?;
        self.tau_scale.resolve(self.n0).map(|_| ())
    }
}

pub fn run(cfg: &KrigeConfig, common: &Common) -> Result<()> {
    cfg.validate()?;
    let (edges, nodes, values) = match &cfg.synthetic {
        Some(s) => {
            let d = synthetic_distance_data(s.n, s.cutoff, s.noise, derive_seed(common.seed, 1, 0))?;
            (d.edges, (0..s.n).collect::<Vec<_>>(), d.values)
        }
        None => {
            let obs = load_node_values_csv(cfg.values.as_ref().expect("validated"))?;
            let n = obs.iter().map(|&(i, _)| i + 1).max();
            let edges = load_edge_list_csv(cfg.edges.as_ref().expect("validated"), None)?;
            if n.is_some_and(|n| n > edges.n) {
                return config_err(format!(
                    "values refer to node {} but the graph has {} nodes",
                    n.unwrap() - 1,
                    edges.n
                ));
            }
            let (nodes, values) = obs.into_iter().unzip();
            (edges, nodes, values)
        }
    };
    require(nodes.len() >= 4, "need at least four observed nodes")?;
    let weights = distance_gaussian_weights(&edges)?.matrix;
    let optimizer = NelderMeadOptions { max_evals: cfg.max_evals, ..NelderMeadOptions::default() };

    let mut scores = create(&common.out, "scores.csv")?;
    writeln!(scores, "variant,repeat,rmse,crps,log_score,s,sigma,evals,converged")?;
    let mut table = create(&common.out, "table.csv")?;
    writeln!(table, "variant,rmse_mean,rmse_sd,crps_mean,crps_sd,log_score_mean,log_score_sd")?;
    let mut summary = Vec::new();
    for (vi, &v) in cfg.variants.iter().enumerate() {
        let (hyper, smoothness) = variant_model(v, cfg.nu, cfg.s0, cfg.n0, &cfg.tau_scale, cfg.s_fixed, cfg.s_prior)?;
        let model = KrigeModel {
            m: cfg.m,
            hyper,
            smoothness,
            sigma_prior: cfg.sigma_prior.prior("sigma_prior")?,
            sigma_init: cfg.sigma_init,
            optimizer,
            normalize_draws: cfg.normalize_draws,
        };
        let kriger = Kriger::new(&weights, model, derive_seed(common.seed, 2, vi as u64))?;
        // The split depends on the repeat only, so variants see the same splits.
        let runs = par_map(cfg.repeats, |r| {
            kriger.run(&nodes, &values, cfg.train_fraction, derive_seed(common.seed, 3, r as u64))
        });
        let runs = runs.into_iter().collect::<graph_matern::Result<Vec<_>>>().map_err(CliError::from)?;
        for (r, run) in runs.iter().enumerate() {
            let s = &run.scores;
            writeln!(
                scores,
                "{},{r},{},{},{}",
                v.name(),
                row([s.rmse, s.crps, s.log_score, run.fit.s, run.fit.sigma]),
                run.fit.evals,
                run.fit.converged
            )?;
        }
        let col = |f: fn(&graph_matern::experiments::KrigeRun) -> f64| mean_sd(&runs.iter().map(f).collect::<Vec<_>>());
        let (rm, rs) = col(|r| r.scores.rmse);
        let (cm, cs) = col(|r| r.scores.crps);
        let (lm, ls) = col(|r| r.scores.log_score);
        writeln!(table, "{},{}", v.name(), row([rm, rs, cm, cs, lm, ls]))?;
        summary.push(json!({
            "variant": v.name(),
            "rmse": {"mean": rm, "sd": rs},
            "crps": {"mean": cm, "sd": cs},
            "log_score": {"mean": lm, "sd": ls},
        }));
    }
    scores.flush()?;
    table.flush()?;
    write_json(
        &common.out,
        "summary.json",
        &json!({
            "nodes": weights.n(),
            "observed": nodes.len(),
            "repeats": cfg.repeats,
            "train_fraction": cfg.train_fraction,
            "variants": summary,
        }),
    )
}
