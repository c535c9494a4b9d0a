//! Semi-supervised binary classification with the probit model.

use std::io::Write;
use std::path::PathBuf;

use graph_matern::experiments::{class_pair, two_moons, Classifier, ClassifyModel};
use graph_matern::graph::{selftuning_knn_weights, Laplacian, LaplacianKind};
use graph_matern::lgm::NelderMeadOptions;
use graph_matern::pointcloud::{load_class_labels_csv, load_points_csv, Manifold};
use graph_matern::spectral::{effective_dimension, eigs_smallest, EigenOptions, Normalization};
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
pub struct Moons {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_n() -> usize {
    1000
}
fn default_noise() -> f64 {
    0.1
}

/// Intrinsic dimension: a number, or "auto" for a Weyl-law estimate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Unnormalized,
    Symmetric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub moons: Option<Moons>,
    /// Feature CSV, one point per line.
    pub points: Option<PathBuf>,
    /// One integer class per line, aligned with `points`.
    pub classes: Option<PathBuf>,
    /// Two classes to separate; the first is labeled +1.
    pub pair: Option<(i64, i64)>,
    /// Balanced subsample size drawn from `points`.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Neighbors of the self-tuning kNN graph.
    pub k: usize,
    #[serde(default = "default_dim")]
    pub m: DimSpec,
    #[serde(default = "default_kind")]
    pub kind: Kind,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_labeled")]
    pub labeled_fraction: f64,
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
}

fn default_dim() -> DimSpec {
    DimSpec::Named("auto".into())
}
fn default_kind() -> Kind {
    Kind::Symmetric
}
fn default_repeats() -> usize {
    100
}
fn default_labeled() -> f64 {
    0.02
}
fn default_nu() -> f64 {
    0.1
}
fn default_s() -> f64 {
    4.0
}
fn default_n0() -> usize {
    10
}
fn default_scale() -> ScaleSpec {
    ScaleSpec::Named("none".into())
}
fn default_s_prior() -> LogNormal {
    LogNormal { median: 4.0, var: 1.0 }
}
fn default_sigma_prior() -> LogNormal {
    LogNormal { median: 0.1, var: 1.0 }
}
fn default_sigma_init() -> f64 {
    0.1
}
fn default_max_evals() -> usize {
    2000
}

/// Eigenvalue index range used by the dimension estimate.
const DIM_RANGE: (usize, usize) = (2, 40);

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.moons, &self.points, &self.classes) {
            (Some(m), None, None) => {
                require(self.pair.is_none(), "`pair` is only used with point files")?;
                require(m.n >= 10 && m.noise >= 0.0, "moons: need n >= 10 and noise >= 0")?;
            }
            (None, Some(p), Some(c)) => {
                require_file(p, "points")?;
                require_file(c, "classes")?;
                let Some((a, b)) = self.pair else { return config_err("point files need a `pair` of classes") };
                require(a != b, "pair must name two different classes")?;
                require(self.n >= 10, "n must be at least 10")?;
            }
            _ => return config_err("give either a [moons] section or `points` and `classes` files"),
        }
        match &self.m {
            DimSpec::Value(m) => require(*m >= 1.0, "m must be at least 1")?,
            DimSpec::Named(s) => require(s == "auto", format!("m must be a number or \"auto\", got \"{s}\""))?,
        }
        check_variants(&self.variants)?;
        require(self.k >= 1, "k must be at least 1")?;
        require(self.repeats >= 1, "repeats must be at least 1")?;
        require(self.labeled_fraction > 0.0 && self.labeled_fraction < 1.0, "labeled_fraction must be in (0, 1)")?;
        require(self.nu > 0.0 && self.s0 > 0.0 && self.s_fixed > 0.0, "nu, s0 and s_fixed must be positive")?;
        require(self.n0 >= 1, "n0 must be at least 1")?;
        require(self.sigma_init > 0.0 && self.max_evals >= 1, "need sigma_init > 0 and max_evals >= 1")?;
        self.s_prior.prior("s_prior")?;
        self.sigma_prior.prior("sigma_prior")?;
        self.tau_scale.resolve(self.n0).map(|_| ())
    }
}

pub fn run(cfg: &ClassifyConfig, common: &Common) -> Result<()> {
    cfg.validate()?;
    let data_seed = derive_seed(common.seed, 1, 0);
    let (cloud, labels) = match &cfg.moons {
        Some(m) => two_moons(m.n, m.noise, data_seed)?,
        None => {
            let cloud = load_points_csv(cfg.points.as_ref().expect("validated"), Manifold::Abstract)?;
            let classes = load_class_labels_csv(cfg.classes.as_ref().expect("validated"))?;
            class_pair(&cloud, &classes, cfg.pair.expect("validated"), cfg.n, data_seed)?
        }
    };
    let n = cloud.len();
    let n_labeled = (cfg.labeled_fraction * n as f64).round() as usize;
    require(n_labeled >= 1 && n_labeled < n, format!("labeled_fraction gives {n_labeled} labels out of {n}"))?;
    let weights = selftuning_knn_weights(&cloud, cfg.k)?.matrix;
    let kind = match cfg.kind {
        Kind::Unnormalized => LaplacianKind::Unnormalized,
        Kind::Symmetric => LaplacianKind::Symmetric,
    };
    let m_estimate = match cfg.m {
        DimSpec::Value(_) => None,
        DimSpec::Named(_) => {
            require(n > DIM_RANGE.1, format!("m = \"auto\" needs more than {} nodes", DIM_RANGE.1))?;
            let lap = Laplacian::new(&weights, kind)?;
            let opts = EigenOptions { seed: derive_seed(common.seed, 4, 0), ..EigenOptions::default() };
            let basis = eigs_smallest(lap.require_symmetric()?, DIM_RANGE.1, Normalization::Euclidean, opts)?;
            Some(effective_dimension(&basis.values, DIM_RANGE.0, DIM_RANGE.1)?)
        }
    };
    // Rounded to a manifold dimension; a curve can estimate slightly below 1.
    let m = match cfg.m {
        DimSpec::Value(m) => m,
        DimSpec::Named(_) => m_estimate.expect("estimated").round().max(1.0),
    };
    let optimizer = NelderMeadOptions { max_evals: cfg.max_evals, ..NelderMeadOptions::default() };

    let mut errors = create(&common.out, "errors.csv")?;
    writeln!(errors, "variant,repeat,error_rate,s,sigma,evals,converged")?;
    let mut table = create(&common.out, "table.csv")?;
    writeln!(table, "variant,error_mean,error_sd,error_min,error_max")?;
    let mut summary = Vec::new();
    for (vi, &v) in cfg.variants.iter().enumerate() {
        let (hyper, smoothness) = variant_model(v, cfg.nu, cfg.s0, cfg.n0, &cfg.tau_scale, cfg.s_fixed, cfg.s_prior)?;
        let model = ClassifyModel {
            kind,
            m,
            hyper,
            smoothness,
            sigma_prior: cfg.sigma_prior.prior("sigma_prior")?,
            sigma_init: cfg.sigma_init,
            optimizer,
        };
        let clf = Classifier::new(&weights, model, derive_seed(common.seed, 2, vi as u64))?;
        // Labeled sets depend on the repeat only, so variants see the same labels.
        let runs = par_map(cfg.repeats, |r| clf.run(&labels, n_labeled, derive_seed(common.seed, 3, r as u64)));
        let runs = runs.into_iter().collect::<graph_matern::Result<Vec<_>>>().map_err(CliError::from)?;
        for (r, run) in runs.iter().enumerate() {
            writeln!(
                errors,
                "{},{r},{},{},{}",
                v.name(),
                row([run.error_rate, run.fit.s, run.fit.sigma]),
                run.fit.evals,
                run.fit.converged
            )?;
        }
        let rates: Vec<f64> = runs.iter().map(|r| r.error_rate).collect();
        let (mean, sd) = mean_sd(&rates);
        let (lo, hi) = (rates.iter().copied().fold(f64::INFINITY, f64::min), rates.iter().copied().fold(0.0, f64::max));
        writeln!(table, "{},{}", v.name(), row([mean, sd, lo, hi]))?;
        summary
            .push(json!({"variant": v.name(), "error_mean": mean, "error_sd": sd, "error_min": lo, "error_max": hi}));
    }
    errors.flush()?;
    table.flush()?;
    write_json(
        &common.out,
        "summary.json",
        &json!({
            "n": n,
            "labeled": n_labeled,
            "k": cfg.k,
            "m": m,
            "m_estimate": m_estimate,
            "repeats": cfg.repeats,
            "variants": summary,
        }),
    )
}
