//! End-to-end drivers shared by the command-line tool and the acceptance runs:
//! hierarchical inversion on the circle and graph-based probit classification.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::graph::{epsilon_weights, Laplacian, LaplacianKind};
use crate::lgm::{
    classify, fit_evidence, gibbs_chain, log_score, mean_crps, normalize_observations, EvidenceConfig, GaussianObs,
    GaussianPosterior, GibbsChain, GibbsOptions, HyperKL, HyperTarget, LatentFamily, LgmFit, Likelihood,
    LogNormalPrior, NelderMeadOptions, ProbitObs, Smoothness,
};
use crate::pointcloud::{sample_circle, EdgeListInput, Manifold, PointCloud};
use crate::sparse::SparseSymmetric;
use crate::spectral::{eigs_smallest, EigenOptions, Normalization};

/// Test signal on [0, 2π): a smooth bump on (0, π), +1 on [π+½, 3π/2],
/// -1 on (3π/2, 2π-½], zero elsewhere.
pub fn bump_signal(t: f64) -> f64 {
    if t > 0.0 && t < PI {
        (4.0 - PI * PI / (t * (PI - t))).exp()
    } else if (PI + 0.5..=1.5 * PI).contains(&t) {
        1.0
    } else if t > 1.5 * PI && t <= 2.0 * PI - 0.5 {
        -1.0
    } else {
        0.0
    }
}

/// Angle of a point in the plane, in [0, 2π).
pub fn circle_angle(p: &[f64]) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Noisy observations of the bump signal on a uniform circle sample.
#[derive(Debug, Clone)]
pub struct InverseData {
    pub cloud: PointCloud,
    pub weights: SparseSymmetric,
    pub h: f64,
    /// Signal at every node.
    pub truth: Vec<f64>,
    pub obs: GaussianObs,
}

/// n uniform points, ε-graph with radius h, observations y = u†(x_j) + σ η_j at
/// every `every`-th node.
pub fn inverse_data(n: usize, every: usize, sigma: f64, h: f64, seed: u64) -> Result<InverseData> {
    if every == 0 {
        return invalid("observation stride must be positive");
    }
    let cloud = sample_circle(n, seed)?;
    let weights = epsilon_weights(&cloud, h, 1, 2.0 * PI)?.matrix;
    let truth: Vec<f64> = (0..n).map(|i| bump_signal(circle_angle(cloud.point(i)))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0B5E);
    let indices: Vec<usize> = (0..n).step_by(every).collect();
    let y = indices.iter().map(|&i| truth[i] + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    let obs = GaussianObs::new(indices, y, sigma, n)?;
    Ok(InverseData { cloud, weights, h, truth, obs })
}

/// How the spread of the log field is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperScale {
    /// KL prefactor as is.
    Unscaled,
    /// Spread matched to the k-th (1-based) Laplacian eigenvalue, so a stationary
    /// model can share the target of a nonstationary one.
    Eigenvalue(usize),
    Target(f64),
}

/// KL hyperprior settings; n0 = 1 gives the stationary model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSettings {
    pub nu: f64,
    pub s0: f64,
    pub n0: usize,
    pub target: HyperTarget,
    pub scale: HyperScale,
}

/// Latent family on a weight matrix with a KL hyperprior built from the
/// Laplacian's leading eigenpairs.
pub fn latent_family(
    weights: &SparseSymmetric,
    kind: LaplacianKind,
    m: f64,
    hyper: &HyperSettings,
    tau_const: f64,
    seed: u64,
) -> Result<LatentFamily> {
    let lap = Laplacian::new(weights, kind)?;
    let k = match hyper.scale {
        HyperScale::Eigenvalue(k) if k == 0 => return invalid("eigenvalue index is 1-based"),
        HyperScale::Eigenvalue(k) => k.max(hyper.n0),
        _ => hyper.n0,
    };
    let basis = eigs_smallest(
        lap.require_symmetric()?,
        k,
        Normalization::EmpiricalL2,
        EigenOptions { seed, ..EigenOptions::default() },
    )?;
    let h = HyperKL::new(&basis, hyper.nu, hyper.s0, hyper.n0, m, hyper.target)?;
    let h = match hyper.scale {
        HyperScale::Unscaled => h,
        HyperScale::Eigenvalue(k) => h.with_target(basis.values[k - 1])?,
        HyperScale::Target(t) => h.with_target(t)?,
    };
    LatentFamily::new(weights, kind, m, Some(h), tau_const)
}

#[derive(Debug, Clone)]
pub struct InverseResult {
    pub chain: GibbsChain,
    pub burn_in: usize,
    pub mean_u: Vec<f64>,
    /// Posterior-mean RMSE against the signal over all nodes.
    pub rmse: f64,
    /// Posterior mean of τ (or κ).
    pub mean_field: Vec<f64>,
}

/// Runs the Gibbs sampler from θ = 0 and summarizes after the burn-in.
pub fn run_inverse(
    data: &InverseData,
    family: &LatentFamily,
    s: f64,
    opts: GibbsOptions,
    burn_in: usize,
    seed: u64,
) -> Result<InverseResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta0 = vec![0.0; family.n_theta()];
    let chain = gibbs_chain(family, s, &data.obs, &theta0, opts, &mut rng)?;
    if let Some(e) = &chain.aborted {
        return Err(crate::Error::Numerical(e.clone()));
    }
    let mean_u =
        chain.mean_u(burn_in).ok_or_else(|| crate::Error::InvalidArgument("burn-in leaves no samples".into()))?;
    let mean_field = chain.mean_field(family, burn_in)?.unwrap_or_default();
    let rmse = rmse(&mean_u, &data.truth);
    Ok(InverseResult { chain, burn_in, mean_u, rmse, mean_field })
}

/// Per-coordinate empirical p-quantiles of a sample set (linear interpolation).
pub fn quantiles(samples: &[Vec<f64>], p: f64) -> Vec<f64> {
    let Some(first) = samples.first() else { return vec![] };
    (0..first.len())
        .map(|i| {
            let mut v: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            v.sort_by(f64::total_cmp);
            let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        })
        .collect()
}

/// Two interleaved half circles with Gaussian noise; labels +1 (upper) and -1 (lower).
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<(PointCloud, Vec<f64>)> {
    if n < 4 {
        return invalid(format!("need at least 4 points, got {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let upper = i < n / 2;
        let t: f64 = rng.random_range(0.0..PI);
        let (x, y) = if upper { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        pts.extend([x + noise * ex, y + noise * ey]);
        labels.push(if upper { 1.0 } else { -1.0 });
    }
    Ok((PointCloud::new(pts, 2, Manifold::Abstract)?, labels))
}

/// Random subset of two classes, `n / 2` points each; labels +1 for `pair.0`, -1 for `pair.1`.
pub fn class_pair(
    cloud: &PointCloud,
    classes: &[i64],
    pair: (i64, i64),
    n: usize,
    seed: u64,
) -> Result<(PointCloud, Vec<f64>)> {
    if classes.len() != cloud.len() {
        return invalid(format!("{} labels for {} points", classes.len(), cloud.len()));
    }
    if pair.0 == pair.1 {
        return invalid("class pair must be two distinct classes");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let mut pts = Vec::with_capacity(2 * half * cloud.dim());
    let mut labels = Vec::with_capacity(2 * half);
    for (c, y) in [(pair.0, 1.0), (pair.1, -1.0)] {
        let members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        if members.len() < half {
            return invalid(format!("class {c} has {} points, need {half}", members.len()));
        }
        let mut pick = sample(&mut rng, members.len(), half).into_vec();
        pick.sort_unstable();
        for i in pick {
            pts.extend_from_slice(cloud.point(members[i]));
            labels.push(y);
        }
    }
    Ok((PointCloud::new(pts, cloud.dim(), Manifold::Abstract)?, labels))
}

/// Probit model settings for semi-supervised classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyModel {
    pub kind: LaplacianKind,
    pub m: f64,
    pub hyper: HyperSettings,
    pub smoothness: Smoothness,
    pub sigma_prior: LogNormalPrior,
    pub sigma_init: f64,
    pub optimizer: NelderMeadOptions,
}

#[derive(Debug, Clone)]
pub struct ClassifyRun {
    pub labeled: Vec<usize>,
    /// Misclassification rate over the unlabeled nodes.
    pub error_rate: f64,
    pub fit: LgmFit,
}

/// A fixed graph and prior family, reused across label draws.
#[derive(Debug, Clone)]
pub struct Classifier {
    family: LatentFamily,
    model: ClassifyModel,
}

impl Classifier {
    pub fn new(weights: &SparseSymmetric, model: ClassifyModel, seed: u64) -> Result<Self> {
        let family = latent_family(weights, model.kind, model.m, &model.hyper, 1.0, seed)?;
        Ok(Classifier { family, model })
    }

    pub fn family(&self) -> &LatentFamily {
        &self.family
    }

    /// Draws `n_labeled` labeled nodes uniformly, maximizes the Laplace evidence
    /// and classifies the rest by the sign of the mode.
    pub fn run(&self, labels: &[f64], n_labeled: usize, seed: u64) -> Result<ClassifyRun> {
        let n = self.family.n();
        if labels.len() != n || n_labeled == 0 || n_labeled >= n {
            return invalid(format!("need {n} labels and 0 < labeled < n, got {} and {n_labeled}", labels.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labeled = sample(&mut rng, n, n_labeled).into_vec();
        labeled.sort_unstable();
        self.run_with(labels, labeled)
    }

    /// As `run` with a given labeled set.
    pub fn run_with(&self, labels: &[f64], labeled: Vec<usize>) -> Result<ClassifyRun> {
        let n = self.family.n();
        let y: Vec<f64> = labeled.iter().map(|&i| labels[i]).collect();
        let obs = ProbitObs::new(labeled.clone(), y, self.model.sigma_init, n)?;
        let cfg = EvidenceConfig {
            sigma_prior: self.model.sigma_prior,
            infer_sigma: true,
            smoothness: self.model.smoothness,
            optimizer: self.model.optimizer,
            variances: false,
        };
        let theta0 = vec![0.0; self.family.n_theta()];
        let fit = fit_evidence(&self.family, &Likelihood::Probit(obs), &cfg, &theta0)?;
        let pred = classify(&fit.mean);
        let mut is_labeled = vec![false; n];
        labeled.iter().for_each(|&i| is_labeled[i] = true);
        let (wrong, total) = (0..n)
            .filter(|&i| !is_labeled[i])
            .fold((0usize, 0usize), |(w, t), i| (w + usize::from(pred[i] != labels[i]), t + 1));
        Ok(ClassifyRun { labeled, error_rate: wrong as f64 / total as f64, fit })
    }
}

/// Scattered sites in the unit square with distances recorded below `cutoff`,
/// and a field whose roughness grows from left to right, observed with noise.
#[derive(Debug, Clone)]
pub struct DistanceData {
    pub sites: PointCloud,
    pub edges: EdgeListInput,
    pub values: Vec<f64>,
}

pub fn synthetic_distance_data(n: usize, cutoff: f64, noise: f64, seed: u64) -> Result<DistanceData> {
    if n < 2 || !(cutoff > 0.0) || !(noise >= 0.0) {
        return invalid("need n >= 2, cutoff > 0 and noise >= 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    let sites = PointCloud::new(pts, 2, Manifold::Abstract)?;
    let nb = crate::pointcloud::neighbors_within(&sites, cutoff)?;
    let mut edges = Vec::new();
    for i in 0..n {
        edges.extend(nb.neighbors(i).iter().filter(|p| p.0 > i).map(|&(j, d)| (i, j, d)));
    }
    let values = (0..n)
        .map(|i| {
            let p = sites.point(i);
            let f = 2.0 + 6.0 * p[0];
            (f * p[0]).sin() * (3.0 * p[1]).cos() + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(DistanceData { sites, edges: EdgeListInput::new(n, edges)?, values })
}

/// Gaussian-likelihood model settings for evidence-maximization kriging.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigeModel {
    pub m: f64,
    pub hyper: HyperSettings,
    pub smoothness: Smoothness,
    pub sigma_prior: LogNormalPrior,
    /// Initial σ in normalized units.
    pub sigma_init: f64,
    pub optimizer: NelderMeadOptions,
    /// Prior draws used to normalize the observations.
    pub normalize_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrigeScores {
    pub rmse: f64,
    pub crps: f64,
    /// Negative joint log predictive density.
    pub log_score: f64,
}

#[derive(Debug, Clone)]
pub struct KrigeRun {
    /// Node indices used for training and testing.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fit: LgmFit,
    /// Predictive mean and variance at the test nodes, in data units.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub scores: KrigeScores,
}

/// A fixed graph and prior family, reused across train/test splits.
#[derive(Debug, Clone)]
pub struct Kriger {
    family: LatentFamily,
    model: KrigeModel,
}

impl Kriger {
    pub fn new(weights: &SparseSymmetric, model: KrigeModel, seed: u64) -> Result<Self> {
        let family = latent_family(weights, LaplacianKind::Unnormalized, model.m, &model.hyper, 1.0, seed)?;
        Ok(Kriger { family, model })
    }

    pub fn family(&self) -> &LatentFamily {
        &self.family
    }

    /// Random split of the observed nodes, evidence maximization on the training
    /// part and scoring of the latent predictive at the held-out nodes.
    pub fn run(&self, nodes: &[usize], values: &[f64], train_fraction: f64, seed: u64) -> Result<KrigeRun> {
        let total = nodes.len();
        if values.len() != total {
            return invalid(format!("{total} nodes but {} values", values.len()));
        }
        let n_train = (train_fraction * total as f64).round() as usize;
        if !(train_fraction > 0.0 && train_fraction < 1.0) || n_train == 0 || n_train >= total {
            return invalid(format!("train fraction {train_fraction} leaves an empty train or test set"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut is_train = vec![false; total];
        sample(&mut rng, total, n_train).into_iter().for_each(|k| is_train[k] = true);
        let (train_pos, test_pos): (Vec<usize>, Vec<usize>) = (0..total).partition(|&k| is_train[k]);
        let train: Vec<usize> = train_pos.iter().map(|&k| nodes[k]).collect();
        let test: Vec<usize> = test_pos.iter().map(|&k| nodes[k]).collect();
        let y_train: Vec<f64> = train_pos.iter().map(|&k| values[k]).collect();
        let y_test: Vec<f64> = test_pos.iter().map(|&k| values[k]).collect();

        let s0 = match self.model.smoothness {
            Smoothness::Fixed(s) => s,
            Smoothness::Inferred { init, .. } => init,
        };
        let theta0 = vec![0.0; self.family.n_theta()];
        let prior_model = self.family.model(&theta0, s0)?;
        let norm = normalize_observations(&y_train, &prior_model, self.model.normalize_draws, &mut rng)?;
        let obs = GaussianObs::new(train, norm.y.clone(), self.model.sigma_init, self.family.n())?;
        let cfg = EvidenceConfig {
            sigma_prior: self.model.sigma_prior,
            infer_sigma: true,
            smoothness: self.model.smoothness,
            optimizer: self.model.optimizer,
            variances: false,
        };
        let fit = fit_evidence(&self.family, &Likelihood::Gaussian(obs.clone()), &cfg, &theta0)?;
        let prior = self.family.precision(&fit.theta, fit.s)?;
        let post = GaussianPosterior::new(&prior, &obs.with_sigma(fit.sigma))?;
        let mean: Vec<f64> = test.iter().map(|&i| norm.to_data(post.mean()[i])).collect();
        let mut cov = post.cov_block(&test);
        let back = norm.var_to_data(1.0);
        for c in 0..cov.ncols() {
            for r in 0..cov.nrows() {
                cov[(r, c)] *= back;
            }
        }
        let variance: Vec<f64> = (0..test.len()).map(|i| cov[(i, i)].max(0.0)).collect();
        let sd: Vec<f64> = variance.iter().map(|v| v.sqrt()).collect();
        let scores = KrigeScores {
            rmse: rmse(&mean, &y_test),
            crps: mean_crps(&mean, &sd, &y_test),
            log_score: log_score(&mean, &cov, &y_test)?,
        };
        Ok(KrigeRun { train: train_pos.iter().map(|&k| nodes[k]).collect(), test, fit, mean, variance, scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_branches() {
        assert_eq!(bump_signal(0.0), 0.0);
        assert!((bump_signal(PI / 2.0) - (4.0f64 - 4.0).exp()).abs() < 1e-12);
        assert_eq!(bump_signal(PI + 0.5), 1.0);
        assert_eq!(bump_signal(1.5 * PI), 1.0);
        assert_eq!(bump_signal(1.5 * PI + 0.1), -1.0);
        assert_eq!(bump_signal(2.0 * PI - 0.4), 0.0);
        assert_eq!(bump_signal(PI + 0.2), 0.0);
        assert!((circle_angle(&[0.0, -1.0]) - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn moons_are_balanced_and_deterministic() {
        let (c, l) = two_moons(100, 0.1, 3).unwrap();
        assert_eq!(c.len(), 100);
        assert_eq!(l.iter().filter(|&&v| v > 0.0).count(), 50);
        assert_eq!(two_moons(100, 0.1, 3).unwrap().0, c);
    }

    #[test]
    fn class_pair_balances_and_labels() {
        let pts: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let cloud = PointCloud::new(pts, 1, Manifold::Abstract).unwrap();
        let classes: Vec<i64> = (0..20).map(|i| i % 3).collect();
        let (sub, y) = class_pair(&cloud, &classes, (0, 2), 8, 1).unwrap();
        assert_eq!(sub.len(), 8);
        for i in 0..8 {
            let original = sub.point(i)[0] as i64;
            assert_eq!(classes[original as usize], if y[i] > 0.0 { 0 } else { 2 });
        }
        assert!(class_pair(&cloud, &classes, (0, 2), 20, 1).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
        assert_eq!(quantiles(&s, 0.5), vec![2.0, -2.0]);
        assert_eq!(quantiles(&s, 0.125), vec![0.5, -3.5]);
    }

    #[test]
    fn kriging_beats_the_mean_on_smooth_data() {
        let data = synthetic_distance_data(150, 0.2, 0.01, 4).unwrap();
        let w = crate::graph::distance_gaussian_weights(&data.edges).unwrap().matrix;
        let model = KrigeModel {
            m: 2.0,
            hyper: HyperSettings { nu: 0.1, s0: 2.0, n0: 1, target: HyperTarget::Tau, scale: HyperScale::Unscaled },
            smoothness: Smoothness::Fixed(2.0),
            sigma_prior: LogNormalPrior::new(0.01, 1.0),
            sigma_init: 0.1,
            optimizer: NelderMeadOptions { max_evals: 300, ..NelderMeadOptions::default() },
            normalize_draws: 50,
        };
        let k = Kriger::new(&w, model, 1).unwrap();
        let nodes: Vec<usize> = (0..150).collect();
        let run = k.run(&nodes, &data.values, 0.9, 7).unwrap();
        assert_eq!(run.test.len(), 15);
        let m = data.values.iter().sum::<f64>() / 150.0;
        let y: Vec<f64> = run.test.iter().map(|&i| data.values[i]).collect();
        let baseline = rmse(&vec![m; y.len()], &y);
        assert!(run.scores.rmse < 0.5 * baseline, "{} vs {baseline}", run.scores.rmse);
        assert!(run.variance.iter().all(|&v| v >= 0.0) && run.scores.crps > 0.0);
    }
}
