//! Shift-invert Lanczos for the smallest eigenpairs of a sparse SPD-or-PSD matrix.
//!
//! Each run builds a Krylov basis of (A - σI)⁻¹ with full reorthogonalization
//! against both the basis and all previously locked eigenvectors. Converged
//! Ritz pairs are locked and the next run starts from a fresh random vector,
//! which is how repeated eigenvalues get all their copies. A run that converges
//! nothing doubles the Krylov dimension. A last run checks that nothing below
//! the k-th locked value was missed.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cholesky::CholeskyFactor;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

const MAX_RUNS: usize = 200;
const RITZ_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in against {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Returns ascending eigenvalues and unit eigenvectors (as columns).
pub fn smallest(a: &SparseSymmetric, k: usize, seed: u64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n();
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    // A is PSD, so a small negative shift makes A - σI safely PD.
    let sigma = -1e-3 * scale;
    let shifted = a.add_diagonal(&vec![-sigma; n]);
    let fac = CholeskyFactor::new(&shifted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Krylov dimension; doubled whenever a run converges nothing (clustered spectra)
    let mut ncv = (2 * k + 20).min(n);

    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut verified = false;
    for _ in 0..MAX_RUNS {
        if locked.len() >= n {
            break;
        }
        let found = run(&fac, sigma, &locked, ncv.min(n - locked.len()), &mut rng);
        let kth = if locked.len() >= k {
            let mut v = locked_vals.clone();
            v.sort_by(f64::total_cmp);
            Some(v[k - 1])
        } else {
            None
        };
        if found.is_empty() {
            // an empty run proves nothing unless its Krylov space was complete
            if kth.is_some() && ncv >= n - locked.len() {
                verified = true;
                break;
            }
            ncv = (2 * ncv).min(n);
            continue;
        }
        let mut added = false;
        for (lam, v) in found {
            if kth.is_none_or(|t| lam < t * (1.0 - 1e-12) - 1e-14) || locked.len() < k {
                locked_vals.push(lam);
                locked.push(v);
                added = true;
            }
        }
        if !added && kth.is_some() {
            verified = true;
            break;
        }
    }
    if !verified && locked.len() < k {
        return Err(Error::Solver(format!("Lanczos locked only {} of {k} eigenpairs", locked.len())));
    }
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&i, &j| locked_vals[i].total_cmp(&locked_vals[j]));
    order.truncate(k);
    let vals = order.iter().map(|&i| locked_vals[i]).collect();
    let vecs = order.iter().map(|&i| locked[i].clone()).collect();
    Ok((vals, vecs))
}

/// One Lanczos run orthogonal to `locked`; returns converged pairs (λ, unit v).
fn run(fac: &CholeskyFactor, sigma: f64, locked: &[Vec<f64>], m: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, Vec<f64>)> {
    let n = fac.n();
    let mut q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    orthogonalize(&mut q, locked);
    let nq = norm(&q);
    if nq < 1e-12 {
        return Vec::new();
    }
    q.iter_mut().for_each(|x| *x /= nq);
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..m {
        let mut w = fac.solve(&basis[j]);
        orthogonalize(&mut w, locked);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        if j + 1 == m || b < 1e-12 * a.abs().max(1e-300) {
            beta.push(b);
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    let len = alpha.len();
    let t = Mat::<f64>::from_fn(len, len, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 || j == i + 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let eig = match t.self_adjoint_eigen(Side::Lower) {
        Ok(e) => e,
        Err(_) => return Vec::new(),
    };
    let theta = eig.S().column_vector();
    let s = eig.U();
    let b_last = beta[len - 1];
    let top = (0..len).map(|i| theta[i].abs()).fold(0.0, f64::max);
    let mut out = Vec::new();
    // Largest θ of the inverse are the smallest λ; take converged ones from the top.
    for i in (0..len).rev() {
        let th = theta[i];
        if th <= 0.0 {
            break;
        }
        if (b_last * s[(len - 1, i)]).abs() > RITZ_TOL * top {
            break;
        }
        let mut v = vec![0.0; n];
        for (c, qj) in basis.iter().enumerate() {
            let w = s[(c, i)];
            v.iter_mut().zip(qj).for_each(|(x, y)| *x += w * y);
        }
        orthogonalize(&mut v, locked);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        out.push((sigma + 1.0 / th, v));
    }
    out
}
