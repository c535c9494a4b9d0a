//! Derivative-free maximization (Nelder–Mead) with optional box bounds.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Stop when the simplex diameter falls below this.
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { initial_step: 0.5, tol: 1e-6, max_evals: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Maximizes `f` from `init`. Points are clamped into `bounds` when given;
/// non-finite values count as -∞.
pub fn maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    bounds: Option<&[(f64, f64)]>,
    opts: NelderMeadOptions,
) -> Result<OptimResult> {
    let d = init.len();
    if d == 0 {
        return invalid("nothing to optimize");
    }
    if let Some(b) = bounds {
        if b.len() != d || b.iter().any(|(lo, hi)| !(lo <= hi)) {
            return invalid("bounds must have one ordered pair per coordinate");
        }
    }
    let clamp = |x: &mut Vec<f64>| {
        if let Some(b) = bounds {
            x.iter_mut().zip(b).for_each(|(v, (lo, hi))| *v = v.clamp(*lo, *hi));
        }
    };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut x0 = init.to_vec();
    clamp(&mut x0);
    let f0 = eval(&x0, &mut evals);
    if f0 == f64::NEG_INFINITY {
        return invalid("objective is not finite at the initial point");
    }
    let mut simplex = vec![(x0.clone(), f0)];
    for i in 0..d {
        let mut x = x0.clone();
        x[i] += opts.initial_step;
        clamp(&mut x);
        if x[i] == x0[i] {
            x[i] -= opts.initial_step;
            clamp(&mut x);
        }
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        trace.push(simplex[0].1);
        let diam = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if diam < opts.tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let centroid: Vec<f64> =
            (0..d).map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut p);
            p
        };
        let (best, second_worst, worst) = (simplex[0].1, simplex[d - 1].1, simplex[d].1);
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr > best {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > second_worst {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr > worst {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc > worst.max(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            x.iter_mut().zip(&x_best).for_each(|(a, b)| *a = b + 0.5 * (*a - b));
            *v = eval(x, &mut evals);
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Ok(OptimResult { x, value, evals, trace, converged })
}
