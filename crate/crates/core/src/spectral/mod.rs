//! Eigenpairs, sparse Cholesky factors and log-determinants.

mod cholesky;
mod lanczos;
mod ordering;

pub use cholesky::CholeskyFactor;
pub use ordering::minimum_degree;

use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};
use crate::sparse::SparseSymmetric;

/// Matrices up to this size are diagonalized densely by default.
pub const DENSE_EIGEN_MAX: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// (1/n) Σ v_i² = 1, i.e. Euclidean norm √n.
    EmpiricalL2,
    /// Euclidean norm 1.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Seed for Lanczos start vectors.
    pub seed: u64,
}

/// Ascending eigenvalues with eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
    pub normalization: Normalization,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.col_as_slice(i)
    }

    /// Same basis under another normalization.
    pub fn renormalized(&self, to: Normalization) -> EigenBasis {
        let n = self.n() as f64;
        let f = match (self.normalization, to) {
            (a, b) if a == b => 1.0,
            (Normalization::EmpiricalL2, Normalization::Euclidean) => 1.0 / n.sqrt(),
            _ => n.sqrt(),
        };
        EigenBasis { values: self.values.clone(), vectors: &self.vectors * faer::Scale(f), normalization: to }
    }

    /// Largest relative residual ‖Av − λv‖ / ((1+|λ|)‖v‖) over the stored pairs.
    pub fn max_residual(&self, a: &SparseSymmetric) -> f64 {
        (0..self.len())
            .map(|i| {
                let v = self.vector(i);
                let av = a.matvec(v);
                let r: f64 = av.iter().zip(v).map(|(x, y)| (x - self.values[i] * y).powi(2)).sum::<f64>().sqrt();
                let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                r / ((1.0 + self.values[i].abs()) * nv)
            })
            .fold(0.0, f64::max)
    }
}

/// Flips v so that its largest-magnitude entry (lowest index on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full dense eigendecomposition of a symmetric matrix, ascending.
pub fn dense_eigh(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("dense eigensolver failed: {e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

/// The k algebraically smallest eigenpairs of a symmetric positive semidefinite matrix.
pub fn eigs_smallest(
    a: &SparseSymmetric,
    k: usize,
    normalization: Normalization,
    opts: EigenOptions,
) -> Result<EigenBasis> {
    let n = a.n();
    if k == 0 || k > n {
        return invalid(format!("requested {k} eigenpairs of a {n}x{n} matrix"));
    }
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= DENSE_EIGEN_MAX || 2 * k > n,
    };
    let (values, mut cols): (Vec<f64>, Vec<Vec<f64>>) = if dense {
        let (vals, u) = dense_eigh(&a.to_dense())?;
        (vals[..k].to_vec(), (0..k).map(|j| u.col_as_slice(j).to_vec()).collect())
    } else {
        lanczos::smallest(a, k, opts.seed)?
    };
    let f = match normalization {
        Normalization::EmpiricalL2 => (n as f64).sqrt(),
        Normalization::Euclidean => 1.0,
    };
    for c in &mut cols {
        fix_sign(c);
        c.iter_mut().for_each(|x| *x *= f);
    }
    let vectors = Mat::from_fn(n, k, |i, j| cols[j][i]);
    let basis = EigenBasis { values, vectors, normalization };
    if !dense {
        let r = basis.max_residual(a);
        if !(r <= 1e-6) {
            return Err(Error::Solver(format!("Lanczos residual {r:e} above tolerance")));
        }
    }
    Ok(basis)
}

/// Weyl-law dimension estimate 2/b, where b is the least-squares slope of
/// log λ_i against log i over 1-based indices `lo..=hi`.
pub fn effective_dimension(values: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo == 0 || hi > values.len() || hi < lo + 4 {
        return invalid(format!("index range {lo}..={hi} must be 1-based with at least 5 points"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in lo..=hi {
        let v = values[i - 1];
        if !(v > 0.0) {
            return invalid(format!("eigenvalue {i} is {v}, not positive"));
        }
        xs.push((i as f64).ln());
        ys.push(v.ln());
    }
    let b = ls_slope(&xs, &ys);
    Ok(2.0 / b)
}

/// Least-squares slope of y on x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_smallest() {
        let a = SparseSymmetric::diagonal_matrix(&[3.0, 1.0, 2.0]);
        let b = eigs_smallest(&a, 2, Normalization::Euclidean, EigenOptions::default()).unwrap();
        assert!((b.values[0] - 1.0).abs() < 1e-14 && (b.values[1] - 2.0).abs() < 1e-14);
        assert!(b.vector(0)[1] > 0.0);
    }

    #[test]
    fn complete_graph_spectrum_both_methods() {
        let t = [(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)];
        let a = SparseSymmetric::from_triplets(3, &t).unwrap();
        for method in [EigenMethod::Dense, EigenMethod::Lanczos] {
            let b = eigs_smallest(&a, 3, Normalization::EmpiricalL2, EigenOptions { method, seed: 1 }).unwrap();
            for (got, want) in b.values.iter().zip([0.0, 3.0, 3.0]) {
                assert!((got - want).abs() < 1e-9, "{method:?} {:?}", b.values);
            }
            let v0 = b.vector(0);
            assert!(v0.iter().all(|x| (x - 1.0).abs() < 1e-8));
        }
    }

    #[test]
    fn weyl_slopes() {
        let sq: Vec<f64> = (1..=20).map(|i| (i * i) as f64).collect();
        assert!((effective_dimension(&sq, 2, 20).unwrap() - 1.0).abs() < 1e-12);
        let lin: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert!((effective_dimension(&lin, 1, 20).unwrap() - 2.0).abs() < 1e-12);
        assert!(effective_dimension(&[0.0, 1.0, 2.0, 3.0, 4.0], 1, 5).is_err());
    }
}
