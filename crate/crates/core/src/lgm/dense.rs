//! Small dense Cholesky used for J×J systems.

use faer::linalg::cholesky::llt::factor::LltError;
use faer::{Mat, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct DenseChol {
    l: Mat<f64>,
}

impl DenseChol {
    pub(crate) fn new(a: &Mat<f64>) -> Result<Self> {
        match a.llt(Side::Lower) {
            Ok(f) => Ok(DenseChol { l: f.L().to_owned() }),
            Err(LltError::NonPositivePivot { index }) => Err(Error::Factorization { index, value: f64::NAN }),
        }
    }

    pub(crate) fn logdet(&self) -> f64 {
        2.0 * (0..self.l.nrows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// L⁻¹ b.
    pub(crate) fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// L⁻ᵀ b.
    pub(crate) fn backward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
