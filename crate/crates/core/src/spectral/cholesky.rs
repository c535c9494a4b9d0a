//! Sparse Cholesky factorization A = Pᵀ L Lᵀ P with a reusable symbolic analysis.
//!
//! Up-looking simplicial algorithm driven by the elimination tree. When the
//! predicted fill makes L more than a quarter full, the numeric phase switches
//! to faer's dense blocked factorization of the permuted matrix.

use std::sync::Arc;

use faer::linalg::cholesky::llt::factor::LltError;
use faer::{Mat, Side};

use super::ordering::minimum_degree;
use crate::error::{Error, Result};
use crate::sparse::SparseSymmetric;

const DENSE_FILL_FRACTION: f64 = 0.25;
const DENSE_MIN_N: usize = 128;
const NONE: usize = usize::MAX;

#[derive(Debug)]
struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    /// Column pointers of L (diagonal included).
    lp: Vec<usize>,
    dense: bool,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Numeric {
    Sparse { li: Vec<usize>, lx: Vec<f64> },
    Dense(Mat<f64>),
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    sym: Arc<Symbolic>,
    num: Numeric,
}

fn pattern(a: &SparseSymmetric) -> (Vec<usize>, Vec<usize>) {
    let mut rp = vec![0];
    let mut cols = Vec::with_capacity(a.nnz());
    for i in 0..a.n() {
        cols.extend_from_slice(a.row(i).0);
        rp.push(cols.len());
    }
    (rp, cols)
}

/// Nonzero pattern of row k of L (excluding the diagonal) in topological order,
/// written to `stack[top..]`; returns `top`.
fn ereach(
    a: &SparseSymmetric,
    sym_perm: &[usize],
    pinv: &[usize],
    parent: &[usize],
    k: usize,
    mark: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &c in a.row(sym_perm[k]).0 {
        let mut i = pinv[c];
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl Symbolic {
    fn analyze(a: &SparseSymmetric) -> Symbolic {
        let n = a.n();
        let perm = minimum_degree(a);
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // Elimination tree of the permuted matrix, with path compression.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &c in a.row(perm[k]).0 {
                let mut i = pinv[c];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                        break;
                    }
                    i = next;
                }
            }
        }
        let mut count = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0; n];
        for k in 0..n {
            let top = ereach(a, &perm, &pinv, &parent, k, &mut mark, &mut stack);
            for &j in &stack[top..] {
                count[j] += 1;
            }
        }
        let mut lp = vec![0; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + count[j];
        }
        let full = n as f64 * (n as f64 + 1.0) / 2.0;
        let dense = n >= DENSE_MIN_N && lp[n] as f64 > DENSE_FILL_FRACTION * full;
        let (row_ptr, cols) = pattern(a);
        Symbolic { n, perm, pinv, parent, lp, dense, row_ptr, cols }
    }

    fn matches(&self, a: &SparseSymmetric) -> bool {
        if a.n() != self.n || a.nnz() != self.cols.len() {
            return false;
        }
        (0..self.n).all(|i| a.row(i).0 == &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]])
    }
}

impl CholeskyFactor {
    pub fn new(a: &SparseSymmetric) -> Result<Self> {
        let sym = Arc::new(Symbolic::analyze(a));
        let num = numeric(&sym, a)?;
        Ok(CholeskyFactor { sym, num })
    }

    /// Factors a matrix with the same sparsity pattern, reusing the ordering and
    /// elimination tree; falls back to a fresh analysis if the pattern differs.
    pub fn refactor(&self, a: &SparseSymmetric) -> Result<Self> {
        if !self.sym.matches(a) {
            return Self::new(a);
        }
        let num = numeric(&self.sym, a)?;
        Ok(CholeskyFactor { sym: Arc::clone(&self.sym), num })
    }

    pub fn n(&self) -> usize {
        self.sym.n
    }

    /// `perm[k]` is the original index of the k-th pivot.
    pub fn perm(&self) -> &[usize] {
        &self.sym.perm
    }

    /// Stored entries of L including the diagonal.
    pub fn nnz_l(&self) -> usize {
        match &self.num {
            Numeric::Sparse { .. } => self.sym.lp[self.sym.n],
            Numeric::Dense(_) => self.sym.n * (self.sym.n + 1) / 2,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.num, Numeric::Dense(_))
    }

    /// log det A = 2 Σ log L_kk.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.sym.n).map(|k| self.diag(k).ln()).sum::<f64>()
    }

    fn diag(&self, k: usize) -> f64 {
        match &self.num {
            Numeric::Sparse { lx, .. } => lx[self.sym.lp[k]],
            Numeric::Dense(l) => l[(k, k)],
        }
    }

    /// Dense copy of L (permuted coordinates).
    pub fn l_dense(&self) -> Mat<f64> {
        let n = self.sym.n;
        match &self.num {
            Numeric::Dense(l) => l.clone(),
            Numeric::Sparse { li, lx } => {
                let mut m = Mat::zeros(n, n);
                for j in 0..n {
                    for p in self.sym.lp[j]..self.sym.lp[j + 1] {
                        m[(li[p], j)] = lx[p];
                    }
                }
                m
            }
        }
    }

    fn lsolve(&self, x: &mut [f64]) {
        let n = self.sym.n;
        match &self.num {
            Numeric::Sparse { li, lx } => {
                for j in 0..n {
                    let p0 = self.sym.lp[j];
                    x[j] /= lx[p0];
                    let xj = x[j];
                    for p in p0 + 1..self.sym.lp[j + 1] {
                        x[li[p]] -= lx[p] * xj;
                    }
                }
            }
            Numeric::Dense(l) => {
                for j in 0..n {
                    let col = l.col_as_slice(j);
                    x[j] /= col[j];
                    let xj = x[j];
                    for i in j + 1..n {
                        x[i] -= col[i] * xj;
                    }
                }
            }
        }
    }

    fn ltsolve(&self, x: &mut [f64]) {
        let n = self.sym.n;
        match &self.num {
            Numeric::Sparse { li, lx } => {
                for j in (0..n).rev() {
                    let p0 = self.sym.lp[j];
                    let mut s = x[j];
                    for p in p0 + 1..self.sym.lp[j + 1] {
                        s -= lx[p] * x[li[p]];
                    }
                    x[j] = s / lx[p0];
                }
            }
            Numeric::Dense(l) => {
                for j in (0..n).rev() {
                    let col = l.col_as_slice(j);
                    let mut s = x[j];
                    for i in j + 1..n {
                        s -= col[i] * x[i];
                    }
                    x[j] = s / col[j];
                }
            }
        }
    }

    fn lmul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.sym.n;
        let mut y = vec![0.0; n];
        match &self.num {
            Numeric::Sparse { li, lx } => {
                for j in 0..n {
                    for p in self.sym.lp[j]..self.sym.lp[j + 1] {
                        y[li[p]] += lx[p] * x[j];
                    }
                }
            }
            Numeric::Dense(l) => {
                for j in 0..n {
                    let col = l.col_as_slice(j);
                    for i in j..n {
                        y[i] += col[i] * x[j];
                    }
                }
            }
        }
        y
    }

    fn permute(&self, b: &[f64]) -> Vec<f64> {
        self.sym.perm.iter().map(|&p| b[p]).collect()
    }

    fn unpermute(&self, w: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.sym.n];
        for (k, &p) in self.sym.perm.iter().enumerate() {
            x[p] = w[k];
        }
        x
    }

    /// A⁻¹ b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.sym.n);
        let mut y = self.permute(b);
        self.lsolve(&mut y);
        self.ltsolve(&mut y);
        self.unpermute(&y)
    }

    /// R⁻¹ ξ with A = RᵀR, R = LᵀP; has covariance A⁻¹ when ξ is standard normal.
    pub fn solve_r(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.sym.n);
        let mut y = xi.to_vec();
        self.ltsolve(&mut y);
        self.unpermute(&y)
    }

    /// Rᵀ ξ; has covariance A when ξ is standard normal.
    pub fn mul_rt(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.sym.n);
        self.unpermute(&self.lmul(xi))
    }
}

fn numeric(sym: &Symbolic, a: &SparseSymmetric) -> Result<Numeric> {
    if sym.dense {
        return numeric_dense(sym, a);
    }
    let n = sym.n;
    let lnz = sym.lp[n];
    let mut li = vec![0usize; lnz];
    let mut lx = vec![0.0; lnz];
    let mut next: Vec<usize> = sym.lp[..n].to_vec();
    let mut x = vec![0.0; n];
    let mut mark = vec![NONE; n];
    let mut stack = vec![0; n];
    for k in 0..n {
        let top = ereach(a, &sym.perm, &sym.pinv, &sym.parent, k, &mut mark, &mut stack);
        x[k] = 0.0;
        let (cols, vals) = a.row(sym.perm[k]);
        for (&c, &v) in cols.iter().zip(vals) {
            let i = sym.pinv[c];
            if i <= k {
                x[i] = v;
            }
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &j in &stack[top..] {
            let lkj = x[j] / lx[sym.lp[j]];
            x[j] = 0.0;
            for p in sym.lp[j] + 1..next[j] {
                x[li[p]] -= lx[p] * lkj;
            }
            d -= lkj * lkj;
            let p = next[j];
            li[p] = k;
            lx[p] = lkj;
            next[j] += 1;
        }
        if !(d > 0.0) {
            return Err(Error::Factorization { index: sym.perm[k], value: d });
        }
        let p = next[k];
        li[p] = k;
        lx[p] = d.sqrt();
        next[k] += 1;
    }
    Ok(Numeric::Sparse { li, lx })
}

fn numeric_dense(sym: &Symbolic, a: &SparseSymmetric) -> Result<Numeric> {
    let n = sym.n;
    let mut c = Mat::<f64>::zeros(n, n);
    for k in 0..n {
        let (cols, vals) = a.row(sym.perm[k]);
        for (&col, &v) in cols.iter().zip(vals) {
            c[(sym.pinv[col], k)] = v;
        }
    }
    match c.llt(Side::Lower) {
        Ok(f) => {
            let mut l = f.L().to_owned();
            for j in 0..n {
                for i in 0..j {
                    l[(i, j)] = 0.0;
                }
            }
            Ok(Numeric::Dense(l))
        }
        Err(LltError::NonPositivePivot { index }) => {
            Err(Error::Factorization { index: sym.perm[index], value: f64::NAN })
        }
    }
}
