//! Symmetric sparse matrices in compressed-row form.
//!
//! Both triangles are stored so that row access is cheap, but every builder
//! takes one value per unordered pair and mirrors it, so A[i][j] and A[j][i]
//! are always the same float.

use std::io::Write;

use faer::Mat;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from (i, j, v) triplets, one per unordered pair; duplicates are summed,
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return invalid(format!("entry ({i},{j}) out of range for n={n}"));
            }
            if !v.is_finite() {
                return invalid(format!("non-finite value at ({i},{j})"));
            }
            upper.push((i.min(j), i.max(j), v));
        }
        upper.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.len());
        for t in upper {
            match merged.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        Ok(Self::from_sorted_upper(n, &merged))
    }

    fn from_sorted_upper(n: usize, upper: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; n];
        for &(i, j, _) in upper {
            count[i] += 1;
            if i != j {
                count[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + count[i];
        }
        let nnz = row_ptr[n];
        let mut col = vec![0usize; nnz];
        let mut val = vec![0.0; nnz];
        let mut next = row_ptr.clone();
        // Lower-triangle entries of row j arrive in increasing i because the input
        // is sorted by i, and upper entries of row i arrive in increasing j.
        for &(i, j, v) in upper {
            if i != j {
                let p = next[j];
                col[p] = i;
                val[p] = v;
                next[j] += 1;
            }
        }
        for &(i, j, v) in upper {
            let p = next[i];
            col[p] = j;
            val[p] = v;
            next[i] += 1;
        }
        SparseSymmetric { n, row_ptr, col, val }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &v)| (i, i, v)).collect();
        Self::from_sorted_upper(d.len(), &t)
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_sorted_upper(n, &[])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries counting both triangles.
    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|p| v[p]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Each unordered pair once, as (i, j, v) with i <= j.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j >= i {
                    out.push((i, j, x));
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// A + diag(d).
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut t = self.upper_triplets();
        t.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Self::from_triplets(self.n, &t).expect("dimensions already checked")
    }

    /// diag(d) A diag(d).
    pub fn scale_sym(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let t: Vec<_> = self.upper_triplets().into_iter().map(|(i, j, v)| (i, j, d[i] * v * d[j])).collect();
        Self::from_triplets(self.n, &t).expect("dimensions already checked")
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.val.iter_mut().for_each(|v| *v *= c);
        if c == 0.0 {
            return Self::zeros(self.n);
        }
        out
    }

    /// A + B.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = self.upper_triplets();
        t.extend(other.upper_triplets());
        Self::from_triplets(self.n, &t).expect("dimensions already checked")
    }

    /// A·B for matrices known to commute (e.g. powers of one matrix), so the
    /// product is symmetric; only its upper triangle is computed and mirrored.
    fn mul_commuting(&self, other: &Self) -> Self {
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut t = Vec::new();
        for i in 0..n {
            touched.clear();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if j < i {
                        continue;
                    }
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                t.push((i, j, acc[j]));
            }
        }
        Self::from_triplets(n, &t).expect("dimensions already checked")
    }

    /// A^p for integer p >= 0.
    pub fn pow(&self, p: u32) -> Self {
        let mut out = Self::identity(self.n);
        for _ in 0..p {
            out = out.mul_commuting(self);
        }
        out
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                m[(i, j)] = x;
            }
        }
        m
    }

    /// Symmetric Matrix Market coordinate format (lower triangle, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        let t = self.upper_triplets();
        writeln!(w, "{} {} {}", self.n, self.n, t.len())?;
        for (i, j, v) in t {
            writeln!(w, "{} {} {:e}", j + 1, i + 1, v)?;
        }
        Ok(())
    }
}
