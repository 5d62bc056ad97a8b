//! Compressed sparse row storage for complex matrices, plus the handful of
//! sparse-times-dense kernels the master-equation right-hand side needs.
//!
//! Dense operands are column-major slices (the `nalgebra` layout), so a dense
//! `n x m` block `X` stores entry `(i, j)` at `X[i + j * n]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let triplets = diag.iter().enumerate().map(|(i, &v)| (i, i, v));
        Self::from_triplets(n, n, triplets)
    }

    /// Builds a matrix from `(row, col, value)` entries. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let (nr, nc) = m.shape();
        let trip = (0..nr).flat_map(|i| (0..nc).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = m[(i, j)];
            (v != ZERO).then_some((i, j, v))
        });
        Self::from_triplets(nr, nc, trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Iterates `(row, col, value)` over stored entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        if s == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch in add");
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, v * s))),
        )
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "shape mismatch in matmul");
        let mut acc = vec![ZERO; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.nrows {
            let mut cols = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for c in cols {
                if acc[c] != ZERO {
                    indices.push(c);
                    values.push(acc[c]);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (nr, nc) = (self.nrows * other.nrows, self.ncols * other.ncols);
        let trip = self.triplets().flat_map(|(r1, c1, v1)| {
            other
                .triplets()
                .map(move |(r2, c2, v2)| (r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2))
        });
        Self::from_triplets(nr, nc, trip)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^dagger|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.add_scaled(&self.adjoint(), Complex64::new(-1.0, 0.0)).max_abs()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec_acc(Complex64::new(1.0, 0.0), x, &mut y);
        y
    }

    /// `y += alpha * A x`.
    pub fn matvec_acc(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr += alpha * s;
        }
    }

    /// `out += alpha * A X` for a column-major `ncols x m` block `X`.
    pub fn mul_dense_acc(&self, alpha: Complex64, x: &[Complex64], m: usize, out: &mut [Complex64]) {
        let (n_in, n_out) = (self.ncols, self.nrows);
        debug_assert_eq!(x.len(), n_in * m);
        debug_assert_eq!(out.len(), n_out * m);
        for j in 0..m {
            let xc = &x[j * n_in..(j + 1) * n_in];
            let oc = &mut out[j * n_out..(j + 1) * n_out];
            self.matvec_acc(alpha, xc, oc);
        }
    }

    /// `out += alpha * X A^dagger` for a column-major `m x ncols` block `X`.
    /// The result is `m x nrows`.
    pub fn dense_mul_adjoint_acc(
        &self,
        alpha: Complex64,
        x: &[Complex64],
        m: usize,
        out: &mut [Complex64],
    ) {
        debug_assert_eq!(x.len(), m * self.ncols);
        debug_assert_eq!(out.len(), m * self.nrows);
        for j in 0..self.nrows {
            for k in self.indptr[j]..self.indptr[j + 1] {
                let coef = alpha * self.values[k].conj();
                let c = self.indices[k];
                let src = &x[c * m..(c + 1) * m];
                let dst = &mut out[j * m..(j + 1) * m];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }

    /// `out += alpha * X A` for a column-major `m x nrows` block `X`.
    pub fn dense_mul_acc(&self, alpha: Complex64, x: &[Complex64], m: usize, out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), m * self.nrows);
        debug_assert_eq!(out.len(), m * self.ncols);
        for r in 0..self.nrows {
            let src = &x[r * m..(r + 1) * m];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let coef = alpha * self.values[k];
                let dst = &mut out[self.indices[k] * m..(self.indices[k] + 1) * m];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            [(0, 1, c(1.0, 2.0)), (2, 0, c(-3.0, 0.5)), (1, 1, c(0.0, 1.0)), (0, 1, c(1.0, 0.0))],
        )
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.get(0, 1), c(2.0, 2.0));
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matmul_and_kron_match_dense() {
        let a = sample();
        let b = a.adjoint().add_scaled(&CsrMatrix::identity(3), c(0.5, 0.0));
        let dense = a.to_dense() * b.to_dense();
        assert!((a.matmul(&b).to_dense() - dense).norm() < 1e-14);
        let k = a.kron(&b).to_dense();
        let expected = a.to_dense().kronecker(&b.to_dense());
        assert!((k - expected).norm() < 1e-14);
    }

    #[test]
    fn dense_kernels_match_dense_products() {
        let a = sample();
        let x = DMatrix::from_fn(3, 3, |i, j| c(i as f64 - j as f64, 0.3 * (i * j) as f64));
        let alpha = c(0.7, -0.2);

        let mut out = vec![ZERO; 9];
        a.mul_dense_acc(alpha, x.as_slice(), 3, &mut out);
        let want = (a.to_dense() * &x) * alpha;
        assert!((DMatrix::from_column_slice(3, 3, &out) - want).norm() < 1e-13);

        let mut out = vec![ZERO; 9];
        a.dense_mul_adjoint_acc(alpha, x.as_slice(), 3, &mut out);
        let want = (&x * a.to_dense().adjoint()) * alpha;
        assert!((DMatrix::from_column_slice(3, 3, &out) - want).norm() < 1e-13);

        let mut out = vec![ZERO; 9];
        a.dense_mul_acc(alpha, x.as_slice(), 3, &mut out);
        let want = (&x * a.to_dense()) * alpha;
        assert!((DMatrix::from_column_slice(3, 3, &out) - want).norm() < 1e-13);
    }
}
