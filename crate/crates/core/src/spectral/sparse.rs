//! Complex compressed-sparse-row matrices.

use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{self, Write};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix { nrows, ncols, indptr, indices, values };
        m.prune();
        m
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![Complex64::new(1.0, 0.0); n] }
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        let mut m = CsrMatrix::identity(d.len());
        m.values.copy_from_slice(d);
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != ZERO {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
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

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (idx, val) = self.row(r);
        idx.binary_search(&c).map(|k| val[k]).unwrap_or(ZERO)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(r, out)| {
            let (idx, val) = self.row(r);
            *out = idx.iter().zip(val).map(|(&c, v)| v * x[c]).sum();
        });
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = next[c];
                indices[slot] = r;
                values[slot] = self.values[k].conj();
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, values }
    }

    /// Sparse product `self · other` (row-wise accumulation).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let chunk = 4096;
        let blocks: Vec<(Vec<usize>, Vec<usize>, Vec<Complex64>)> = (0..self.nrows.div_ceil(chunk))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![ZERO; other.ncols];
                let mut mark = vec![usize::MAX; other.ncols];
                let mut cols: Vec<usize> = Vec::new();
                let (mut lens, mut idx, mut vals) = (Vec::new(), Vec::new(), Vec::new());
                for r in b * chunk..((b + 1) * chunk).min(self.nrows) {
                    cols.clear();
                    let (ai, av) = self.row(r);
                    for (&k, a) in ai.iter().zip(av) {
                        let (bi, bv) = other.row(k);
                        for (&c, bval) in bi.iter().zip(bv) {
                            if mark[c] != r {
                                mark[c] = r;
                                acc[c] = ZERO;
                                cols.push(c);
                            }
                            acc[c] += a * bval;
                        }
                    }
                    cols.sort_unstable();
                    let before = idx.len();
                    for &c in &cols {
                        if acc[c] != ZERO {
                            idx.push(c);
                            vals.push(acc[c]);
                        }
                    }
                    lens.push(idx.len() - before);
                }
                (lens, idx, vals)
            })
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (lens, idx, vals) in blocks {
            for l in lens {
                indptr.push(indptr.last().unwrap() + l);
            }
            indices.extend(idx);
            values.extend(vals);
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, values }
    }

    /// `a·self + b·other`.
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, a), (other, b)] {
            for r in 0..m.nrows {
                let (idx, val) = m.row(r);
                trip.extend(idx.iter().zip(val).map(|(&c, v)| (r, c, v * s)));
            }
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Same pattern with each value replaced by `f(row, col, value)`.
    pub fn map_entries(&self, f: impl Fn(usize, usize, Complex64) -> Complex64 + Sync) -> CsrMatrix {
        let mut out = self.clone();
        out.values.par_iter_mut().zip(&self.indices).enumerate().for_each(|(i, (v, &c))| {
            let r = self.indptr.partition_point(|&start| start <= i) - 1;
            *v = f(r, c, *v);
        });
        out
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Rows `rows` and columns `cols` (each list of distinct indices), renumbered in list order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (i, &c) in cols.iter().enumerate() {
            col_map[c] = i;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            let (idx, val) = self.row(r);
            for (&c, v) in idx.iter().zip(val) {
                if col_map[c] != usize::MAX {
                    trip.push((i, col_map[c], *v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trip)
    }

    /// `max |A − A*|` over stored entries of either matrix.
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        (0..self.nrows)
            .into_par_iter()
            .map(|r| {
                let (ai, av) = self.row(r);
                let (bi, bv) = adj.row(r);
                let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
                while i < ai.len() || j < bi.len() {
                    let ca = ai.get(i).copied().unwrap_or(usize::MAX);
                    let cb = bi.get(j).copied().unwrap_or(usize::MAX);
                    let d = if ca == cb {
                        i += 1;
                        j += 1;
                        av[i - 1] - bv[j - 1]
                    } else if ca < cb {
                        i += 1;
                        av[i - 1]
                    } else {
                        j += 1;
                        bv[j - 1]
                    };
                    worst = worst.max(d.norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound for the spectral norm of a Hermitian matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).into_par_iter().map(|r| self.row(r).1.iter().map(|v| v.norm()).sum::<f64>()).reduce(|| 0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn diagonal_values(&self) -> Vec<Complex64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut d = vec![ZERO; self.nrows * self.ncols];
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, v) in idx.iter().zip(val) {
                d[r * self.ncols + c] = *v;
            }
        }
        d
    }

    /// Matrix Market coordinate format; Hermitian matrices may be written with `hermitian`
    /// symmetry (lower triangle only).
    pub fn write_matrix_market(&self, mut w: impl Write, hermitian: bool) -> io::Result<()> {
        let sym = if hermitian { "hermitian" } else { "general" };
        writeln!(w, "%%MatrixMarket matrix coordinate complex {sym}")?;
        let keep = |r: usize, c: usize| !hermitian || c <= r;
        let count = (0..self.nrows).map(|r| self.row(r).0.iter().filter(|&&c| keep(r, c)).count()).sum::<usize>();
        writeln!(w, "{} {} {}", self.nrows, self.ncols, count)?;
        for r in 0..self.nrows {
            let (idx, val) = self.row(r);
            for (&c, v) in idx.iter().zip(val) {
                if keep(r, c) {
                    writeln!(w, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

/// A square matrix checked to be Hermitian within `1e-12 · max|A|`.
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    matrix: CsrMatrix,
    defect: f64,
}

impl SparseHermitian {
    pub fn new(matrix: CsrMatrix) -> Result<Self, f64> {
        let defect = matrix.hermitian_defect();
        if defect > 1e-12 * matrix.max_abs() {
            return Err(defect);
        }
        Ok(SparseHermitian { matrix, defect })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.defect
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matrix.matvec(x)
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matrix.matvec_into(x, y)
    }
}
