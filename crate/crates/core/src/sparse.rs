//! Compressed sparse rows, weighted Gram products and a sparse Cholesky
//! wrapper around `faer`.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn new(ncols: usize) -> Self {
        Csr {
            ncols,
            indptr: vec![0],
            indices: vec![],
            data: vec![],
        }
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Appends a row, summing duplicate column entries.
    pub fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in entries.iter() {
            debug_assert!(c < self.ncols);
            if last == Some(c) {
                *self.data.last_mut().unwrap() += v;
            } else {
                self.indices.push(c);
                self.data.push(v);
                last = Some(c);
            }
        }
        self.indptr.push(self.indices.len());
        entries.clear();
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `Aᵀ y`.
    pub fn tmatvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, yi) in y.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&c, v) in c.iter().zip(v) {
                out[c] += v * yi;
            }
        }
        out
    }
}

/// Lower triangle of a symmetric matrix in compressed-column form with
/// sorted row indices.
#[derive(Debug, Clone)]
pub struct LowerCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Lower triangle of `Σ_b A_bᵀ diag(w_b) A_b` for row-stacked blocks sharing
/// one column space.
pub fn weighted_gram(blocks: &[(&Csr, &[f64])]) -> LowerCsc {
    let n = blocks[0].0.ncols;
    let mut col_count = vec![0usize; n + 1];
    for (a, _) in blocks {
        for &c in &a.indices {
            col_count[c + 1] += 1;
        }
    }
    for c in 0..n {
        col_count[c + 1] += col_count[c];
    }
    let total = col_count[n];
    let mut fill = col_count.clone();
    let mut entries = vec![(0u32, 0usize, 0.0f64); total];
    for (bi, (a, _)) in blocks.iter().enumerate() {
        for r in 0..a.nrows() {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                entries[fill[c]] = (bi as u32, r, v);
                fill[c] += 1;
            }
        }
    }
    let mut acc = vec![0.0f64; n];
    let mut mark = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    for c in 0..n {
        for &(bi, r, v) in &entries[col_count[c]..col_count[c + 1]] {
            let (a, w) = blocks[bi as usize];
            let wv = w[r] * v;
            let (cols, vals) = a.row(r);
            for (&c2, &v2) in cols.iter().zip(vals) {
                if c2 < c {
                    continue;
                }
                if mark[c2] != c {
                    mark[c2] = c;
                    acc[c2] = 0.0;
                    touched.push(c2);
                }
                acc[c2] += wv * v2;
            }
        }
        touched.sort_unstable();
        for &c2 in &touched {
            row_idx.push(c2);
            values.push(acc[c2]);
        }
        touched.clear();
        col_ptr.push(row_idx.len());
    }
    LowerCsc {
        n,
        col_ptr,
        row_idx,
        values,
    }
}

impl LowerCsc {
    /// Adds `s` to every diagonal entry present in the pattern.
    pub fn add_to_diagonal(&mut self, s: f64) {
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.row_idx[k] == c {
                    self.values[k] += s;
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                y[r] += self.values[k] * x[c];
                if r != c {
                    y[c] += self.values[k] * x[r];
                }
            }
        }
        y
    }
}

/// Sparse Cholesky factor with a reusable symbolic analysis.
pub struct Cholesky {
    symbolic: SymbolicLlt<usize>,
    numeric: Llt<usize, f64>,
}

impl Cholesky {
    /// Factors `m`, reusing `previous`'s symbolic analysis when given (the
    /// sparsity pattern must then be identical).
    pub fn factor(m: &LowerCsc, previous: Option<&Cholesky>) -> Result<Self> {
        let sym = SymbolicSparseColMatRef::new_checked(m.n, m.n, &m.col_ptr, None, &m.row_idx);
        let mat = SparseColMatRef::new(sym, &m.values);
        let symbolic = match previous {
            Some(p) => p.symbolic.clone(),
            None => SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?,
        };
        let numeric = Llt::try_new_with_symbolic(symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Cholesky { symbolic, numeric })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.numeric.solve_in_place(b.as_mut());
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_dense_product() {
        let mut a = Csr::new(4);
        a.push_row(&mut vec![(0, 1.0), (2, 2.0), (0, 0.5)]);
        a.push_row(&mut vec![(1, -1.0), (3, 3.0)]);
        a.push_row(&mut vec![(2, 1.0), (3, 1.0), (1, 2.0)]);
        let mut b = Csr::new(4);
        for c in 0..4 {
            b.push_row(&mut vec![(c, 1.0)]);
        }
        let wa = [1.0, 2.0, 0.5];
        let wb = [0.1; 4];
        let g = weighted_gram(&[(&a, &wa), (&b, &wb)]);
        let dense = |i: usize, j: usize| {
            let mut s = 0.0;
            for r in 0..3 {
                let row = |c: usize| {
                    let (cols, vals) = a.row(r);
                    cols.iter().zip(vals).find(|(k, _)| **k == c).map(|(_, v)| *v).unwrap_or(0.0)
                };
                s += wa[r] * row(i) * row(j);
            }
            s + if i == j { 0.1 } else { 0.0 }
        };
        for c in 0..4 {
            for k in g.col_ptr[c]..g.col_ptr[c + 1] {
                assert!(g.row_idx[k] >= c);
                assert!((g.values[k] - dense(g.row_idx[k], c)).abs() < 1e-14);
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = g.matvec(&x);
        for i in 0..4 {
            let e: f64 = (0..4).map(|j| dense(i, j) * x[j]).sum();
            assert!((y[i] - e).abs() < 1e-12);
        }
        let chol = Cholesky::factor(&g, None).unwrap();
        let z = chol.solve(&y);
        for i in 0..4 {
            assert!((z[i] - x[i]).abs() < 1e-10);
        }
        let again = Cholesky::factor(&g, Some(&chol)).unwrap();
        assert!((again.solve(&y)[3] - 3.0).abs() < 1e-10);
    }
}
