use std::sync::Arc;

use nalgebra::DMatrix;

/// Compressed sparse row matrix. Matrices built on the same mesh share their
/// sparsity pattern, so linear combinations are element-wise on `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub(crate) pattern: Arc<Pattern>,
    pub(crate) values: Vec<f64>,
    symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col.extend(r);
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    /// Slot of entry `(i, j)`, if present.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

impl CsrMatrix {
    pub fn new(pattern: Arc<Pattern>, values: Vec<f64>, symmetric: bool) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self { pattern, values, symmetric }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Pattern { n, row_ptr: (0..=n).collect(), col: (0..n).collect() };
        Self::new(Arc::new(pattern), vec![1.0; n], true)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let rows = (0..n).map(|i| (0..n).filter(|&j| m[(i, j)] != 0.0).collect()).collect();
        let pattern = Pattern::from_rows(rows);
        let mut values = Vec::with_capacity(pattern.nnz());
        for i in 0..n {
            for &j in &pattern.col[pattern.row_ptr[i]..pattern.row_ptr[i + 1]] {
                values.push(m[(i, j)]);
            }
        }
        let symmetric = m == &m.transpose();
        Self::new(Arc::new(pattern), values, symmetric)
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    /// Iterates `(column, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.values[k] * x[p.col[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `alpha * self + beta * other` on a shared pattern.
    pub fn combine(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern, "pattern mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        CsrMatrix::new(self.pattern.clone(), values, self.symmetric && other.symmetric)
    }

    pub fn scaled(&self, c: f64) -> CsrMatrix {
        CsrMatrix::new(self.pattern.clone(), self.values.iter().map(|v| c * v).collect(), self.symmetric)
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                s += xi * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>();
            }
        }
        s
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}
