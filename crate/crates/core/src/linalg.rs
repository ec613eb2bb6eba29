//! Dense vector helpers and a compressed sparse row matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Row-major sparse matrix. Column indices within a row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists.
    ///
    /// Panics if a column index is out of range or a row is not strictly increasing;
    /// callers validate untrusted input before getting here.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                assert!(j < cols, "column index {j} out of range for {cols} columns");
                assert!(
                    prev.is_none_or(|p| p < j),
                    "row indices must be strictly increasing"
                );
                prev = Some(j);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    /// Square diagonal matrix with the given entries (zeros are stored implicitly).
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| if v != 0.0 { vec![(i, v)] } else { Vec::new() })
            .collect();
        Self::from_rows(diag.len(), &rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Returns a copy restricted to the first `rows` rows and first `cols` columns.
    pub fn truncate(&self, rows: usize, cols: usize) -> Self {
        let rows = rows.min(self.rows);
        let kept: Vec<Vec<(usize, f64)>> = (0..rows)
            .map(|i| self.row(i).filter(|&(j, _)| j < cols).collect())
            .collect();
        Self::from_rows(cols, &kept)
    }

    /// Same entries with a wider column space.
    pub fn with_cols(&self, cols: usize) -> Self {
        assert!(cols >= self.cols);
        Self {
            cols,
            ..self.clone()
        }
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `A^T u`
    pub fn t_matvec(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * ui;
            }
        }
    }

    /// If the matrix is square with every nonzero on the diagonal, returns the diagonal.
    pub fn diagonal(&self) -> Option<Vec<f64>> {
        if self.rows != self.cols {
            return None;
        }
        let mut diag = vec![0.0; self.rows];
        for (i, d) in diag.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                if j != i {
                    return None;
                }
                *d = v;
            }
        }
        Some(diag)
    }
}

/// Outcome of [`largest_eigenvalue_ata`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of `A^T A` by power iteration.
///
/// Stops once the Rayleigh quotient changes by less than `rel_tol` (relative) or after
/// `max_iters` products. The start vector is drawn from a fixed-seed generator so the
/// estimate is reproducible.
pub fn largest_eigenvalue_ata(a: &CsrMatrix, rel_tol: f64, max_iters: usize) -> PowerIteration {
    let n = a.cols();
    if n == 0 || a.nnz() == 0 {
        return PowerIteration {
            eigenvalue: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_a7a);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut prev = 0.0;
    for it in 1..=max_iters {
        a.matvec(&v, &mut av);
        a.t_matvec(&av, &mut w);
        // v has unit norm, so v^T A^T A v = ||A v||^2
        let rq = norm_sq(&av);
        let nw = norm(&w);
        if nw == 0.0 {
            return PowerIteration {
                eigenvalue: rq,
                iterations: it,
                converged: true,
            };
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if it > 1 && (rq - prev).abs() <= rel_tol * rq.abs() {
            return PowerIteration {
                eigenvalue: rq,
                iterations: it,
                converged: true,
            };
        }
        prev = rq;
    }
    PowerIteration {
        eigenvalue: prev,
        iterations: max_iters,
        converged: false,
    }
}
