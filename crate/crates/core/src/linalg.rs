//! Dense symmetric eigendecomposition and Cholesky solves, backed by
//! nalgebra, with conversions from the ndarray types used elsewhere.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use ndarray::{Array1, Array2};

use crate::error::{HeatGeoError, Result};
use crate::sparse::SparseSymMatrix;

pub struct SymEig {
    /// Eigenvalues in ascending order.
    pub values: Array1<f64>,
    /// Matching eigenvectors as columns.
    pub vectors: Array2<f64>,
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn eigh(a: &Array2<f64>) -> Result<SymEig> {
    if a.nrows() != a.ncols() {
        return Err(HeatGeoError::parameter("eigh requires a square matrix"));
    }
    let n = a.nrows();
    let eig = SymmetricEigen::new(to_nalgebra(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HeatGeoError::numerical(
            "eigh",
            "non-finite eigenvalue".to_string(),
        ));
    }
    Ok(SymEig { values, vectors })
}

pub struct CholeskyFactor {
    inner: Cholesky<f64, Dyn>,
}

impl CholeskyFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        Cholesky::new(to_nalgebra(a))
            .map(|inner| CholeskyFactor { inner })
            .ok_or_else(|| {
                HeatGeoError::numerical("cholesky", "matrix is not positive definite".to_string())
            })
    }

    /// Solve `A X = B` for a dense right-hand-side block.
    pub fn solve_matrix(&self, b: &Array2<f64>) -> Array2<f64> {
        let sol = self.inner.solve(&to_nalgebra(b));
        from_nalgebra(&sol)
    }
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let chol = Cholesky::new(to_nalgebra(a)).ok_or_else(|| {
        HeatGeoError::numerical("cholesky", "matrix is not positive definite".to_string())
    })?;
    Ok(from_nalgebra(&chol.inverse()))
}

/// Largest-eigenvalue estimate of a PSD sparse matrix by a fixed number of
/// power-iteration steps from a deterministic start vector.
pub fn power_iteration_lambda_max(m: &SparseSymMatrix, steps: usize) -> f64 {
    let n = m.dim();
    // Hash-mixed start so no low-order polynomial in the index (and hence
    // no common eigenvector shape) is orthogonal to it.
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let mut x = (i as u64).wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xD1B54A32D192ED03);
            x ^= x >> 31;
            x = x.wrapping_mul(0xBF58476D1CE4E5B9);
            x ^= x >> 29;
            1.0 + (x % 1024) as f64 / 1024.0
        })
        .collect();
    let mut w = vec![0.0; n];
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..steps {
        m.matvec(&v, &mut w);
        lambda = dot(&v, &w);
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lambda.max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}
