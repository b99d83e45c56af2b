//! Structurally symmetric sparse matrices in CSR form.
//!
//! The same storage backs adjacency matrices (nonnegative weights, zero
//! diagonal) and graph Laplacians (signed entries, nonzero diagonal). The
//! sparsity pattern is always symmetric; numeric symmetry is checked where
//! an operation requires it.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{HeatGeoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from `(row, col, value)` triplets. Both orientations of every
    /// off-diagonal entry must be present; duplicates are rejected.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(HeatGeoError::parameter("matrix dimension must be positive"));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(HeatGeoError::parameter(format!(
                    "triplet ({r}, {c}) out of bounds for dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(HeatGeoError::parameter(format!(
                    "non-finite value at ({r}, {c})"
                )));
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(HeatGeoError::parameter(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let values: Vec<f64> = entries.iter().map(|e| e.2).collect();

        let m = SparseSymMatrix {
            dim,
            row_ptr,
            col_idx,
            values,
        };
        if !m.pattern_is_symmetric() {
            return Err(HeatGeoError::parameter(
                "sparsity pattern is not symmetric".to_string(),
            ));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(col, value)` pairs, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// All stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    fn pattern_is_symmetric(&self) -> bool {
        self.entries().all(|(i, j, _)| {
            let lo = self.row_ptr[j];
            let hi = self.row_ptr[j + 1];
            self.col_idx[lo..hi].binary_search(&i).is_ok()
        })
    }

    /// Numeric symmetry within `tol`, entrywise.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.entries()
            .all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// Row sums (degrees, when this is an adjacency matrix).
    pub fn degrees(&self) -> Array1<f64> {
        Array1::from_iter((0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()))
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            out[i] = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Dense product `self * b`, parallel over output rows. Row results do
    /// not depend on thread count.
    pub fn matmul_dense(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(b.nrows(), self.dim);
        let cols = b.ncols();
        let mut out = Array2::<f64>::zeros((self.dim, cols));
        out.outer_iter_mut()
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                for (j, v) in self.row(i) {
                    let bj = b.row(j);
                    for c in 0..cols {
                        row[c] += v * bj[c];
                    }
                }
            });
        out
    }

    /// `(self - I) * b`, the shifted product used by the Chebyshev recurrence.
    pub fn shifted_matmul_dense(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut out = self.matmul_dense(b);
        out -= b;
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.dim, self.dim));
        for (i, j, v) in self.entries() {
            m[[i, j]] = v;
        }
        m
    }

    /// Scale every entry by `alpha`.
    pub fn scaled(&self, alpha: f64) -> SparseSymMatrix {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= alpha;
        }
        m
    }

    /// Component id per vertex, treating any stored off-diagonal entry with
    /// nonzero value as an edge.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.dim];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.dim {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for (v, w) in self.row(u) {
                    if v != u && w != 0.0 && comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn num_components(&self) -> usize {
        self.connected_components()
            .into_iter()
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Sizes of the connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let comp = self.connected_components();
        let n = comp.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; n];
        for c in comp {
            sizes[c] += 1;
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SparseSymMatrix {
        SparseSymMatrix::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)])
            .unwrap()
    }

    #[test]
    fn triplets_roundtrip() {
        let m = path3();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 2), 2.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn asymmetric_pattern_rejected() {
        let err = SparseSymMatrix::from_triplets(2, &[(0, 1, 1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_rejected() {
        let err = SparseSymMatrix::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let m = path3();
        let x = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        m.matvec(&x, &mut out);
        assert_eq!(out, [2.0, 7.0, 4.0]);
    }

    #[test]
    fn matmul_matches_dense_product() {
        let m = path3();
        let b = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let got = m.matmul_dense(&b);
        let want = m.to_dense().dot(&b);
        assert!(got.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn components_found() {
        let m = SparseSymMatrix::from_triplets(
            4,
            &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(m.num_components(), 2);
        assert_eq!(m.component_sizes(), vec![2, 2]);
    }
}
