//! Weighted k-NN graphs from point clouds and the Laplacian variants built
//! on them.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeatGeoError, Result};
use crate::sparse::SparseSymMatrix;

/// Smallest admissible adaptive bandwidth; duplicate points would otherwise
/// produce a zero kernel scale.
pub const BANDWIDTH_FLOOR: f64 = 1e-12;

/// An n x d set of observations with optional per-point labels and
/// timepoint tags.
#[derive(Debug, Clone)]
pub struct PointCloud {
    data: Array2<f64>,
    labels: Option<Vec<i64>>,
    timepoints: Option<Vec<i64>>,
}

impl PointCloud {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        Self::with_tags(data, None, None)
    }

    pub fn with_tags(
        data: Array2<f64>,
        labels: Option<Vec<i64>>,
        timepoints: Option<Vec<i64>>,
    ) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(HeatGeoError::parameter(format!(
                "point cloud needs at least 2 points, got {n}"
            )));
        }
        if d < 1 {
            return Err(HeatGeoError::parameter("point cloud needs at least 1 dimension"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(HeatGeoError::parameter("point cloud contains non-finite values"));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(HeatGeoError::parameter("label count does not match point count"));
            }
        }
        if let Some(t) = &timepoints {
            if t.len() != n {
                return Err(HeatGeoError::parameter(
                    "timepoint count does not match point count",
                ));
            }
        }
        Ok(PointCloud {
            data,
            labels,
            timepoints,
        })
    }

    pub fn n_points(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn timepoints(&self) -> Option<&[i64]> {
        self.timepoints.as_deref()
    }

    /// Sub-cloud restricted to `indices`, keeping label/timepoint tags.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let data = Array2::from_shape_fn((indices.len(), self.n_dims()), |(r, c)| {
            self.data[[indices[r], c]]
        });
        let pick = |v: &Option<Vec<i64>>| {
            v.as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect::<Vec<_>>())
        };
        PointCloud::with_tags(data, pick(&self.labels), pick(&self.timepoints))
    }
}

/// Kernel bandwidth for the Gaussian k-NN graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Fixed scale: `w_ij = exp(-||x_i - x_j||^2 / eps)`.
    Fixed(f64),
    /// Per-pair scale `eps_ij = sigma_i * sigma_j` with `sigma_i` the
    /// distance from `x_i` to its k-th neighbor.
    Adaptive,
}

/// k-NN graph build output: the symmetric adjacency plus diagnostics.
#[derive(Debug, Clone)]
pub struct KnnGraph {
    pub adjacency: SparseSymMatrix,
    /// Number of connected components (1 means connected). Disconnection is
    /// reported, not enforced.
    pub num_components: usize,
    /// How many adaptive bandwidths hit the floor (duplicate points).
    pub floored_bandwidths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplacianKind {
    Combinatorial,
    SymmetricNormalized,
    RandomWalk,
}

/// A graph Laplacian. `RandomWalk` keeps the symmetric normalized core and
/// the degree vector; `L_rw = Q^{-1/2} L_sym Q^{1/2}`, so heat kernels for
/// it are obtained from the symmetric one by the same similarity transform.
#[derive(Debug, Clone)]
pub struct Laplacian {
    kind: LaplacianKind,
    matrix: SparseSymMatrix,
    degrees: Array1<f64>,
}

impl Laplacian {
    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    /// The symmetric matrix actually stored: the Laplacian itself for
    /// `Combinatorial` and `SymmetricNormalized`, the symmetric normalized
    /// core for `RandomWalk`.
    pub fn core(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Squared Euclidean distances between all rows, parallel over rows.
pub fn pairwise_sq_dists(points: &Array2<f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    out.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let xi = points.row(i);
            for j in 0..n {
                let xj = points.row(j);
                let mut s = 0.0;
                for (a, b) in xi.iter().zip(xj.iter()) {
                    let d = a - b;
                    s += d * d;
                }
                row[j] = s;
            }
        });
    out
}

/// Indices of the k nearest neighbors of every point (self excluded), plus
/// the distance to the k-th neighbor. Ties break by index.
fn knn_sets(sq: &Array2<f64>, k: usize) -> (Vec<Vec<usize>>, Vec<f64>) {
    let n = sq.nrows();
    let per_point: Vec<(Vec<usize>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_unstable_by(|&a, &b| {
                sq[[i, a]].total_cmp(&sq[[i, b]]).then(a.cmp(&b))
            });
            order.truncate(k);
            let kth = sq[[i, order[k - 1]]].sqrt();
            (order, kth)
        })
        .collect();
    let mut neighbors = Vec::with_capacity(n);
    let mut kth = Vec::with_capacity(n);
    for (nb, d) in per_point {
        neighbors.push(nb);
        kth.push(d);
    }
    (neighbors, kth)
}

/// Gaussian-weighted k-NN adjacency, symmetrized by the elementwise max of
/// the directed kernels (every directed neighbor edge is kept).
pub fn build_knn_graph(points: &PointCloud, k: usize, bandwidth: Bandwidth) -> Result<KnnGraph> {
    let n = points.n_points();
    if k == 0 || k >= n {
        return Err(HeatGeoError::parameter(format!(
            "k must satisfy 1 <= k < n, got k={k}, n={n}"
        )));
    }
    if let Bandwidth::Fixed(eps) = bandwidth {
        if !(eps > 0.0) {
            return Err(HeatGeoError::parameter("bandwidth must be positive"));
        }
    }

    let sq = pairwise_sq_dists(points.data());
    let (neighbors, kth) = knn_sets(&sq, k);

    let mut floored = 0usize;
    let sigma: Vec<f64> = kth
        .iter()
        .map(|&d| {
            if d < BANDWIDTH_FLOOR {
                floored += 1;
                BANDWIDTH_FLOOR
            } else {
                d
            }
        })
        .collect();

    let weight = |i: usize, j: usize| -> f64 {
        let eps = match bandwidth {
            Bandwidth::Fixed(e) => e,
            Bandwidth::Adaptive => sigma[i] * sigma[j],
        };
        (-sq[[i, j]] / eps).exp()
    };

    // Union of directed edges; the Gaussian kernel is symmetric in (i, j),
    // so max-symmetrization reduces to keeping every directed edge once.
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * k);
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for (i, j) in edges {
        let w = weight(i, j);
        triplets.push((i, j, w));
        triplets.push((j, i, w));
    }
    let adjacency = SparseSymMatrix::from_triplets(n, &triplets)?;
    let num_components = adjacency.num_components();
    Ok(KnnGraph {
        adjacency,
        num_components,
        floored_bandwidths: floored,
    })
}

/// Same k-NN edge set, but weighted by ambient Euclidean length instead of
/// the Gaussian kernel. Input to the shortest-path baseline.
pub fn knn_edge_lengths(points: &PointCloud, k: usize) -> Result<SparseSymMatrix> {
    let n = points.n_points();
    if k == 0 || k >= n {
        return Err(HeatGeoError::parameter(format!(
            "k must satisfy 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let sq = pairwise_sq_dists(points.data());
    let (neighbors, _) = knn_sets(&sq, k);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * k);
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            edges.push((i.min(j), i.max(j)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for (i, j) in edges {
        let d = sq[[i, j]].sqrt();
        triplets.push((i, j, d));
        triplets.push((j, i, d));
    }
    SparseSymMatrix::from_triplets(n, &triplets)
}

/// Laplacian of a symmetric adjacency with strictly positive degrees.
pub fn laplacian(adjacency: &SparseSymMatrix, kind: LaplacianKind) -> Result<Laplacian> {
    let n = adjacency.dim();
    let degrees = adjacency.degrees();
    if let Some((i, _)) = degrees.iter().enumerate().find(|(_, &d)| d <= 0.0) {
        return Err(HeatGeoError::IsolatedVertex(i));
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(adjacency.nnz() + n);
    match kind {
        LaplacianKind::Combinatorial => {
            for (i, j, w) in adjacency.entries() {
                if i != j {
                    triplets.push((i, j, -w));
                }
            }
            for i in 0..n {
                triplets.push((i, i, degrees[i] - adjacency.get(i, i)));
            }
        }
        // RandomWalk stores the symmetric normalized core; see `Laplacian`.
        LaplacianKind::SymmetricNormalized | LaplacianKind::RandomWalk => {
            for (i, j, w) in adjacency.entries() {
                if i != j {
                    triplets.push((i, j, -w / (degrees[i] * degrees[j]).sqrt()));
                }
            }
            for i in 0..n {
                triplets.push((i, i, 1.0 - adjacency.get(i, i) / degrees[i]));
            }
        }
    }
    let matrix = SparseSymMatrix::from_triplets(n, &triplets)?;
    Ok(Laplacian {
        kind,
        matrix,
        degrees,
    })
}
