//! Heat-geodesic manifold embeddings for point clouds.
//!
//! The pipeline builds a weighted k-NN graph, approximates the graph heat
//! kernel `H_t = exp(-t L)`, converts it into a geodesic-like dissimilarity
//! (log-kernel with a volume correction from the diagonal), optionally
//! denoises via triplet distances, and embeds with stress-minimizing MDS.
//!
//! The crate also ships the comparison distances (diffusion-map distance,
//! potential distance, multiscale random-walk kernel), synthetic datasets
//! with analytic ground-truth geodesics, and the evaluation metrics used to
//! benchmark them.

pub mod datasets;
pub mod distance;
pub mod embedding;
mod error;
pub mod graph;
pub mod heat;
pub mod io;
pub mod knee;
pub(crate) mod linalg;
pub mod metrics;
pub mod sparse;

pub use error::{HeatGeoError, Result};
pub use graph::{Bandwidth, KnnGraph, Laplacian, LaplacianKind, PointCloud};
pub use sparse::SparseSymMatrix;
