//! Metric MDS (classic initialization plus SMACOF stress majorization,
//! optionally heat-kernel weighted) and the end-to-end embedding pipeline.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{
    heat_geodesic, heat_geodesic_squared, interpolate, row_l2_distances, DistanceMatrix,
    HarnackParams,
};
use crate::error::{HeatGeoError, Result};
use crate::graph::{build_knn_graph, laplacian, Bandwidth, LaplacianKind, PointCloud};
use crate::heat::{chebyshev_heat, log_time_grid, select_time_knee};
use crate::linalg::{eigh, spd_inverse};

#[derive(Debug, Clone)]
pub struct Embedding {
    /// n x k coordinates.
    pub coords: Array2<f64>,
    /// Final weighted stress, square root of the summed squared residuals
    /// over unordered pairs.
    pub stress: f64,
    /// Stress per iteration, starting from the initial configuration.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Set when the input was degenerate (all-zero dissimilarities).
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct MdsConfig {
    pub dim: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Optional symmetric nonnegative weights with positive row sums.
    pub weights: Option<Array2<f64>>,
    pub seed: u64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        MdsConfig {
            dim: 2,
            max_iters: 300,
            rel_tol: 1e-6,
            weights: None,
            seed: 0,
        }
    }
}

/// Weighted stress: sqrt of `sum_{i<j} w_ij (d_ij - ||y_i - y_j||)^2`.
pub fn stress(d: &DistanceMatrix, coords: &Array2<f64>, weights: Option<&Array2<f64>>) -> f64 {
    let n = d.dim();
    let m = d.matrix();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..i {
            let mut sq = 0.0;
            for c in 0..coords.ncols() {
                let diff = coords[[i, c]] - coords[[j, c]];
                sq += diff * diff;
            }
            let resid = m[[i, j]] - sq.sqrt();
            let w = weights.map_or(1.0, |w| w[[i, j]]);
            total += w * resid * resid;
        }
    }
    total.sqrt()
}

/// Classic MDS: double-center the squared dissimilarities and embed with
/// the top-k eigenpairs. Deterministic; each axis is sign-fixed so its
/// largest-magnitude entry is positive.
pub fn classic_mds(d: &DistanceMatrix, dim: usize) -> Result<Embedding> {
    let n = d.dim();
    if dim < 1 {
        return Err(HeatGeoError::parameter("output dimension must be at least 1"));
    }
    if n < dim + 1 {
        return Err(HeatGeoError::parameter(format!(
            "classic MDS needs n >= k + 1, got n={n}, k={dim}"
        )));
    }
    if d.matrix().iter().all(|&v| v == 0.0) {
        return Ok(Embedding {
            coords: Array2::zeros((n, dim)),
            stress: 0.0,
            trace: vec![0.0],
            converged: true,
            degenerate: true,
        });
    }

    // B = -1/2 J D^2 J via double centering.
    let sq = d.matrix().mapv(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            b[[i, j]] = -0.5 * (sq[[i, j]] - row_means[i] - row_means[j] + grand);
        }
    }

    let eig = eigh(&b)?;
    // Eigenvalues ascend; take the top `dim`, clamping negatives to zero.
    let mut coords = Array2::<f64>::zeros((n, dim));
    for c in 0..dim {
        let src = n - 1 - c;
        let lambda = eig.values[src].max(0.0);
        let scale = lambda.sqrt();
        for i in 0..n {
            coords[[i, c]] = eig.vectors[[i, src]] * scale;
        }
    }
    for c in 0..dim {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = coords[[i, c]].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if coords[[best, c]] < 0.0 {
            coords.column_mut(c).mapv_inplace(|v| -v);
        }
    }

    let s = stress(d, &coords, None);
    Ok(Embedding {
        coords,
        stress: s,
        trace: vec![s],
        converged: true,
        degenerate: false,
    })
}

fn validate_weights(weights: &Array2<f64>, n: usize) -> Result<()> {
    if weights.dim() != (n, n) {
        return Err(HeatGeoError::parameter("weight matrix dimension mismatch"));
    }
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let w = weights[[i, j]];
            if !w.is_finite() || w < 0.0 {
                return Err(HeatGeoError::parameter(format!(
                    "weight ({i}, {j}) is {w}"
                )));
            }
            if (w - weights[[j, i]]).abs() > 1e-8 {
                return Err(HeatGeoError::parameter("weight matrix is not symmetric"));
            }
            if i != j {
                row_sum += w;
            }
        }
        if row_sum <= 0.0 {
            return Err(HeatGeoError::parameter(format!(
                "weight row {i} sums to zero"
            )));
        }
    }
    Ok(())
}

/// SMACOF stress majorization. Starts from `init` or the classic-MDS
/// configuration; the stress trace is non-increasing by the majorization
/// guarantee.
pub fn smacof(d: &DistanceMatrix, cfg: &MdsConfig, init: Option<&Array2<f64>>) -> Result<Embedding> {
    let n = d.dim();
    let dim = cfg.dim;
    if let Some(w) = &cfg.weights {
        validate_weights(w, n)?;
    }

    let mut coords = match init {
        Some(c) => {
            if c.dim() != (n, dim) {
                return Err(HeatGeoError::parameter("init coordinate shape mismatch"));
            }
            c.clone()
        }
        None => classic_mds(d, dim)?.coords,
    };
    perturb_degenerate_ties(d, &mut coords, cfg.seed);

    // Pseudo-inverse of V = diag(W 1) - W for the weighted Guttman
    // transform: (V + 11^T/n)^{-1} - 11^T/n. Uniform weights reduce to the
    // 1/n scaling.
    let v_pinv: Option<Array2<f64>> = match &cfg.weights {
        None => None,
        Some(w) => {
            let mut v = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    if i != j {
                        v[[i, j]] = -w[[i, j]];
                        s += w[[i, j]];
                    }
                }
                v[[i, i]] = s;
            }
            let shift = 1.0 / n as f64;
            for i in 0..n {
                for j in 0..n {
                    v[[i, j]] += shift;
                }
            }
            let mut inv = spd_inverse(&v)?;
            for i in 0..n {
                for j in 0..n {
                    inv[[i, j]] -= shift;
                }
            }
            Some(inv)
        }
    };

    let weights = cfg.weights.as_ref();
    let dmat = d.matrix();
    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut prev = stress(d, &coords, weights);
    trace.push(prev);
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        // B(X): b_ij = -w_ij d_ij / delta_ij off the diagonal, rows sum to 0.
        let delta = embedded_distances(&coords);
        let mut b = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let de = delta[[i, j]];
                if de > 1e-12 {
                    let w = weights.map_or(1.0, |w| w[[i, j]]);
                    let val = -w * dmat[[i, j]] / de;
                    b[[i, j]] = val;
                    diag -= val;
                }
            }
            b[[i, i]] = diag;
        }
        let bx = b.dot(&coords);
        coords = match &v_pinv {
            None => bx / n as f64,
            Some(p) => p.dot(&bx),
        };

        let cur = stress(d, &coords, weights);
        trace.push(cur);
        if prev <= 0.0 || (prev - cur) / prev < cfg.rel_tol {
            converged = true;
            break;
        }
        prev = cur;
    }

    let final_stress = *trace.last().unwrap();
    Ok(Embedding {
        coords,
        stress: final_stress,
        trace,
        converged,
        degenerate: false,
    })
}

/// Coincident initial points with a positive target dissimilarity stall the
/// Guttman transform (their majorizer coefficient vanishes), so such ties
/// get a tiny seeded jitter.
fn perturb_degenerate_ties(d: &DistanceMatrix, coords: &mut Array2<f64>, seed: u64) {
    use rand::prelude::*;
    let n = coords.nrows();
    let mut tied = false;
    'outer: for i in 0..n {
        for j in 0..i {
            if d.matrix()[[i, j]] > 0.0 {
                let mut sq = 0.0;
                for c in 0..coords.ncols() {
                    let diff = coords[[i, c]] - coords[[j, c]];
                    sq += diff * diff;
                }
                if sq < 1e-24 {
                    tied = true;
                    break 'outer;
                }
            }
        }
    }
    if !tied {
        return;
    }
    let scale = 1e-4 * d.matrix().iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-12);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    coords.mapv_inplace(|v| v + scale * (rng.random::<f64>() - 0.5));
}

fn embedded_distances(coords: &Array2<f64>) -> Array2<f64> {
    let n = coords.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut sq = 0.0;
                    for c in 0..coords.ncols() {
                        let diff = coords[[i, c]] - coords[[j, c]];
                        sq += diff * diff;
                    }
                    sq.sqrt()
                })
                .collect()
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    out
}

/// Diffusion time specification for the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeSpec {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct HeatGeoConfig {
    pub k_neighbors: usize,
    pub bandwidth: Bandwidth,
    pub laplacian: LaplacianKind,
    pub time: TimeSpec,
    pub sigma: f64,
    pub rho: f64,
    /// Chebyshev approximation order.
    pub order: usize,
    pub out_dim: usize,
    /// Weight the MDS loss by the heat kernel.
    pub weighted: bool,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Knee-search grid when `time` is `Auto`.
    pub time_grid: (f64, f64, usize),
}

impl Default for HeatGeoConfig {
    fn default() -> Self {
        HeatGeoConfig {
            k_neighbors: 10,
            bandwidth: Bandwidth::Adaptive,
            laplacian: LaplacianKind::SymmetricNormalized,
            // Fixed time from the validated grid; `Auto` opts into the
            // entropy knee, whose choice tracks the resolution limit of
            // the configured approximation order.
            time: TimeSpec::Fixed(50.0),
            sigma: 1.0,
            rho: 0.0,
            order: 30,
            out_dim: 2,
            weighted: false,
            max_iters: 300,
            rel_tol: 1e-6,
            seed: 0,
            time_grid: (0.05, 200.0, 20),
        }
    }
}

/// Diagnostics of one pipeline run, serialized as run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub chosen_time: f64,
    pub knee_found: Option<bool>,
    pub num_components: usize,
    pub floored_bandwidths: usize,
    pub floored_kernel_entries: usize,
    pub clamped_squares: usize,
    pub final_stress: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct HeatGeoOutput {
    pub embedding: Embedding,
    pub distance: DistanceMatrix,
    pub meta: RunMeta,
}

/// Full pipeline: k-NN graph, Laplacian, diffusion time (knee of the
/// entropy curve when `Auto`), Chebyshev heat kernel, heat-geodesic
/// dissimilarity, triplet interpolation, SMACOF.
pub fn heatgeo_embed(points: &PointCloud, cfg: &HeatGeoConfig) -> Result<HeatGeoOutput> {
    let params = HarnackParams {
        sigma: cfg.sigma,
        rho: cfg.rho,
        floor: 1e-12,
    };
    params.validate()?;

    let graph = build_knn_graph(points, cfg.k_neighbors, cfg.bandwidth)?;
    let lap = laplacian(&graph.adjacency, cfg.laplacian)?;

    let (t, knee_found) = match cfg.time {
        TimeSpec::Fixed(t) => {
            if !(t > 0.0) {
                return Err(HeatGeoError::parameter("diffusion time must be positive"));
            }
            (t, None)
        }
        TimeSpec::Auto => {
            let (lo, hi, count) = cfg.time_grid;
            let grid = log_time_grid(lo, hi, count);
            let sel = select_time_knee(&lap, &grid, cfg.order)?;
            (sel.chosen, Some(sel.knee_found))
        }
    };

    // The final kernel is computed at full accuracy: the configured order
    // acts as a floor and is raised when the effective time needs more
    // polynomial terms to resolve exp(-tL).
    let final_order = cfg
        .order
        .max(crate::heat::order_for_time(crate::heat::spectral_scale(&lap) * t));
    let kernel = chebyshev_heat(&lap, &[t], final_order)?.remove(0);
    let geo = heat_geodesic(&kernel, &params)?;

    let distance = if cfg.rho > 0.0 {
        // The triplet step runs on the squared form (natural diagonal
        // kept), so at rho = 1 the result is exactly 4t times the
        // potential distance of the kernel.
        let squared = heat_geodesic_squared(&kernel, &params)?;
        let triplet = DistanceMatrix::new(row_l2_distances(&squared.matrix), geo.distance.provenance())?;
        interpolate(&geo.distance, &triplet, cfg.rho)?
    } else {
        geo.distance.clone()
    };

    let weights = if cfg.weighted {
        let mut w = kernel.matrix.mapv(|v| v.max(0.0));
        // Chebyshev output is symmetric only to rounding; make it exact.
        let n = w.nrows();
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (w[[i, j]] + w[[j, i]]);
                w[[i, j]] = avg;
                w[[j, i]] = avg;
            }
        }
        Some(w)
    } else {
        None
    };

    let mds = MdsConfig {
        dim: cfg.out_dim,
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
        weights,
        seed: cfg.seed,
    };
    let embedding = smacof(&distance, &mds, None)?;

    let meta = RunMeta {
        chosen_time: t,
        knee_found,
        num_components: graph.num_components,
        floored_bandwidths: graph.floored_bandwidths,
        floored_kernel_entries: geo.floored,
        clamped_squares: geo.clamped,
        final_stress: embedding.stress,
        iterations: embedding.trace.len().saturating_sub(1),
        converged: embedding.converged,
    };
    Ok(HeatGeoOutput {
        embedding,
        distance,
        meta,
    })
}
