//! Dissimilarity matrices derived from heat kernels: the heat-geodesic with
//! volume correction, triplet denoising and interpolation, and the
//! comparison distances (diffusion-map, potential distance, multiscale
//! random-walk kernel).

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HeatGeoError, Result};
use crate::heat::HeatKernel;
use crate::sparse::SparseSymMatrix;

/// Where a dissimilarity matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Provenance {
    HeatGeodesic { t: f64, sigma: f64, rho: f64 },
    DiffusionMap { t: u32 },
    PhatePotential { t: f64 },
    GroundTruth,
}

/// Dense symmetric nonnegative dissimilarity with zero diagonal. Triangle
/// inequality is not guaranteed.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    matrix: Array2<f64>,
    provenance: Provenance,
}

impl DistanceMatrix {
    pub fn new(matrix: Array2<f64>, provenance: Provenance) -> Result<Self> {
        let (n, m) = matrix.dim();
        if n != m {
            return Err(HeatGeoError::parameter("distance matrix must be square"));
        }
        for i in 0..n {
            if matrix[[i, i]] != 0.0 {
                return Err(HeatGeoError::parameter(format!(
                    "distance matrix diagonal must be exactly zero (row {i})"
                )));
            }
            for j in 0..i {
                let a = matrix[[i, j]];
                let b = matrix[[j, i]];
                if !a.is_finite() || a < 0.0 {
                    return Err(HeatGeoError::parameter(format!(
                        "distance matrix entry ({i}, {j}) is {a}"
                    )));
                }
                if (a - b).abs() > 1e-8 {
                    return Err(HeatGeoError::parameter(format!(
                        "distance matrix asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { matrix, provenance })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Parameters of the heat-geodesic transform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HarnackParams {
    /// Volume-correction strength.
    pub sigma: f64,
    /// Triplet interpolation weight in [0, 1].
    pub rho: f64,
    /// Kernel entry floor applied before any log.
    pub floor: f64,
}

impl Default for HarnackParams {
    fn default() -> Self {
        HarnackParams {
            sigma: 1.0,
            rho: 0.0,
            floor: 1e-12,
        }
    }
}

impl HarnackParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(HeatGeoError::parameter(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(HeatGeoError::parameter("sigma must be nonnegative"));
        }
        if !(self.floor > 0.0) {
            return Err(HeatGeoError::parameter("floor must be positive"));
        }
        Ok(())
    }
}

/// Heat-geodesic output plus the flooring/clamping diagnostics.
#[derive(Debug, Clone)]
pub struct HeatGeodesicResult {
    pub distance: DistanceMatrix,
    /// Kernel entries raised to the floor before the log (unordered pairs).
    pub floored: usize,
    /// Negative squared dissimilarities clamped to zero (unordered pairs).
    pub clamped: usize,
}

/// The squared heat-geodesic form, keeping its natural diagonal.
#[derive(Debug, Clone)]
pub struct HeatGeodesicSquared {
    /// `-4t log h_ij - 4t sigma log(2 / (h_ii + h_jj))`, clamped at zero.
    pub matrix: Array2<f64>,
    pub floored: usize,
    pub clamped: usize,
}

/// Squared heat-geodesic dissimilarities with kernel entries floored and
/// negative values clamped to zero. The diagonal is the formula's own value
/// (zero exactly at `sigma = 1`); triplet computations run on this form.
pub fn heat_geodesic_squared(h: &HeatKernel, params: &HarnackParams) -> Result<HeatGeodesicSquared> {
    params.validate()?;
    if !(h.time > 0.0) {
        return Err(HeatGeoError::parameter(
            "heat-geodesic needs a strictly positive diffusion time",
        ));
    }
    let n = h.matrix.nrows();
    let t4 = 4.0 * h.time;
    let diag: Vec<f64> = (0..n).map(|i| h.matrix[[i, i]].max(params.floor)).collect();

    let mut floored = 0usize;
    let mut clamped = 0usize;
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let raw = h.matrix[[i, j]];
            let val = if raw < params.floor {
                floored += 1;
                params.floor
            } else {
                raw
            };
            let volume = 2.0 / (diag[i] + diag[j]);
            let mut sq = -t4 * val.ln() - params.sigma * t4 * volume.ln();
            if sq < 0.0 {
                clamped += 1;
                sq = 0.0;
            }
            out[[i, j]] = sq;
            out[[j, i]] = sq;
        }
    }
    Ok(HeatGeodesicSquared {
        matrix: out,
        floored,
        clamped,
    })
}

/// Heat-geodesic dissimilarity
/// `d_t(i, j) = sqrt(-4t log h_ij - 4t sigma log(2 / (h_ii + h_jj)))`,
/// with kernel entries floored, negative squares clamped to zero, and the
/// diagonal forced to zero.
pub fn heat_geodesic(h: &HeatKernel, params: &HarnackParams) -> Result<HeatGeodesicResult> {
    let squared = heat_geodesic_squared(h, params)?;
    let mut out = squared.matrix.mapv(f64::sqrt);
    let n = out.nrows();
    for i in 0..n {
        out[[i, i]] = 0.0;
    }
    let distance = DistanceMatrix::new(
        out,
        Provenance::HeatGeodesic {
            t: h.time,
            sigma: params.sigma,
            rho: params.rho,
        },
    )?;
    Ok(HeatGeodesicResult {
        distance,
        floored: squared.floored,
        clamped: squared.clamped,
    })
}

/// Pairwise L2 distances between the rows of a square matrix; symmetric
/// with zero diagonal.
pub fn row_l2_distances(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = m.row(i);
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let rj = m.row(j);
                    ri.iter()
                        .zip(rj.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    let mut out = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    // Exact symmetry: mirror the lower triangle.
    for i in 0..n {
        for j in 0..i {
            let v = out[[i, j]];
            out[[j, i]] = v;
        }
    }
    out
}

/// Triplet distance: L2 distance between rows of a dissimilarity matrix.
pub fn triplet_distance(d: &DistanceMatrix) -> DistanceMatrix {
    let out = row_l2_distances(d.matrix());
    DistanceMatrix::new(out, d.provenance()).expect("triplet distance is valid by construction")
}

/// Entrywise convex combination `(1 - rho) D + rho DT`.
pub fn interpolate(d: &DistanceMatrix, dt: &DistanceMatrix, rho: f64) -> Result<DistanceMatrix> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(HeatGeoError::parameter(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    if d.dim() != dt.dim() {
        return Err(HeatGeoError::parameter("dimension mismatch in interpolation"));
    }
    let out = d.matrix() * (1.0 - rho) + dt.matrix() * rho;
    let provenance = match d.provenance() {
        Provenance::HeatGeodesic { t, sigma, .. } => Provenance::HeatGeodesic { t, sigma, rho },
        other => other,
    };
    DistanceMatrix::new(out, provenance)
}

/// Row-stochastic transition matrix `P = Q^{-1} W` in dense form.
pub fn transition_matrix(w: &SparseSymMatrix) -> Result<Array2<f64>> {
    let n = w.dim();
    let degrees = w.degrees();
    if let Some((i, _)) = degrees.iter().enumerate().find(|(_, &d)| d <= 0.0) {
        return Err(HeatGeoError::IsolatedVertex(i));
    }
    let mut p = Array2::<f64>::zeros((n, n));
    for (i, j, v) in w.entries() {
        p[[i, j]] = v / degrees[i];
    }
    Ok(p)
}

fn require_connected(w: &SparseSymMatrix) -> Result<()> {
    let sizes = w.component_sizes();
    if sizes.len() > 1 {
        return Err(HeatGeoError::Disconnected {
            components: sizes.len(),
            sizes,
        });
    }
    Ok(())
}

/// How the stationary distribution enters the diffusion-map distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DmWeighting {
    /// `sum_k (P^t_ik - P^t_jk)^2 / pi_k`, the standard diffusion distance.
    Standard,
    /// `sum_k ((P^t_ik - P^t_jk) / pi_k)^2`, the literal elementwise form.
    InversePiSquared,
}

/// Diffusion-map distance between `t`-step random-walk rows.
pub fn diffusion_map_distance(
    w: &SparseSymMatrix,
    t: u32,
    weighting: DmWeighting,
) -> Result<DistanceMatrix> {
    if t == 0 {
        return Err(HeatGeoError::parameter("diffusion time must be a positive integer"));
    }
    require_connected(w)?;
    let p = transition_matrix(w)?;
    let degrees = w.degrees();
    let total: f64 = degrees.sum();
    let pi: Vec<f64> = degrees.iter().map(|d| d / total).collect();

    let mut pt = p.clone();
    for _ in 1..t {
        pt = pt.dot(&p);
    }

    let n = w.dim();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let mut sq = 0.0;
            for k in 0..n {
                let diff = pt[[i, k]] - pt[[j, k]];
                sq += match weighting {
                    DmWeighting::Standard => diff * diff / pi[k],
                    DmWeighting::InversePiSquared => (diff / pi[k]) * (diff / pi[k]),
                };
            }
            let d = sq.sqrt();
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    DistanceMatrix::new(out, Provenance::DiffusionMap { t })
}

/// Potential distance: L2 distance between elementwise logs of the rows of
/// an already-diffused stochastic or heat matrix. Entries are floored at
/// `floor` before the log.
pub fn phate_potential(m: &Array2<f64>, t: f64, floor: f64) -> Result<DistanceMatrix> {
    if !(floor > 0.0) {
        return Err(HeatGeoError::parameter("floor must be positive"));
    }
    let logs = m.mapv(|v| v.max(floor).ln());
    let out = row_l2_distances(&logs);
    DistanceMatrix::new(out, Provenance::PhatePotential { t })
}

/// Poisson-weighted multiscale random-walk kernel
/// `sum_{k=0..kmax} (t^k e^{-t} / k!) P^k`, accumulated by repeated sparse
/// multiplication. Returns the kernel and the neglected tail mass.
pub fn poisson_multiscale_kernel(
    w: &SparseSymMatrix,
    t: f64,
    kmax: usize,
) -> Result<(Array2<f64>, f64)> {
    if !t.is_finite() || t < 0.0 {
        return Err(HeatGeoError::parameter("t must be finite and nonnegative"));
    }
    require_connected(w)?;
    let n = w.dim();
    let degrees = w.degrees();
    // Sparse rows of P, reused for every power.
    let p_rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| w.row(i).map(|(j, v)| (j, v / degrees[i])).collect())
        .collect();

    let mut weight = (-t).exp();
    let mut acc = Array2::<f64>::eye(n) * weight;
    let mut mass = weight;
    let mut cur = Array2::<f64>::eye(n);
    for k in 1..=kmax {
        let next_rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                for &(j, pv) in &p_rows[i] {
                    for c in 0..n {
                        row[c] += pv * cur[[j, c]];
                    }
                }
                row
            })
            .collect();
        for (i, row) in next_rows.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                cur[[i, c]] = v;
            }
        }
        weight *= t / k as f64;
        mass += weight;
        acc.scaled_add(weight, &cur);
    }
    Ok((acc, (1.0 - mass).max(0.0)))
}
