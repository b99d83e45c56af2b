//! Synthetic benchmarks with analytic ground-truth geodesics, a timepoint
//! drift generator for the interpolation metric, and CSV ingestion.

use std::path::Path;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::Serialize;

use crate::distance::{DistanceMatrix, Provenance};
use crate::error::{HeatGeoError, Result};
use crate::graph::PointCloud;

/// A generated point cloud together with its exact geodesic distances and
/// the parameters that produced it.
#[derive(Debug, Clone)]
pub struct GroundTruthBundle {
    pub cloud: PointCloud,
    pub geodesics: DistanceMatrix,
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorParams {
    SwissRoll {
        n: usize,
        noise_sd: f64,
        ambient_dim: usize,
        clustered: bool,
        seed: u64,
    },
    Tree {
        branch_len: usize,
        n_branches: usize,
        dim: usize,
        noise_sd: f64,
        seed: u64,
    },
    TimepointDrift {
        n_per_time: usize,
        n_times: usize,
        dim: usize,
        drift_step: f64,
        seed: u64,
    },
}

/// Arc length of the spiral `t (cos t, sin t)`:
/// `s(t) = (t sqrt(1 + t^2) + asinh t) / 2`.
pub fn swiss_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Haar-distributed random rotation: QR of a Gaussian matrix with the sign
/// of the R diagonal folded into Q.
pub fn haar_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = Array2::from_shape_fn((dim, dim), |_| rng.sample::<f64, _>(StandardNormal));
    let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| g[[i, j]]);
    let qr = m.qr();
    let q = qr.q();
    let r = qr.r();
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

/// Swiss roll sampled on `[3pi/2, 9pi/2] x [0, 5]`, mapped to
/// `(t cos t, h, t sin t)`, optionally rotated into a higher ambient
/// dimension and perturbed with isotropic noise. Ground-truth geodesics are
/// Euclidean distances in the unrolled `(s(t), h)` plane.
pub fn swiss_roll(
    n: usize,
    noise_sd: f64,
    ambient_dim: usize,
    clustered: bool,
    seed: u64,
) -> Result<GroundTruthBundle> {
    if n < 10 {
        return Err(HeatGeoError::parameter("swiss roll needs n >= 10"));
    }
    if ambient_dim < 3 {
        return Err(HeatGeoError::parameter("swiss roll ambient dimension must be >= 3"));
    }
    if noise_sd < 0.0 {
        return Err(HeatGeoError::parameter("noise standard deviation must be >= 0"));
    }
    let t0 = 1.5 * std::f64::consts::PI;
    let t1 = 4.5 * std::f64::consts::PI;
    let width = 5.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    let mut labels: Option<Vec<i64>> = None;
    if clustered {
        let means = [(7.0, width / 2.0), (12.0, width / 2.0)];
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut lab = Vec::with_capacity(n);
        for _ in 0..n {
            let comp = usize::from(rng.random::<bool>());
            ts.push(means[comp].0 + rng.sample(normal));
            hs.push(means[comp].1 + rng.sample(normal));
            lab.push(comp as i64);
        }
        labels = Some(lab);
    } else {
        for _ in 0..n {
            ts.push(rng.random_range(t0..t1));
            hs.push(rng.random_range(0.0..width));
        }
    }

    let mut data = Array2::<f64>::zeros((n, ambient_dim));
    for i in 0..n {
        data[[i, 0]] = ts[i] * ts[i].cos();
        data[[i, 1]] = hs[i];
        data[[i, 2]] = ts[i] * ts[i].sin();
    }
    if ambient_dim > 3 {
        let rot = haar_rotation(ambient_dim, &mut rng);
        data = data.dot(&rot);
    }
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).unwrap();
        data.mapv_inplace(|v| v + rng.sample(normal));
    }

    let arcs: Vec<f64> = ts.iter().map(|&t| swiss_arc_length(t)).collect();
    let mut geo = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..i {
            let ds = arcs[i] - arcs[j];
            let dh = hs[i] - hs[j];
            let d = (ds * ds + dh * dh).sqrt();
            geo[[i, j]] = d;
            geo[[j, i]] = d;
        }
    }

    Ok(GroundTruthBundle {
        cloud: PointCloud::with_tags(data, labels, None)?,
        geodesics: DistanceMatrix::new(geo, Provenance::GroundTruth)?,
        params: GeneratorParams::SwissRoll {
            n,
            noise_sd,
            ambient_dim,
            clustered,
            seed,
        },
    })
}

/// Branching random walks glued into a tree. Branch 0 starts at the
/// origin; every other branch is an independent walk translated to start
/// at a uniformly chosen point of branch 0. Geodesics accumulate Euclidean
/// step lengths along the unique tree path.
pub fn tree(
    branch_len: usize,
    n_branches: usize,
    dim: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<GroundTruthBundle> {
    if branch_len < 2 {
        return Err(HeatGeoError::parameter("tree branch length must be >= 2"));
    }
    if n_branches < 2 {
        return Err(HeatGeoError::parameter("tree needs at least 2 branches"));
    }
    if dim < 1 {
        return Err(HeatGeoError::parameter("tree dimension must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 2.0).unwrap();

    // Raw walks, each starting at the origin.
    let mut walks: Vec<Array2<f64>> = Vec::with_capacity(n_branches);
    for _ in 0..n_branches {
        let mut w = Array2::<f64>::zeros((branch_len, dim));
        for i in 1..branch_len {
            for c in 0..dim {
                w[[i, c]] = w[[i - 1, c]] + rng.sample(step);
            }
        }
        walks.push(w);
    }
    // Glue indices on the main branch.
    let glue: Vec<usize> = (1..n_branches)
        .map(|_| rng.random_range(0..branch_len))
        .collect();
    for k in 1..n_branches {
        let offset: Vec<f64> = (0..dim).map(|c| walks[0][[glue[k - 1], c]]).collect();
        for i in 0..branch_len {
            for c in 0..dim {
                walks[k][[i, c]] += offset[c];
            }
        }
    }

    // Cumulative path length from each branch start.
    let cumulative: Vec<Vec<f64>> = walks
        .iter()
        .map(|w| {
            let mut c = vec![0.0; branch_len];
            for i in 1..branch_len {
                let mut sq = 0.0;
                for d in 0..dim {
                    let diff = w[[i, d]] - w[[i - 1, d]];
                    sq += diff * diff;
                }
                c[i] = c[i - 1] + sq.sqrt();
            }
            c
        })
        .collect();

    let n = branch_len * n_branches;
    let mut geo = Array2::<f64>::zeros((n, n));
    let branch_of = |p: usize| (p / branch_len, p % branch_len);
    for p in 0..n {
        for q in 0..p {
            let (bk, ik) = branch_of(p);
            let (bl, il) = branch_of(q);
            let d = if bk == bl {
                (cumulative[bk][ik] - cumulative[bl][il]).abs()
            } else if bk == 0 {
                cumulative[bl][il] + (cumulative[0][ik] - cumulative[0][glue[bl - 1]]).abs()
            } else if bl == 0 {
                cumulative[bk][ik] + (cumulative[0][il] - cumulative[0][glue[bk - 1]]).abs()
            } else {
                cumulative[bk][ik]
                    + cumulative[bl][il]
                    + (cumulative[0][glue[bk - 1]] - cumulative[0][glue[bl - 1]]).abs()
            };
            geo[[p, q]] = d;
            geo[[q, p]] = d;
        }
    }

    let mut data = Array2::<f64>::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (k, w) in walks.iter().enumerate() {
        for i in 0..branch_len {
            for c in 0..dim {
                data[[k * branch_len + i, c]] = w[[i, c]];
            }
            labels.push(k as i64);
        }
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).unwrap();
        data.mapv_inplace(|v| v + rng.sample(noise));
    }

    Ok(GroundTruthBundle {
        cloud: PointCloud::with_tags(data, Some(labels), None)?,
        geodesics: DistanceMatrix::new(geo, Provenance::GroundTruth)?,
        params: GeneratorParams::Tree {
            branch_len,
            n_branches,
            dim,
            noise_sd,
            seed,
        },
    })
}

/// Gaussian blobs whose mean advances by `drift_step` along the first
/// coordinate per timepoint.
pub fn timepoint_drift(
    n_per_time: usize,
    n_times: usize,
    dim: usize,
    drift_step: f64,
    seed: u64,
) -> Result<PointCloud> {
    if n_times < 3 {
        return Err(HeatGeoError::parameter("drift dataset needs at least 3 timepoints"));
    }
    if n_per_time < 2 {
        return Err(HeatGeoError::parameter("drift dataset needs at least 2 points per time"));
    }
    if dim < 1 {
        return Err(HeatGeoError::parameter("drift dimension must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = n_per_time * n_times;
    let mut data = Array2::<f64>::zeros((n, dim));
    let mut times = Vec::with_capacity(n);
    for t in 0..n_times {
        for i in 0..n_per_time {
            let row = t * n_per_time + i;
            for c in 0..dim {
                data[[row, c]] = rng.sample(normal);
            }
            data[[row, 0]] += t as f64 * drift_step;
            times.push(t as i64);
        }
    }
    let _ = i64::try_from(n).map_err(|_| HeatGeoError::parameter("dataset too large"))?;
    PointCloud::with_tags(data, None, Some(times))
}

/// Load a point cloud from CSV. A header row is detected when the first
/// line contains non-numeric cells; columns named `label` / `timepoint`
/// (case-insensitive) populate the tags instead of the coordinates.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let (_, first) = *lines.peek().ok_or_else(|| HeatGeoError::Parse {
        line: 1,
        message: "file is empty".to_string(),
    })?;
    let first_cells: Vec<&str> = first.split(',').map(str::trim).collect();
    let has_header = first_cells.iter().any(|c| c.parse::<f64>().is_err());

    let mut label_col = None;
    let mut time_col = None;
    let mut data_cols: Vec<usize> = Vec::new();
    if has_header {
        for (idx, cell) in first_cells.iter().enumerate() {
            match cell.to_ascii_lowercase().as_str() {
                "label" => label_col = Some(idx),
                "timepoint" => time_col = Some(idx),
                "index" => {}
                _ => data_cols.push(idx),
            }
        }
        lines.next();
    } else {
        data_cols = (0..first_cells.len()).collect();
    }
    if data_cols.is_empty() {
        return Err(HeatGeoError::Parse {
            line: 1,
            message: "no coordinate columns".to_string(),
        });
    }

    let width = first_cells.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut times: Vec<i64> = Vec::new();
    for (line_idx, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(HeatGeoError::Parse {
                line: line_idx + 1,
                message: format!("expected {width} columns, found {}", cells.len()),
            });
        }
        let parse = |idx: usize| -> Result<f64> {
            cells[idx].parse::<f64>().map_err(|_| HeatGeoError::Parse {
                line: line_idx + 1,
                message: format!("non-numeric cell '{}'", cells[idx]),
            })
        };
        let mut row = Vec::with_capacity(data_cols.len());
        for &c in &data_cols {
            row.push(parse(c)?);
        }
        rows.push(row);
        if let Some(c) = label_col {
            labels.push(parse(c)?.round() as i64);
        }
        if let Some(c) = time_col {
            times.push(parse(c)?.round() as i64);
        }
    }
    if rows.is_empty() {
        return Err(HeatGeoError::Parse {
            line: 1,
            message: "no data rows".to_string(),
        });
    }
    let data = Array2::from_shape_fn((rows.len(), data_cols.len()), |(i, j)| rows[i][j]);
    PointCloud::with_tags(
        data,
        (label_col.is_some()).then_some(labels),
        (time_col.is_some()).then_some(times),
    )
}

/// Euclidean distances between cloud rows, used by invariant checks.
pub fn pairwise_euclidean(points: &PointCloud) -> Array2<f64> {
    let mut m = crate::graph::pairwise_sq_dists(points.data());
    m.mapv_inplace(f64::sqrt);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn arc_length_matches_quadrature() {
        // Simpson quadrature of integral sqrt(1 + u^2) du as the oracle.
        let quad = |t: f64| -> f64 {
            let steps = 20_000;
            let h = t / steps as f64;
            let f = |u: f64| (1.0 + u * u).sqrt();
            let mut s = f(0.0) + f(t);
            for i in 1..steps {
                let x = i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        for t in [1.0, 1.5 * std::f64::consts::PI, 4.5 * std::f64::consts::PI] {
            assert!(
                (swiss_arc_length(t) - quad(t)).abs() < 1e-9,
                "arc length mismatch at t={t}"
            );
        }
    }

    #[test]
    fn swiss_roll_known_point() {
        // (t, h) = (3pi/2, 0) maps to (0, 0, -3pi/2).
        let t = 1.5 * std::f64::consts::PI;
        let x = t * t.cos();
        let z = t * t.sin();
        assert!(x.abs() < 1e-12);
        assert!((z + t).abs() < 1e-12);
    }

    #[test]
    fn swiss_roll_geodesic_structure() {
        let b = swiss_roll(40, 0.0, 3, false, 5).unwrap();
        assert_eq!(b.cloud.n_points(), 40);
        assert_eq!(b.geodesics.dim(), 40);
        // Shared-t pair: geodesic equals height difference. Recover t and h
        // from the noiseless ambient coordinates.
        let data = b.cloud.data();
        let radius = |i: usize| (data[[i, 0]].powi(2) + data[[i, 2]].powi(2)).sqrt();
        for i in 0..40 {
            for j in 0..40 {
                if i != j && (radius(i) - radius(j)).abs() < 1e-9 {
                    let dh = (data[[i, 1]] - data[[j, 1]]).abs();
                    assert!((b.geodesics.matrix()[[i, j]] - dh).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn swiss_roll_shared_height_uses_arc_difference() {
        // Two points sharing h at t0 and t1: geodesic is s(t1) - s(t0).
        let t0 = 1.5 * std::f64::consts::PI;
        let t1 = 4.5 * std::f64::consts::PI;
        let expect = swiss_arc_length(t1) - swiss_arc_length(t0);
        assert!(expect > 0.0);
        // Direct check of the formula the generator uses.
        let d = ((swiss_arc_length(t1) - swiss_arc_length(t0)).powi(2) + 0.0).sqrt();
        assert!((d - expect).abs() < 1e-12);
    }

    #[test]
    fn swiss_roll_seed_determinism() {
        let a = swiss_roll(25, 0.3, 10, true, 42).unwrap();
        let b = swiss_roll(25, 0.3, 10, true, 42).unwrap();
        assert_eq!(a.cloud.data(), b.cloud.data());
        assert_eq!(a.geodesics.matrix(), b.geodesics.matrix());
        assert_eq!(a.cloud.labels(), b.cloud.labels());
        let c = swiss_roll(25, 0.3, 10, true, 43).unwrap();
        assert_ne!(a.cloud.data(), c.cloud.data());
    }

    #[test]
    fn haar_rotation_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rot = haar_rotation(10, &mut rng);
        // Orthonormality.
        let gram = rot.t().dot(&rot);
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
        let pts = Array2::from_shape_fn((8, 10), |(i, j)| ((i * 13 + j * 7) % 11) as f64);
        let before = crate::graph::pairwise_sq_dists(&pts);
        let after = crate::graph::pairwise_sq_dists(&pts.dot(&rot));
        for (a, b) in before.iter().zip(after.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn swiss_roll_geodesic_dominates_ambient() {
        let b = swiss_roll(60, 0.0, 3, false, 17).unwrap();
        let euclid = pairwise_euclidean(&b.cloud);
        for (g, e) in b.geodesics.matrix().iter().zip(euclid.iter()) {
            assert!(*g >= *e - 1e-9, "geodesic {g} below ambient {e}");
        }
    }

    #[test]
    fn tree_defaults_have_2500_points() {
        let b = tree(500, 5, 5, 0.0, 1).unwrap();
        assert_eq!(b.cloud.n_points(), 2500);
    }

    #[test]
    fn tree_consecutive_points_geodesic_is_step_length() {
        let b = tree(50, 3, 5, 0.0, 7).unwrap();
        let data = b.cloud.data();
        for p in [0usize, 10, 60, 120] {
            let mut sq = 0.0;
            for c in 0..5 {
                let d = data[[p + 1, c]] - data[[p, c]];
                sq += d * d;
            }
            assert!((b.geodesics.matrix()[[p, p + 1]] - sq.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn tree_branch_to_own_glue_point() {
        let b = tree(40, 3, 4, 0.0, 3).unwrap();
        let data = b.cloud.data();
        // Walk the steps of branch 1 back to its start by brute force.
        let start = 40;
        for idx in [5usize, 17, 39] {
            let mut total = 0.0;
            for i in 0..idx {
                let mut sq = 0.0;
                for c in 0..4 {
                    let d = data[[start + i + 1, c]] - data[[start + i, c]];
                    sq += d * d;
                }
                total += sq.sqrt();
            }
            assert!((b.geodesics.matrix()[[start, start + idx]] - total).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_four_point_condition() {
        let b = tree(30, 4, 5, 0.0, 11).unwrap();
        let g = b.geodesics.matrix();
        let quads = [(0usize, 17usize, 40usize, 95usize), (3, 29, 61, 100), (10, 50, 80, 110)];
        for (w, x, y, z) in quads {
            let s1 = g[[w, x]] + g[[y, z]];
            let s2 = g[[w, y]] + g[[x, z]];
            let s3 = g[[w, z]] + g[[x, y]];
            let mut sums = [s1, s2, s3];
            sums.sort_by(f64::total_cmp);
            assert!(
                (sums[2] - sums[1]).abs() < 1e-8,
                "four-point condition violated: {sums:?}"
            );
        }
    }

    #[test]
    fn drift_timepoints_populated() {
        let pc = timepoint_drift(20, 3, 4, 2.0, 5).unwrap();
        assert_eq!(pc.n_points(), 60);
        let times = pc.timepoints().unwrap();
        assert_eq!(times.iter().filter(|&&t| t == 1).count(), 20);
        // Linear drift: the mean of the middle group sits between its
        // neighbors along the first coordinate.
        let mean_of = |t: i64| -> f64 {
            let idx: Vec<usize> = times
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == t)
                .map(|(i, _)| i)
                .collect();
            idx.iter().map(|&i| pc.data()[[i, 0]]).sum::<f64>() / idx.len() as f64
        };
        let (m0, m1, m2) = (mean_of(0), mean_of(1), mean_of(2));
        assert!(m0 < m1 && m1 < m2);
        let midpoint = (m0 + m2) / 2.0;
        assert!((m1 - midpoint).abs() < 1.0);
    }

    #[test]
    fn drift_zero_step_is_stationary() {
        let pc = timepoint_drift(30, 3, 2, 0.0, 5).unwrap();
        let times = pc.timepoints().unwrap();
        let mean_of = |t: i64| -> f64 {
            let idx: Vec<usize> = times
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == t)
                .map(|(i, _)| i)
                .collect();
            idx.iter().map(|&i| pc.data()[[i, 0]]).sum::<f64>() / idx.len() as f64
        };
        assert!((mean_of(0) - mean_of(2)).abs() < 1.0);
    }

    #[test]
    fn csv_roundtrip_plain() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,2.0\n3.0,4.0\n5.0,6.0").unwrap();
        let pc = load_csv(f.path()).unwrap();
        assert_eq!(pc.n_points(), 3);
        assert_eq!(pc.n_dims(), 2);
        assert_eq!(pc.data()[[2, 1]], 6.0);
        assert!(pc.labels().is_none());
    }

    #[test]
    fn csv_with_label_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x1,x2,label\n1.0,2.0,0\n3.0,4.0,1").unwrap();
        let pc = load_csv(f.path()).unwrap();
        assert_eq!(pc.n_dims(), 2);
        assert_eq!(pc.labels().unwrap(), &[0, 1]);
    }

    #[test]
    fn csv_errors() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(load_csv(f.path()).is_err());

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,2.0\n3.0").unwrap();
        match load_csv(f.path()) {
            Err(HeatGeoError::Parse { line: 2, .. }) => {}
            other => panic!("expected ragged-row error, got {other:?}"),
        }

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,2.0\n3.0,abc").unwrap();
        match load_csv(f.path()) {
            Err(HeatGeoError::Parse { line: 2, .. }) => {}
            other => panic!("expected non-numeric error, got {other:?}"),
        }
    }
}
