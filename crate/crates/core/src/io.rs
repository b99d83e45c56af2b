//! File formats: headerless dense CSV for distance matrices, raw binary
//! heat kernels, CSV triples for adjacencies, and the embedding/cloud CSV
//! layouts shared with the CLI.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::distance::{DistanceMatrix, Provenance};
use crate::error::{HeatGeoError, Result};
use crate::graph::PointCloud;
use crate::sparse::SparseSymMatrix;

/// Write a dense matrix as headerless CSV, one row per line.
pub fn write_dense_csv(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[[i, j]])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a headerless dense CSV matrix.
pub fn read_dense_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| HeatGeoError::Parse {
            line: idx + 1,
            message: "non-numeric cell".to_string(),
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(HeatGeoError::Parse {
                    line: idx + 1,
                    message: "ragged row".to_string(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HeatGeoError::Parse {
            line: 1,
            message: "empty matrix file".to_string(),
        });
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

/// Read a distance matrix (headerless dense CSV) and validate it.
pub fn read_distance_csv(path: impl AsRef<Path>, provenance: Provenance) -> Result<DistanceMatrix> {
    let mut m = read_dense_csv(path)?;
    // Zero out rounding residue on the diagonal from text round-trips.
    let n = m.nrows().min(m.ncols());
    for i in 0..n {
        if m[[i, i]].abs() < 1e-15 {
            m[[i, i]] = 0.0;
        }
    }
    DistanceMatrix::new(m, provenance)
}

/// Raw little-endian binary: an 8-byte `n` header followed by `n * n`
/// f64 values in row-major order.
pub fn write_matrix_binary(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(HeatGeoError::parameter("binary export requires a square matrix"));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(n as u64).to_le_bytes())?;
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_binary(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; 8];
    input.read_exact(&mut header)?;
    let n = u64::from_le_bytes(header) as usize;
    let mut buf = vec![0u8; n * n * 8];
    input.read_exact(&mut buf)?;
    let mut m = Array2::<f64>::zeros((n, n));
    for (idx, chunk) in buf.chunks_exact(8).enumerate() {
        m[[idx / n, idx % n]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(m)
}

/// Adjacency export as `row,col,weight` triples (stored entries only).
pub fn write_adjacency_triples(path: impl AsRef<Path>, w: &SparseSymMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "row,col,weight")?;
    for (i, j, v) in w.entries() {
        writeln!(out, "{i},{j},{v:.17e}")?;
    }
    Ok(())
}

/// Two-column `t,entropy` CSV.
pub fn write_time_entropy_csv(path: impl AsRef<Path>, grid: &[f64], entropies: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,entropy")?;
    for (t, e) in grid.iter().zip(entropies) {
        writeln!(out, "{t:.17e},{e:.17e}")?;
    }
    Ok(())
}

/// Point cloud CSV with `x1..xd` coordinate columns and optional `label` /
/// `timepoint` columns, compatible with `datasets::load_csv`.
pub fn write_cloud_csv(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let d = cloud.n_dims();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    if cloud.labels().is_some() {
        header.push("label".to_string());
    }
    if cloud.timepoints().is_some() {
        header.push("timepoint".to_string());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..cloud.n_points() {
        let mut cells: Vec<String> = (0..d).map(|j| format!("{:.17e}", cloud.data()[[i, j]])).collect();
        if let Some(labels) = cloud.labels() {
            cells.push(labels[i].to_string());
        }
        if let Some(times) = cloud.timepoints() {
            cells.push(times[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Embedding CSV: `index,y_1..y_k` plus optional `label` / `timepoint`.
pub fn write_embedding_csv(
    path: impl AsRef<Path>,
    coords: &Array2<f64>,
    labels: Option<&[i64]>,
    timepoints: Option<&[i64]>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let k = coords.ncols();
    let mut header = vec!["index".to_string()];
    header.extend((1..=k).map(|i| format!("y{i}")));
    if labels.is_some() {
        header.push("label".to_string());
    }
    if timepoints.is_some() {
        header.push("timepoint".to_string());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..coords.nrows() {
        let mut cells = vec![i.to_string()];
        cells.extend((0..k).map(|j| format!("{:.17e}", coords[[i, j]])));
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        if let Some(t) = timepoints {
            cells.push(t[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: impl AsRef<Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HeatGeoError::numerical("json", e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}
