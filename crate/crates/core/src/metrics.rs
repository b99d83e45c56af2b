//! Evaluation metrics: row-wise correlations, matrix norms, k-means
//! clustering agreement scores, displacement-interpolation EMD, and the
//! shortest-path oracle baseline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{DistanceMatrix, Provenance};
use crate::error::{HeatGeoError, Result};
use crate::sparse::SparseSymMatrix;

/// Flat report emitted by the CLI `eval` command.
#[derive(Debug, Clone, Serialize, Default)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frob_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frob_norm_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ami: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emd: Option<f64>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy)]
pub struct RowCorrelations {
    pub pearson: f64,
    pub spearman: f64,
    /// Rows whose correlation was defined as zero because one side was
    /// constant.
    pub degenerate_rows: usize,
}

fn pearson_of(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Ranks with average ties.
fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

/// Mean per-row Pearson and Spearman correlation between two distance
/// matrices, excluding the diagonal entry of each row.
pub fn row_correlations(d: &DistanceMatrix, dhat: &DistanceMatrix) -> Result<RowCorrelations> {
    let n = d.dim();
    if dhat.dim() != n {
        return Err(HeatGeoError::parameter("distance matrices differ in size"));
    }
    if n < 3 {
        return Err(HeatGeoError::parameter("row correlations need n >= 3"));
    }
    let mut pearson_sum = 0.0;
    let mut spearman_sum = 0.0;
    let mut degenerate = 0usize;
    for i in 0..n {
        let a: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.matrix()[[i, j]]).collect();
        let b: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| dhat.matrix()[[i, j]])
            .collect();
        match pearson_of(&a, &b) {
            Some(r) => pearson_sum += r,
            None => degenerate += 1,
        }
        match pearson_of(&ranks(&a), &ranks(&b)) {
            Some(r) => spearman_sum += r,
            None => {}
        }
    }
    Ok(RowCorrelations {
        pearson: pearson_sum / n as f64,
        spearman: spearman_sum / n as f64,
        degenerate_rows: degenerate,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NormDiffs {
    pub raw_frobenius: f64,
    pub raw_max: f64,
    /// Norms of `D/||D||_F - Dhat/||Dhat||_F`; absent when either matrix is
    /// zero.
    pub normalized_frobenius: Option<f64>,
    pub normalized_max: Option<f64>,
}

pub fn norm_diffs(d: &DistanceMatrix, dhat: &DistanceMatrix) -> Result<NormDiffs> {
    if d.dim() != dhat.dim() {
        return Err(HeatGeoError::parameter("distance matrices differ in size"));
    }
    let frob = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_abs = |m: &Array2<f64>| m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let diff = d.matrix() - dhat.matrix();
    let raw_frobenius = frob(&diff);
    let raw_max = max_abs(&diff);

    let nd = frob(d.matrix());
    let nh = frob(dhat.matrix());
    let (normalized_frobenius, normalized_max) = if nd > 0.0 && nh > 0.0 {
        let scaled = d.matrix() / nd - dhat.matrix() / nh;
        (Some(frob(&scaled)), Some(max_abs(&scaled)))
    } else {
        (None, None)
    };
    Ok(NormDiffs {
        raw_frobenius,
        raw_max,
        normalized_frobenius,
        normalized_max,
    })
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub centers: Array2<f64>,
}

fn sq_dist_rows(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[[i, c]] - b[[j, c]];
        s += d * d;
    }
    s
}

fn lloyd_once(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = points.nrows();
    let dim = points.ncols();

    // k-means++ seeding.
    let mut centers = Array2::<f64>::zeros((k, dim));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut min_sq: Vec<f64> = (0..n).map(|i| sq_dist_rows(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = min_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in min_sq.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for i in 0..n {
            min_sq[i] = min_sq[i].min(sq_dist_rows(points, i, &centers, c));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist_rows(points, i, &centers, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, dim));
        for i in 0..n {
            counts[labels[i]] += 1;
            for c in 0..dim {
                sums[[labels[i], c]] += points[[i, c]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist_rows(points, a, &centers, labels[a])
                            .total_cmp(&sq_dist_rows(points, b, &centers, labels[b]))
                    })
                    .unwrap();
                centers.row_mut(c).assign(&points.row(far));
            } else {
                for d in 0..dim {
                    centers[[c, d]] = sums[[c, d]] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia: f64 = (0..n).map(|i| sq_dist_rows(points, i, &centers, labels[i])).sum();
    KMeansResult {
        labels,
        inertia,
        centers,
    }
}

/// Lloyd k-means with k-means++ seeding; best inertia over `restarts`.
pub fn kmeans(points: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k < 1 || k >= n {
        return Err(HeatGeoError::parameter(format!(
            "k-means needs 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add((r as u64).wrapping_mul(0x9E3779B97F4A7C15)));
        let res = lloyd_once(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
            best = Some(res);
        }
    }
    Ok(best.unwrap())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClusterScores {
    pub homogeneity: f64,
    pub ami: f64,
    pub ari: f64,
}

fn contingency(truth: &[i64], pred: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let mut classes: Vec<i64> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let k_pred = pred.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; k_pred]; classes.len()];
    for (t, &p) in truth.iter().zip(pred) {
        let ti = classes.binary_search(t).unwrap();
        table[ti][p] += 1;
    }
    let a: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let mut b = vec![0usize; k_pred];
    for row in &table {
        for (j, &v) in row.iter().enumerate() {
            b[j] += v;
        }
    }
    (table, a, b)
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Entropy-based homogeneity: 1 - H(C|K) / H(C); defined as 1 when the
/// class entropy is zero.
fn homogeneity_from_table(table: &[Vec<usize>], a: &[usize], b: &[usize], n: usize) -> f64 {
    let h_c = entropy(a, n);
    if h_c == 0.0 {
        return 1.0;
    }
    let mut h_ck = 0.0;
    for (j, &bj) in b.iter().enumerate() {
        if bj == 0 {
            continue;
        }
        for row in table {
            let v = row[j];
            if v > 0 {
                let p = v as f64 / n as f64;
                h_ck -= p * (v as f64 / bj as f64).ln();
            }
        }
    }
    1.0 - h_ck / h_c
}

fn mutual_information(table: &[Vec<usize>], a: &[usize], b: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0 {
                let p = v as f64 / nf;
                mi += p * (nf * v as f64 / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    mi
}

/// Expected mutual information under the permutation model, evaluated with
/// log-factorials over the hypergeometric range of every cell.
fn expected_mutual_information(a: &[usize], b: &[usize], n: usize) -> f64 {
    let mut log_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        log_fact[i] = log_fact[i - 1] + (i as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nij_f = nij as f64;
                let term = nij_f / nf * (nf * nij_f / (ai as f64 * bj as f64)).ln();
                let log_p = log_fact[ai] + log_fact[bj] + log_fact[n - ai] + log_fact[n - bj]
                    - log_fact[n]
                    - log_fact[nij]
                    - log_fact[ai - nij]
                    - log_fact[bj - nij]
                    - log_fact[n + nij - ai - bj];
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

fn ari_from_table(table: &[Vec<usize>], a: &[usize], b: &[usize], n: usize) -> f64 {
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| choose2(v)).sum();
    let sum_a: f64 = a.iter().map(|&v| choose2(v)).sum();
    let sum_b: f64 = b.iter().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Homogeneity, adjusted mutual information (arithmetic mean convention),
/// and adjusted Rand index between a ground-truth and predicted labeling.
pub fn scores_from_labels(truth: &[i64], pred: &[usize]) -> Result<ClusterScores> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(HeatGeoError::parameter("label vectors must match and be nonempty"));
    }
    let n = truth.len();
    let (table, a, b) = contingency(truth, pred);
    let homogeneity = homogeneity_from_table(&table, &a, &b, n);
    let mi = mutual_information(&table, &a, &b, n);
    let emi = expected_mutual_information(&a, &b, n);
    let h_mean = 0.5 * (entropy(&a, n) + entropy(&b, n));
    let denom = h_mean - emi;
    let ami = if denom.abs() < 1e-12 {
        if (mi - emi).abs() < 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        (mi - emi) / denom
    };
    let ari = ari_from_table(&table, &a, &b, n);
    Ok(ClusterScores {
        homogeneity,
        ami,
        ari,
    })
}

/// k-means on an embedding followed by agreement scores against the true
/// labels.
pub fn clustering_scores(
    coords: &Array2<f64>,
    true_labels: &[i64],
    n_clusters: usize,
    seed: u64,
) -> Result<ClusterScores> {
    let n = coords.nrows();
    if true_labels.len() != n {
        return Err(HeatGeoError::parameter("label count does not match embedding"));
    }
    if n_clusters < 2 {
        return Err(HeatGeoError::parameter("need at least 2 clusters"));
    }
    if n_clusters >= n {
        return Err(HeatGeoError::parameter("n_clusters must be below n"));
    }
    let mut distinct = true_labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(HeatGeoError::parameter("labels must cover at least 2 classes"));
    }
    let km = kmeans(coords, n_clusters, 10, seed)?;
    scores_from_labels(true_labels, &km.labels)
}

/// Minimum-cost assignment on a square cost matrix; `result[row] = col`.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Earth mover distance between equal-size point multisets: mean Euclidean
/// transport cost of the optimal assignment.
pub fn emd(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(HeatGeoError::parameter("EMD needs equal-size point sets"));
    }
    let m = a.nrows();
    if m == 0 {
        return Err(HeatGeoError::parameter("EMD of empty sets"));
    }
    let cost = Array2::from_shape_fn((m, m), |(i, j)| sq_dist_rows(a, i, b, j).sqrt());
    let assign = hungarian(&cost);
    Ok(assign
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[[i, j]])
        .sum::<f64>()
        / m as f64)
}

fn group_indices(timepoints: &[i64], t: i64) -> Vec<usize> {
    timepoints
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == t)
        .map(|(i, _)| i)
        .collect()
}

fn subsample(indices: &[usize], m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if indices.len() <= m {
        return indices.to_vec();
    }
    let picked = rand::seq::index::sample(rng, indices.len(), m);
    picked.into_iter().map(|i| indices[i]).collect()
}

fn rows(coords: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), coords.ncols()), |(r, c)| coords[[idx[r], c]])
}

/// Hold out one timepoint, predict it by displacement interpolation between
/// its neighbors (midpoints of the squared-cost optimal assignment), and
/// return the EMD between the prediction and the true held-out points.
pub fn interpolation_emd(
    coords: &Array2<f64>,
    timepoints: &[i64],
    held_out: i64,
    seed: u64,
) -> Result<f64> {
    if timepoints.len() != coords.nrows() {
        return Err(HeatGeoError::parameter("timepoint count does not match embedding"));
    }
    let mut distinct: Vec<i64> = timepoints.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let prev = distinct
        .iter()
        .rev()
        .find(|&&t| t < held_out)
        .copied()
        .ok_or_else(|| HeatGeoError::parameter("held-out time has no predecessor"))?;
    let next = distinct
        .iter()
        .find(|&&t| t > held_out)
        .copied()
        .ok_or_else(|| HeatGeoError::parameter("held-out time has no successor"))?;
    let held_idx = group_indices(timepoints, held_out);
    if held_idx.is_empty() {
        return Err(HeatGeoError::parameter("held-out time has no points"));
    }
    let prev_idx = group_indices(timepoints, prev);
    let next_idx = group_indices(timepoints, next);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = prev_idx.len().min(next_idx.len()).min(500);
    let prev_pts = rows(coords, &subsample(&prev_idx, m, &mut rng));
    let next_pts = rows(coords, &subsample(&next_idx, m, &mut rng));

    // Squared-cost matching, then McCann midpoints.
    let cost = Array2::from_shape_fn((m, m), |(i, j)| sq_dist_rows(&prev_pts, i, &next_pts, j));
    let assign = hungarian(&cost);
    let mut predicted = Array2::<f64>::zeros((m, coords.ncols()));
    for (i, &j) in assign.iter().enumerate() {
        for c in 0..coords.ncols() {
            predicted[[i, c]] = 0.5 * (prev_pts[[i, c]] + next_pts[[j, c]]);
        }
    }

    let m_final = m.min(held_idx.len());
    let truth = rows(coords, &subsample(&held_idx, m_final, &mut rng));
    let predicted = if m_final < m {
        let keep = subsample(&(0..m).collect::<Vec<_>>(), m_final, &mut rng);
        rows(&predicted, &keep)
    } else {
        predicted
    };
    emd(&predicted, &truth)
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse on distance for a min-heap.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn dijkstra(lengths: &SparseSymMatrix, source: usize) -> Vec<f64> {
    let n = lengths.dim();
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for (j, w) in lengths.row(node) {
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(HeapEntry { dist: nd, node: j });
            }
        }
    }
    dist
}

/// All-pairs shortest paths over a graph whose weights are edge lengths
/// (see `graph::knn_edge_lengths`). Errors on disconnected graphs.
pub fn shortest_path_baseline(edge_lengths: &SparseSymMatrix) -> Result<DistanceMatrix> {
    let sizes = edge_lengths.component_sizes();
    if sizes.len() > 1 {
        return Err(HeatGeoError::Disconnected {
            components: sizes.len(),
            sizes,
        });
    }
    let n = edge_lengths.dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| dijkstra(edge_lengths, s))
        .collect();
    let mut out = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    // Dijkstra from each source is exact and symmetric for symmetric
    // lengths; mirror to remove rounding noise.
    for i in 0..n {
        out[[i, i]] = 0.0;
        for j in 0..i {
            let v = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    DistanceMatrix::new(out, Provenance::GroundTruth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn dm(m: Array2<f64>) -> DistanceMatrix {
        DistanceMatrix::new(m, Provenance::GroundTruth).unwrap()
    }

    fn random_distance_matrix(n: usize, seed: u64) -> DistanceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rng.random_range(0.1..10.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        dm(m)
    }

    #[test]
    fn correlations_of_identical_matrices() {
        let d = random_distance_matrix(8, 1);
        let r = row_correlations(&d, &d).unwrap();
        assert!((r.pearson - 1.0).abs() < 1e-12);
        assert!((r.spearman - 1.0).abs() < 1e-12);
        assert_eq!(r.degenerate_rows, 0);
    }

    #[test]
    fn pearson_affine_invariance() {
        let d = random_distance_matrix(8, 2);
        let scaled = dm(d.matrix() * 3.0 + d.matrix().mapv(|v| if v > 0.0 { 0.7 } else { 0.0 }));
        let r = row_correlations(&d, &scaled).unwrap();
        assert!((r.pearson - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spearman_monotone_invariance() {
        let d = random_distance_matrix(9, 3);
        let transformed = dm(d.matrix().mapv(|v| v.powi(3)));
        let r = row_correlations(&d, &transformed).unwrap();
        assert!((r.spearman - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_match_textbook_formula() {
        let d = random_distance_matrix(5, 4);
        let e = random_distance_matrix(5, 5);
        let r = row_correlations(&d, &e).unwrap();
        // Direct covariance / sigma oracle.
        let mut total = 0.0;
        for i in 0..5 {
            let a: Vec<f64> = (0..5).filter(|&j| j != i).map(|j| d.matrix()[[i, j]]).collect();
            let b: Vec<f64> = (0..5).filter(|&j| j != i).map(|j| e.matrix()[[i, j]]).collect();
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
            let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
            let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
            total += cov / (sa * sb);
        }
        assert!((r.pearson - total / 5.0).abs() < 1e-12);
    }

    #[test]
    fn constant_row_counts_as_degenerate() {
        let d = dm(arr2(&[
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 2.0],
            [1.0, 1.0, 2.0, 0.0],
        ]));
        let e = random_distance_matrix(4, 6);
        let r = row_correlations(&d, &e).unwrap();
        assert!(r.degenerate_rows >= 1);
    }

    #[test]
    fn norms_zero_for_identical() {
        let d = random_distance_matrix(6, 7);
        let n = norm_diffs(&d, &d).unwrap();
        assert_eq!(n.raw_frobenius, 0.0);
        assert_eq!(n.raw_max, 0.0);
        assert_eq!(n.normalized_frobenius, Some(0.0));
    }

    #[test]
    fn norms_scale_cancellation() {
        let d = random_distance_matrix(6, 8);
        let doubled = dm(d.matrix() * 2.0);
        let n = norm_diffs(&d, &doubled).unwrap();
        assert!(n.normalized_frobenius.unwrap() < 1e-12);
        assert!(n.normalized_max.unwrap() < 1e-12);
        let frob_d = d.matrix().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n.raw_frobenius - frob_d).abs() < 1e-12);
        let max_d = d.matrix().iter().fold(0.0f64, |m, v| m.max(*v));
        assert!((n.raw_max - max_d).abs() < 1e-12);
    }

    #[test]
    fn norms_hand_example() {
        let d = dm(arr2(&[[0.0, 1.0], [1.0, 0.0]]));
        let e = dm(arr2(&[[0.0, 2.0], [2.0, 0.0]]));
        let n = norm_diffs(&d, &e).unwrap();
        assert!((n.raw_frobenius - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((n.raw_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let truth = vec![0i64, 0, 1, 1, 2, 2];
        let pred = vec![2usize, 2, 0, 0, 1, 1];
        let s = scores_from_labels(&truth, &pred).unwrap();
        assert!((s.homogeneity - 1.0).abs() < 1e-12);
        assert!((s.ami - 1.0).abs() < 1e-9);
        assert!((s.ari - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_zero_homogeneity() {
        let truth = vec![0i64, 0, 1, 1];
        let pred = vec![0usize, 0, 0, 0];
        let s = scores_from_labels(&truth, &pred).unwrap();
        assert!(s.homogeneity.abs() < 1e-12);
    }

    #[test]
    fn contingency_oracle_for_fixed_table() {
        // truth [[2,0],[0,2]] vs pred [[1,1],[1,1]]: labels 0,0,1,1 against
        // predictions 0,1,0,1. Oracle computed from the contingency
        // formulas directly.
        let truth = vec![0i64, 0, 1, 1];
        let pred = vec![0usize, 1, 0, 1];
        let s = scores_from_labels(&truth, &pred).unwrap();
        // All cells are 1: MI = 0, H(C|K) = H(C) = ln 2.
        assert!(s.homogeneity.abs() < 1e-12);
        // ARI: index = 0, expected = 1*1/6... with sum_a = sum_b = 2,
        // total = 6: expected = 4/6, max = 2 -> (0 - 2/3)/(2 - 2/3) = -0.5.
        assert!((s.ari + 0.5).abs() < 1e-12);
        // MI = EMI under independence-like tables gives AMI <= 0.
        assert!(s.ami <= 1e-9);
    }

    #[test]
    fn ami_self_is_one_and_random_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let truth: Vec<i64> = (0..60).map(|i| (i % 3) as i64).collect();
        let as_pred: Vec<usize> = truth.iter().map(|&v| v as usize).collect();
        let s = scores_from_labels(&truth, &as_pred).unwrap();
        assert!((s.ami - 1.0).abs() < 1e-9);

        let mut total = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let pred: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
            if pred.iter().collect::<std::collections::HashSet<_>>().len() < 2 {
                continue;
            }
            total += scores_from_labels(&truth, &pred).unwrap().ami;
        }
        let mean = total / trials as f64;
        assert!(mean.abs() <= 0.05, "mean AMI against random labels: {mean}");
    }

    #[test]
    fn kmeans_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Array2::<f64>::zeros((40, 2));
        for i in 0..40 {
            let offset = if i < 20 { 0.0 } else { 50.0 };
            pts[[i, 0]] = offset + rng.random_range(-1.0..1.0);
            pts[[i, 1]] = rng.random_range(-1.0..1.0);
        }
        let km = kmeans(&pts, 2, 10, 1).unwrap();
        let first = km.labels[0];
        assert!(km.labels[..20].iter().all(|&l| l == first));
        assert!(km.labels[20..].iter().all(|&l| l != first));
    }

    #[test]
    fn clustering_scores_validations() {
        let pts = Array2::<f64>::zeros((4, 2));
        assert!(clustering_scores(&pts, &[0, 0, 1, 1], 4, 0).is_err());
        assert!(clustering_scores(&pts, &[0, 0, 0, 0], 2, 0).is_err());
        assert!(clustering_scores(&pts, &[0, 1], 2, 0).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 5;
            let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..10.0));
            let assign = hungarian(&cost);
            let got: f64 = assign.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();

            // Brute force over all permutations.
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..n).collect();
            permute(&mut perm, 0, &mut |p| {
                let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
                if c < best {
                    best = c;
                }
            });
            assert!((got - best).abs() < 1e-9, "hungarian {got} vs brute {best}");
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn emd_trivial_cases() {
        let a = arr2(&[[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(emd(&a, &a).unwrap(), 0.0);
        let p = arr2(&[[0.0]]);
        let q = arr2(&[[3.0]]);
        assert!((emd(&p, &q).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn emd_three_points_vs_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = Array2::from_shape_fn((3, 2), |_| rng.random_range(-5.0..5.0));
            let b = Array2::from_shape_fn((3, 2), |_| rng.random_range(-5.0..5.0));
            let got = emd(&a, &b).unwrap();
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..3).collect();
            permute(&mut perm, 0, &mut |p| {
                let c: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| sq_dist_rows(&a, i, &b, j).sqrt())
                    .sum();
                best = best.min(c / 3.0);
            });
            assert!((got - best).abs() < 1e-10);
        }
    }

    #[test]
    fn emd_is_a_metric_on_small_multisets() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..5 {
            let m = 4 + trial % 3;
            let gen = |rng: &mut ChaCha8Rng| {
                Array2::from_shape_fn((m, 2), |_| rng.random_range(-3.0..3.0))
            };
            let a = gen(&mut rng);
            let b = gen(&mut rng);
            let c = gen(&mut rng);
            let ab = emd(&a, &b).unwrap();
            let ba = emd(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-10, "symmetry");
            let ac = emd(&a, &c).unwrap();
            let cb = emd(&c, &b).unwrap();
            assert!(ab <= ac + cb + 1e-9, "triangle inequality");
        }
    }

    #[test]
    fn interpolation_emd_midpoint_structure() {
        // Three groups on a line at 0, 5, 10; prediction of the middle is
        // exact midpoints, so EMD is small.
        let mut coords = Array2::<f64>::zeros((30, 2));
        let mut times = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..3 {
            for i in 0..10 {
                let row = t * 10 + i;
                coords[[row, 0]] = 5.0 * t as f64 + rng.random_range(-0.2..0.2);
                coords[[row, 1]] = rng.random_range(-0.2..0.2);
                times.push(t as i64);
            }
        }
        let e = interpolation_emd(&coords, &times, 1, 0).unwrap();
        assert!(e < 1.0, "EMD {e} too large for exact midpoints");
        assert!(interpolation_emd(&coords, &times, 0, 0).is_err());
        assert!(interpolation_emd(&coords, &times, 2, 0).is_err());
    }

    #[test]
    fn shortest_path_on_path_graph() {
        let mut trip = Vec::new();
        for i in 0..5usize {
            if i + 1 < 5 {
                trip.push((i, i + 1, 1.0));
                trip.push((i + 1, i, 1.0));
            }
        }
        let lengths = SparseSymMatrix::from_triplets(5, &trip).unwrap();
        let d = shortest_path_baseline(&lengths).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((d.matrix()[[i, j]] - (i as f64 - j as f64).abs()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shortest_path_triangle_direct_edge_wins() {
        let lengths = SparseSymMatrix::from_triplets(
            3,
            &[
                (0, 1, 3.0),
                (1, 0, 3.0),
                (1, 2, 4.0),
                (2, 1, 4.0),
                (0, 2, 5.0),
                (2, 0, 5.0),
            ],
        )
        .unwrap();
        let d = shortest_path_baseline(&lengths).unwrap();
        assert!((d.matrix()[[0, 2]] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_path_matches_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10;
        let mut trip = Vec::new();
        // Ring for connectivity plus random chords.
        for i in 0..n {
            let j = (i + 1) % n;
            let w = rng.random_range(0.5..2.0);
            trip.push((i, j, w));
            trip.push((j, i, w));
        }
        for _ in 0..6 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || trip.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                continue;
            }
            let w = rng.random_range(0.5..3.0);
            trip.push((i, j, w));
            trip.push((j, i, w));
        }
        let lengths = SparseSymMatrix::from_triplets(n, &trip).unwrap();
        let d = shortest_path_baseline(&lengths).unwrap();

        // Floyd-Warshall oracle.
        let mut fw = Array2::<f64>::from_elem((n, n), f64::INFINITY);
        for i in 0..n {
            fw[[i, i]] = 0.0;
        }
        for (i, j, w) in lengths.entries() {
            fw[[i, j]] = fw[[i, j]].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = fw[[i, k]] + fw[[k, j]];
                    if via < fw[[i, j]] {
                        fw[[i, j]] = via;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (d.matrix()[[i, j]] - fw[[i, j]]).abs() < 1e-9,
                    "mismatch at ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn shortest_path_rejects_disconnected() {
        let lengths =
            SparseSymMatrix::from_triplets(4, &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)])
                .unwrap();
        match shortest_path_baseline(&lengths) {
            Err(HeatGeoError::Disconnected { components: 2, sizes }) => {
                assert_eq!(sizes, vec![2, 2]);
            }
            other => panic!("expected disconnected, got {other:?}"),
        }
    }
}
