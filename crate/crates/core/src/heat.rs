//! Graph heat kernels `H_t = exp(-t L)`: exact eigendecomposition, a
//! Chebyshev polynomial approximation with Bessel-function coefficients, a
//! backward-Euler approximation, and entropy-based diffusion time selection.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{HeatGeoError, Result};
use crate::graph::{Laplacian, LaplacianKind};
use crate::knee::detect_knee;
use crate::linalg::{eigh, power_iteration_lambda_max, CholeskyFactor};

/// Guard for the dense eigendecomposition path.
const EXACT_MAX_N: usize = 5000;
/// Power-iteration steps used to bound the combinatorial spectrum.
const POWER_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HeatMethod {
    Exact,
    Chebyshev(usize),
    Euler(usize),
}

#[derive(Debug, Clone)]
pub struct HeatKernel {
    pub matrix: Array2<f64>,
    pub time: f64,
    pub laplacian_kind: LaplacianKind,
    pub method: HeatMethod,
}

/// Result of the entropy knee-point search over a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSelection {
    pub grid: Vec<f64>,
    pub entropies: Vec<f64>,
    pub chosen: f64,
    /// False when no knee was found and the grid midpoint was returned.
    pub knee_found: bool,
}

fn validate_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(HeatGeoError::parameter(format!(
            "diffusion time must be finite and nonnegative, got {t}"
        )));
    }
    Ok(())
}

/// Factor `s` such that `L / s` has spectrum inside [0, 2]; the Chebyshev
/// shift assumes this. The normalized kinds satisfy it already. For the
/// combinatorial Laplacian a guaranteed Gershgorin bound is used: a
/// power-iteration estimate can come in low, and an argument even slightly
/// outside [-1, 1] makes high-order Chebyshev sums diverge. Overestimating
/// the top eigenvalue costs nothing because
/// `exp(-(s t) (L / s)) = exp(-t L)` for any s.
pub(crate) fn spectral_scale(l: &Laplacian) -> f64 {
    match l.kind() {
        LaplacianKind::SymmetricNormalized | LaplacianKind::RandomWalk => 1.0,
        LaplacianKind::Combinatorial => {
            let bound = (0..l.dim())
                .map(|i| l.core().row(i).map(|(_, v)| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            if bound <= 2.0 {
                1.0
            } else {
                bound / 2.0
            }
        }
    }
}

/// `D^{-1/2} M D^{1/2}` applied in place: maps a symmetric-kind kernel to
/// the random-walk kernel.
fn random_walk_transform(m: &mut Array2<f64>, degrees: &ndarray::Array1<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] *= (degrees[j] / degrees[i]).sqrt();
        }
    }
}

/// Exact heat kernel via dense eigendecomposition.
pub fn exact_heat(l: &Laplacian, t: f64) -> Result<HeatKernel> {
    validate_time(t)?;
    let n = l.dim();
    if n > EXACT_MAX_N {
        return Err(HeatGeoError::parameter(format!(
            "exact heat kernel guard: n={n} exceeds {EXACT_MAX_N}"
        )));
    }
    if !l.core().is_symmetric(1e-10) {
        return Err(HeatGeoError::parameter("Laplacian matrix is not symmetric"));
    }
    let mut matrix = if t == 0.0 {
        Array2::eye(n)
    } else {
        let eig = eigh(&l.core().to_dense())?;
        let mut scaled = eig.vectors.clone();
        for (c, &lambda) in eig.values.iter().enumerate() {
            let w = (-t * lambda).exp();
            scaled.column_mut(c).mapv_inplace(|v| v * w);
        }
        scaled.dot(&eig.vectors.t())
    };
    if l.kind() == LaplacianKind::RandomWalk {
        random_walk_transform(&mut matrix, l.degrees());
    }
    Ok(HeatKernel {
        matrix,
        time: t,
        laplacian_kind: l.kind(),
        method: HeatMethod::Exact,
    })
}

/// Scaled modified Bessel coefficients `c_k = exp(-t) I_k(t)` for
/// k = 0..=order, by downward recurrence normalized with
/// `I_0(t) + 2 sum_k I_k(t) = exp(t)`.
fn bessel_coefficients(t: f64, order: usize) -> Vec<f64> {
    if t == 0.0 {
        let mut c = vec![0.0; order + 1];
        c[0] = 1.0;
        return c;
    }
    let start = order + 10 + (t + 2.0 * t.sqrt()).ceil() as usize;
    let mut f = vec![0.0f64; start + 2];
    f[start] = 1e-280;
    for k in (1..=start).rev() {
        let val = f[k + 1] + (2.0 * k as f64 / t) * f[k];
        f[k - 1] = val;
        if val > 1e250 {
            for g in f[k - 1..].iter_mut() {
                *g *= 1e-250;
            }
        }
    }
    let norm = f[0] + 2.0 * f[1..].iter().sum::<f64>();
    f.truncate(order + 1);
    for v in &mut f {
        *v /= norm;
    }
    f
}

/// Chebyshev approximation of the heat kernel at several times at once.
/// The polynomial terms `T_k(L - I)` are built once with K sparse products
/// and reweighted per time with the Bessel coefficients.
pub fn chebyshev_heat(l: &Laplacian, times: &[f64], order: usize) -> Result<Vec<HeatKernel>> {
    if order < 1 {
        return Err(HeatGeoError::parameter("Chebyshev order must be at least 1"));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    for &t in times {
        validate_time(t)?;
    }
    let n = l.dim();
    let scale = spectral_scale(l);
    let core = if scale == 1.0 {
        l.core().clone()
    } else {
        l.core().scaled(1.0 / scale)
    };
    let check = power_iteration_lambda_max(&core, POWER_STEPS);
    if check > 2.0 + 1e-9 {
        return Err(HeatGeoError::numerical(
            "chebyshev",
            format!("spectral radius {check} exceeds 2 after rescaling"),
        ));
    }

    // c[i][k] = exp(-t'_i) I_k(t'_i) for the rescaled times.
    let coeffs: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| bessel_coefficients(scale * t, order))
        .collect();

    let eye: Array2<f64> = Array2::eye(n);
    let mut acc: Vec<Array2<f64>> = coeffs.iter().map(|c| &eye * c[0]).collect();

    // T_1 = (L' - I); T_k = 2 (L' - I) T_{k-1} - T_{k-2}.
    let mut t_prev = eye;
    let mut t_cur = core.to_dense();
    t_cur.diag_mut().map_inplace(|v| *v -= 1.0);
    for (a, c) in acc.iter_mut().zip(&coeffs) {
        a.scaled_add(-2.0 * c[1], &t_cur);
    }
    for k in 2..=order {
        let mut t_next = core.shifted_matmul_dense(&t_cur);
        t_next.mapv_inplace(|v| 2.0 * v);
        t_next -= &t_prev;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (a, c) in acc.iter_mut().zip(&coeffs) {
            a.scaled_add(2.0 * sign * c[k], &t_next);
        }
        t_prev = t_cur;
        t_cur = t_next;
    }

    Ok(times
        .iter()
        .zip(acc)
        .map(|(&t, mut matrix)| {
            if l.kind() == LaplacianKind::RandomWalk {
                random_walk_transform(&mut matrix, l.degrees());
            }
            HeatKernel {
                matrix,
                time: t,
                laplacian_kind: l.kind(),
                method: HeatMethod::Chebyshev(order),
            }
        })
        .collect())
}

/// Backward-Euler approximation `(I + (t/K) L)^{-K}` via one Cholesky
/// factorization reused across all K steps and all right-hand sides.
pub fn euler_heat(l: &Laplacian, t: f64, steps: usize) -> Result<HeatKernel> {
    validate_time(t)?;
    if steps < 1 {
        return Err(HeatGeoError::parameter("Euler steps must be at least 1"));
    }
    let n = l.dim();
    let mut a = l.core().to_dense();
    a.mapv_inplace(|v| v * t / steps as f64);
    a.diag_mut().map_inplace(|v| *v += 1.0);
    let factor = CholeskyFactor::new(&a)
        .map_err(|_| HeatGeoError::numerical("euler", "system matrix is not positive definite"))?;

    let mut x = Array2::<f64>::eye(n);
    let mut prev = x.clone();
    for _ in 0..steps {
        prev = x;
        x = factor.solve_matrix(&prev);
    }
    let residual = (&a.dot(&x) - &prev)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > 1e-6 {
        return Err(HeatGeoError::numerical(
            "euler",
            format!("solve residual norm {residual}"),
        ));
    }

    let mut matrix = x;
    if l.kind() == LaplacianKind::RandomWalk {
        random_walk_transform(&mut matrix, l.degrees());
    }
    Ok(HeatKernel {
        matrix,
        time: t,
        laplacian_kind: l.kind(),
        method: HeatMethod::Euler(steps),
    })
}

/// Entropy `-sum_ij h_ij log h_ij` with the convention that entries at or
/// below zero contribute nothing (approximation ringing is floored).
pub fn heat_entropy(h: &HeatKernel) -> f64 {
    matrix_entropy(&h.matrix)
}

pub(crate) fn matrix_entropy(m: &Array2<f64>) -> f64 {
    -m.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Chebyshev order large enough for the coefficient tail at effective time
/// `t` to be negligible.
pub(crate) fn order_for_time(t: f64) -> usize {
    (t + 12.0 * t.sqrt() + 20.0).ceil() as usize
}

/// Select a diffusion time on a grid by the knee of the entropy curve,
/// computed with the shared-term Chebyshev path at the given order. The
/// order is used as passed: past the resolution of the K-term polynomial
/// the kernels stop evolving, which is where the entropy curve bends.
pub fn select_time_knee(l: &Laplacian, grid: &[f64], order: usize) -> Result<TimeSelection> {
    if grid.len() < 5 {
        return Err(HeatGeoError::parameter("time grid needs at least 5 points"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HeatGeoError::parameter("time grid must be strictly increasing"));
    }
    if grid[0] <= 0.0 {
        return Err(HeatGeoError::parameter("time grid must be positive"));
    }
    let kernels = chebyshev_heat(l, grid, order)?;
    let entropies: Vec<f64> = kernels.iter().map(heat_entropy).collect();
    if entropies.iter().any(|e| !e.is_finite()) {
        return Err(HeatGeoError::numerical(
            "select_time_knee",
            "non-finite entropy on the grid",
        ));
    }
    let knee = detect_knee(grid, &entropies, 1.0, 1);
    let (chosen, knee_found) = match knee {
        Some(idx) => (grid[idx], true),
        None => (grid[grid.len() / 2], false),
    };
    Ok(TimeSelection {
        grid: grid.to_vec(),
        entropies,
        chosen,
        knee_found,
    })
}

/// Log-spaced time grid, the default candidate set for knee selection.
pub fn log_time_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (ll, lh) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (ll + (lh - ll) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::laplacian;
    use crate::sparse::SparseSymMatrix;

    fn two_node() -> Laplacian {
        let w = SparseSymMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        laplacian(&w, LaplacianKind::Combinatorial).unwrap()
    }

    fn triangle() -> Laplacian {
        let w = SparseSymMatrix::from_triplets(
            3,
            &[
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
            ],
        )
        .unwrap();
        laplacian(&w, LaplacianKind::Combinatorial).unwrap()
    }

    fn cycle(n: usize, kind: LaplacianKind) -> Laplacian {
        let mut trip = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            trip.push((i, j, 1.0));
            trip.push((j, i, 1.0));
        }
        let w = SparseSymMatrix::from_triplets(n, &trip).unwrap();
        laplacian(&w, kind).unwrap()
    }

    /// Closed form for the 2-node unit graph: eigenvalues {0, 2}, so
    /// H_t = [[(1+e^{-2t})/2, (1-e^{-2t})/2], ...].
    fn two_node_offdiag(t: f64) -> f64 {
        (1.0 - (-2.0 * t).exp()) / 2.0
    }

    #[test]
    fn exact_two_node_half_time() {
        let h = exact_heat(&two_node(), 0.5).unwrap();
        let off = two_node_offdiag(0.5);
        assert!((off - 0.316060).abs() < 1e-6);
        assert!((h.matrix[[0, 1]] - off).abs() < 1e-12);
        assert!((h.matrix[[0, 0]] - (1.0 - off)).abs() < 1e-12);
        assert!((h.matrix[[0, 0]] - 0.683940).abs() < 1e-6);
    }

    #[test]
    fn exact_zero_time_is_identity() {
        let h = exact_heat(&triangle(), 0.0).unwrap();
        assert_eq!(h.matrix, Array2::<f64>::eye(3));
        let h = exact_heat(&triangle(), 1e-14).unwrap();
        for i in 0..3 {
            assert!((h.matrix[[i, i]] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_triangle_long_time_uniform() {
        // Eigenvalues {0, 3, 3}; e^{-150} vanishes, leaving the projection
        // onto the constant eigenvector.
        let h = exact_heat(&triangle(), 50.0).unwrap();
        for v in h.matrix.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_time_rejected() {
        assert!(exact_heat(&two_node(), -1.0).is_err());
        assert!(chebyshev_heat(&two_node(), &[-0.1], 10).is_err());
        assert!(euler_heat(&two_node(), -0.1, 5).is_err());
    }

    #[test]
    fn chebyshev_matches_exact_two_node() {
        let l = two_node();
        let h = &chebyshev_heat(&l, &[0.5], 30).unwrap()[0];
        assert!((h.matrix[[0, 1]] - two_node_offdiag(0.5)).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_zero_time_identity() {
        let l = triangle();
        let h = &chebyshev_heat(&l, &[0.0], 20).unwrap()[0];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h.matrix[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chebyshev_cycle_close_to_exact() {
        let l = cycle(20, LaplacianKind::SymmetricNormalized);
        let exact = exact_heat(&l, 10.0).unwrap();
        let approx = &chebyshev_heat(&l, &[10.0], 40).unwrap()[0];
        let err = (&approx.matrix - &exact.matrix)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-6, "max error {err}");
    }

    #[test]
    fn chebyshev_handles_combinatorial_rescaling() {
        // Star graph K_{1,4}: top combinatorial eigenvalue is 5 > 2.
        let mut trip = Vec::new();
        for leaf in 1..5 {
            trip.push((0, leaf, 1.0));
            trip.push((leaf, 0, 1.0));
        }
        let w = SparseSymMatrix::from_triplets(5, &trip).unwrap();
        let l = laplacian(&w, LaplacianKind::Combinatorial).unwrap();
        let exact = exact_heat(&l, 0.8).unwrap();
        let approx = &chebyshev_heat(&l, &[0.8], 40).unwrap()[0];
        let err = (&approx.matrix - &exact.matrix)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn chebyshev_multi_time_matches_single_calls() {
        let l = cycle(12, LaplacianKind::SymmetricNormalized);
        let batched = chebyshev_heat(&l, &[0.5, 2.0, 8.0], 30).unwrap();
        for (i, &t) in [0.5, 2.0, 8.0].iter().enumerate() {
            let single = &chebyshev_heat(&l, &[t], 30).unwrap()[0];
            assert_eq!(batched[i].matrix, single.matrix, "t = {t}");
        }
    }

    #[test]
    fn euler_single_step_closed_form() {
        // (I + 0.5 L)^{-1} = [[0.75, 0.25], [0.25, 0.75]] by 2x2 inverse.
        let h = euler_heat(&two_node(), 0.5, 1).unwrap();
        let expect = [[0.75, 0.25], [0.25, 0.75]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.matrix[[i, j]] - expect[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_many_steps_close_to_exact() {
        let h = euler_heat(&two_node(), 0.5, 200).unwrap();
        assert!((h.matrix[[0, 1]] - two_node_offdiag(0.5)).abs() < 2e-3);
    }

    #[test]
    fn euler_zero_time_identity() {
        let h = euler_heat(&triangle(), 0.0, 4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h.matrix[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_identity_is_zero() {
        let h = exact_heat(&two_node(), 0.0).unwrap();
        assert_eq!(heat_entropy(&h), 0.0);
    }

    #[test]
    fn entropy_two_node_scalar_oracle() {
        let h = exact_heat(&two_node(), 0.5).unwrap();
        let a = 1.0 - two_node_offdiag(0.5);
        let b = two_node_offdiag(0.5);
        let expect = -2.0 * (a * a.ln() + b * b.ln());
        assert!((heat_entropy(&h) - expect).abs() < 1e-12);
        assert!((expect - 1.2478).abs() < 1e-3);
    }

    #[test]
    fn entropy_uniform_triangle() {
        let h = exact_heat(&triangle(), 60.0).unwrap();
        let expect = 3.0 * 3.0f64.ln();
        assert!((heat_entropy(&h) - expect).abs() < 1e-8);
    }

    #[test]
    fn semigroup_property() {
        let l = cycle(9, LaplacianKind::Combinatorial);
        let h_t = exact_heat(&l, 0.7).unwrap();
        let h_s = exact_heat(&l, 1.3).unwrap();
        let h_ts = exact_heat(&l, 2.0).unwrap();
        let prod = h_t.matrix.dot(&h_s.matrix);
        let err = (&prod - &h_ts.matrix)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-8, "semigroup error {err}");
    }

    #[test]
    fn combinatorial_kernel_is_stochastic() {
        let l = cycle(15, LaplacianKind::Combinatorial);
        for h in [
            exact_heat(&l, 1.7).unwrap(),
            chebyshev_heat(&l, &[1.7], 30).unwrap().remove(0),
        ] {
            for i in 0..15 {
                let s: f64 = h.matrix.row(i).sum();
                assert!((s - 1.0).abs() <= 1e-6, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn kernel_symmetry() {
        for kind in [LaplacianKind::Combinatorial, LaplacianKind::SymmetricNormalized] {
            let l = cycle(11, kind);
            let h = exact_heat(&l, 2.5).unwrap();
            let err = (&h.matrix - &h.matrix.t())
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-8);
        }
    }

    #[test]
    fn random_walk_kernel_via_similarity() {
        // On a path graph degrees differ, so the random-walk kernel is
        // genuinely asymmetric but must keep row sums at one.
        let w = SparseSymMatrix::from_triplets(
            3,
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        let l = laplacian(&w, LaplacianKind::RandomWalk).unwrap();
        let h = exact_heat(&l, 1.0).unwrap();
        for i in 0..3 {
            let s: f64 = h.matrix.row(i).sum();
            assert!((s - 1.0).abs() < 1e-10, "row {i} sums to {s}");
        }
        assert!((h.matrix[[0, 1]] - h.matrix[[1, 0]]).abs() > 1e-6);
    }

    #[test]
    fn chebyshev_error_non_increasing_in_order() {
        let l = cycle(14, LaplacianKind::SymmetricNormalized);
        let exact = exact_heat(&l, 5.0).unwrap();
        let mut last = f64::INFINITY;
        for order in [5, 10, 20, 40] {
            let approx = &chebyshev_heat(&l, &[5.0], order).unwrap()[0];
            let err = (&approx.matrix - &exact.matrix)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= last + 1e-12, "error grew at order {order}");
            last = err;
        }
        assert!(last <= 1e-6);
    }

    #[test]
    fn entropy_monotone_on_exact_grid() {
        let l = cycle(24, LaplacianKind::Combinatorial);
        let grid = log_time_grid(0.05, 50.0, 12);
        let mut prev = -1.0;
        for &t in &grid {
            let e = heat_entropy(&exact_heat(&l, t).unwrap());
            assert!(e >= prev - 1e-9, "entropy decreased at t={t}");
            prev = e;
        }
    }

    #[test]
    fn knee_selection_on_cycle() {
        let l = cycle(30, LaplacianKind::SymmetricNormalized);
        let grid = log_time_grid(0.05, 200.0, 20);
        let sel = select_time_knee(&l, &grid, 30).unwrap();
        assert_eq!(sel.entropies.len(), 20);
        assert!(sel.grid.contains(&sel.chosen));
        assert!(sel.entropies.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn knee_rejects_bad_grid() {
        let l = cycle(8, LaplacianKind::SymmetricNormalized);
        assert!(select_time_knee(&l, &[1.0, 0.5, 2.0, 3.0, 4.0], 10).is_err());
        assert!(select_time_knee(&l, &[1.0, 2.0], 10).is_err());
    }
}
