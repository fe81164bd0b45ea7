//! Iterated kernels, operator norms, Neumann sums, and minimal solutions of
//! `u = Tu + g` for integral operators `Tf(x) = Σ_y K(x,y) f(y) ω_y`.
//!
//! `H = Σ_{j≥1} K_j` is computed two ways: the truncated series (the object
//! the bounds are about) and a direct dense solve of `(I − K·W)·H = K` (the
//! oracle that catches truncation bugs). Series truncation is certified by
//! the geometric tail `‖Σ_{j>J} T^j‖ ≤ ‖T‖^{J+1}/(1−‖T‖)` lifted to entries
//! through the weighted pairing: the dropped mass at `(x,y)` is at most the
//! operator tail divided by `√(ω_x ω_y)`.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::{lu_factor, symmetric_weighted_product, weighted_matvec, Matrix, SolveError};
use crate::space::{KernelMatrix, MeasureSpace};

#[derive(Debug, Error)]
pub enum NeumannError {
    #[error("kernel has non-finite entries; clamp it before Neumann-series work")]
    NonFiniteKernel,
    #[error("iterated kernel K_{j} overflowed the floating-point range (divergence regime)")]
    Overflow { j: usize },
    #[error(
        "power iteration did not reach relative tolerance {tol:.1e} within {iterations} iterations (last Rayleigh quotient {last:.17e}, residual {residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        tol: f64,
        last: f64,
        residual: f64,
    },
    #[error("operator norm {norm} is not below 1; the minimal solution series diverges")]
    NormAtLeastOne { norm: f64 },
    #[error("direct solve failed despite ‖T‖ < 1 (numerical breakdown): {0}")]
    SingularSolve(#[from] SolveError),
    #[error(
        "series cross-check failed: solve and truncated series differ by {gap:.3e} against allowance {allowance:.3e}"
    )]
    CrossCheckFailed { gap: f64, allowance: f64 },
}

/// `(Tf)_i = Σ_j K(i,j)·f_j·ω_j`. Requires a finite (clamped) kernel.
pub fn apply_t(k: &KernelMatrix, omega: &MeasureSpace, f: &[f64]) -> Vec<f64> {
    assert!(k.is_finite(), "apply_t requires a finite (clamped) kernel");
    assert_eq!(k.n(), omega.n());
    weighted_matvec(k.matrix(), omega.weights(), f)
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

/// Operator norm of `T` on `L²(ω)`: the top eigenvalue of the symmetrized
/// matrix `S = diag(√ω)·K·diag(√ω)`, by power iteration from the all-ones
/// vector with Rayleigh-quotient convergence at relative tolerance 1e−12.
pub fn operator_norm(k: &KernelMatrix, omega: &MeasureSpace) -> Result<f64, NeumannError> {
    if !k.is_finite() {
        return Err(NeumannError::NonFiniteKernel);
    }
    assert_eq!(k.n(), omega.n());
    let n = k.n();
    let sqrt_w: Vec<f64> = omega.weights().iter().map(|w| w.sqrt()).collect();
    let s = Matrix::from_fn(n, |i, j| sqrt_w[i] * k.entry(i, j) * sqrt_w[j]);

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut last = 0.0_f64;
    for it in 1..=POWER_MAX_ITER {
        let y = crate::matrix::matvec(&s, &v);
        let rayleigh: f64 = y.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm_y = y.iter().map(|u| u * u).sum::<f64>().sqrt();
        if norm_y == 0.0 {
            return Ok(0.0);
        }
        if it > 1 && (rayleigh - last).abs() <= POWER_TOL * rayleigh.abs().max(f64::MIN_POSITIVE) {
            return Ok(rayleigh);
        }
        last = rayleigh;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / norm_y;
        }
    }
    let y = crate::matrix::matvec(&s, &v);
    let residual = y
        .iter()
        .zip(&v)
        .map(|(yi, vi)| (yi - last * vi).powi(2))
        .sum::<f64>()
        .sqrt();
    Err(NeumannError::NoConvergence {
        iterations: POWER_MAX_ITER,
        tol: POWER_TOL,
        last,
        residual,
    })
}

/// `K₁ = K`, `K_j = K_{j−1}·W·K`. Iterates are exactly symmetric by
/// construction (upper triangle computed once and mirrored).
pub fn iterated_kernels(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    j_max: usize,
) -> Result<Vec<Matrix>, NeumannError> {
    if !k.is_finite() {
        return Err(NeumannError::NonFiniteKernel);
    }
    assert!(j_max >= 1);
    let w = omega.weights();
    let mut iterates = Vec::with_capacity(j_max);
    iterates.push(k.matrix().clone());
    for j in 2..=j_max {
        let next = symmetric_weighted_product(iterates.last().unwrap(), w, k.matrix());
        if !next.is_finite() {
            return Err(NeumannError::Overflow { j });
        }
        iterates.push(next);
    }
    Ok(iterates)
}

#[derive(Debug, Clone, Copy)]
pub struct NeumannOptions {
    /// Relative entrywise tolerance certified for the dropped tail.
    pub tol: f64,
    /// Hard cap on the truncation order.
    pub max_j: usize,
    /// Divergence is declared once a partial-sum entry exceeds this.
    pub divergence_threshold: f64,
    /// Retain the full list `K₁…K_J` (memory-heavy for large `n·J`).
    pub keep_iterates: bool,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        NeumannOptions {
            tol: 1e-10,
            max_j: 2_000,
            divergence_threshold: 1e6,
            keep_iterates: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCrossing {
    pub j: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Truncated Neumann sum plus the direct-solve oracle.
#[derive(Debug, Clone)]
pub struct ResolventResult {
    /// `K₁…K_J` when retained, otherwise empty.
    pub iterates: Vec<Matrix>,
    /// `Σ_{j≤J} K_j`.
    pub h_series: Matrix,
    /// `(I − K·W)⁻¹·K`; present only when `‖T‖ < 1`.
    pub h_solve: Option<Matrix>,
    /// Always retained: the certificate needs `K₂` regardless of retention.
    pub k2: Matrix,
    pub norm_t: f64,
    pub j_used: usize,
    /// Operator-level geometric tail `‖T‖^{J+1}/(1−‖T‖)`; the entrywise
    /// bound at `(i,j)` is this divided by `√(ω_i ω_j)` (positive masses).
    pub tail_bound: Option<f64>,
    /// Whether the tail met `tol` on every positive-mass pair.
    pub tail_certified: bool,
    pub diverged: bool,
    pub threshold_crossing: Option<ThresholdCrossing>,
}

impl ResolventResult {
    /// Certified entrywise tail bound at `(i,j)`; `None` without a tail
    /// bound or when either point is massless.
    pub fn tail_entry(&self, omega: &MeasureSpace, i: usize, j: usize) -> Option<f64> {
        let denom = (omega.weight(i) * omega.weight(j)).sqrt();
        match self.tail_bound {
            Some(s) if denom > 0.0 => Some(s / denom),
            _ => None,
        }
    }
}

pub fn neumann_sum(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    tol: f64,
) -> Result<ResolventResult, NeumannError> {
    neumann_sum_with(k, omega, NeumannOptions {
        tol,
        ..NeumannOptions::default()
    })
}

pub fn neumann_sum_with(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    opts: NeumannOptions,
) -> Result<ResolventResult, NeumannError> {
    if !k.is_finite() {
        return Err(NeumannError::NonFiniteKernel);
    }
    assert_eq!(k.n(), omega.n());
    let n = k.n();
    let w = omega.weights();
    let norm_t = operator_norm(k, omega)?;
    let convergent = norm_t < 1.0;

    let mut h = k.matrix().clone();
    let mut current = k.matrix().clone();
    let mut iterates = if opts.keep_iterates {
        vec![k.matrix().clone()]
    } else {
        Vec::new()
    };
    let mut k2: Option<Matrix> = None;
    let mut j_used = 1;
    let mut tail_bound = None;
    let mut tail_certified = false;
    let mut threshold_crossing = None;

    // Least √(ω_i ω_j)·H(i,j) over positive-mass pairs: the binding pair for
    // the relative tail criterion.
    let min_weighted_entry = |h: &Matrix| -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..n {
            for j in i..n {
                let ww = (w[i] * w[j]).sqrt();
                if ww > 0.0 {
                    m = m.min(ww * h.get(i, j));
                }
            }
        }
        m
    };

    for j in 2..=opts.max_j.max(2) {
        let next = symmetric_weighted_product(&current, w, k.matrix());
        if !next.is_finite() {
            // Entry beyond f64 range: divergence regime in full bloom.
            let (row, col) = first_entry_at_least(&next, f64::INFINITY).unwrap_or((0, 0));
            threshold_crossing = Some(ThresholdCrossing {
                j,
                row,
                col,
                value: f64::INFINITY,
            });
            j_used = j;
            if k2.is_none() {
                k2 = Some(next.clone());
            }
            if opts.keep_iterates {
                iterates.push(next);
            }
            break;
        }
        h.add_assign(&next);
        if k2.is_none() {
            k2 = Some(next.clone());
        }
        current = next;
        if opts.keep_iterates {
            iterates.push(current.clone());
        }
        j_used = j;

        if convergent {
            let scalar = norm_t.powi(j as i32 + 1) / (1.0 - norm_t);
            tail_bound = Some(scalar);
            if scalar <= opts.tol * min_weighted_entry(&h) {
                tail_certified = true;
                break;
            }
        } else {
            if threshold_crossing.is_none() {
                if let Some((row, col)) = first_entry_at_least(&h, opts.divergence_threshold) {
                    threshold_crossing = Some(ThresholdCrossing {
                        j,
                        row,
                        col,
                        value: h.get(row, col),
                    });
                }
            }
            if threshold_crossing.is_some() {
                break;
            }
        }
    }

    let h_solve = if convergent {
        let a = Matrix::from_fn(n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - k.entry(i, j) * w[j]
        });
        let factors = lu_factor(&a)?;
        Some(factors.solve_matrix(k.matrix()))
    } else {
        None
    };

    Ok(ResolventResult {
        iterates,
        h_series: h,
        h_solve,
        k2: k2.expect("at least one product step runs"),
        norm_t,
        j_used,
        tail_bound,
        tail_certified,
        diverged: !convergent,
        threshold_crossing,
    })
}

fn first_entry_at_least(m: &Matrix, threshold: f64) -> Option<(usize, usize)> {
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j) >= threshold {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMethod {
    Series,
    Solve,
}

/// Minimal positive solution of `u = Tu + g`.
#[derive(Debug, Clone)]
pub struct MinimalSolution {
    pub u0: Vec<f64>,
    pub g: Vec<f64>,
    pub method: SolutionMethod,
}

const SERIES_CHECK_RTOL: f64 = 1e-10;
const SERIES_CHECK_MAX_TERMS: usize = 50_000;

/// Solve `(I − K·W)·u = g` directly and cross-check against the truncated
/// Neumann series `g + Σ T^j g` within the series' own certified tail.
pub fn minimal_solution(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    g: &[f64],
) -> Result<MinimalSolution, NeumannError> {
    if !k.is_finite() {
        return Err(NeumannError::NonFiniteKernel);
    }
    assert_eq!(k.n(), omega.n());
    assert_eq!(k.n(), g.len());
    assert!(
        g.iter().all(|&v| v > 0.0 && v.is_finite()),
        "inhomogeneity must be strictly positive and finite"
    );
    let n = k.n();
    let w = omega.weights();
    let norm_t = operator_norm(k, omega)?;
    if norm_t >= 1.0 {
        return Err(NeumannError::NormAtLeastOne { norm: norm_t });
    }

    let a = Matrix::from_fn(n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - k.entry(i, j) * w[j]
    });
    let u = lu_factor(&a)?.solve_vec(g);

    // Series route with the pointwise lift ‖v‖_∞ ≤ ‖v‖_{L²(ω)}/√ω_min.
    let g_l2: f64 = g
        .iter()
        .zip(w)
        .map(|(&gi, &wi)| gi * gi * wi)
        .sum::<f64>()
        .sqrt();
    let min_pos_w = w
        .iter()
        .copied()
        .filter(|&wi| wi > 0.0)
        .fold(f64::INFINITY, f64::min);
    let u_floor = u.iter().copied().fold(f64::INFINITY, f64::min).max(1e-300);

    let mut series = g.to_vec();
    let mut term = g.to_vec();
    let mut allowance = f64::INFINITY;
    for j in 1..=SERIES_CHECK_MAX_TERMS {
        term = apply_t(k, omega, &term);
        for (s, t) in series.iter_mut().zip(&term) {
            *s += *t;
        }
        allowance = norm_t.powi(j as i32 + 1) / (1.0 - norm_t) * g_l2 / min_pos_w.sqrt();
        if allowance <= SERIES_CHECK_RTOL * u_floor {
            break;
        }
    }
    let gap = u
        .iter()
        .zip(&series)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let budget = allowance + 1e-9 * u.iter().copied().fold(0.0_f64, f64::max);
    if gap > budget {
        return Err(NeumannError::CrossCheckFailed {
            gap,
            allowance: budget,
        });
    }

    Ok(MinimalSolution {
        u0: u,
        g: g.to_vec(),
        method: SolutionMethod::Solve,
    })
}

/// `T1` computed through the geometric identity
/// `∫₀^∞ ω(B(x,t))/t² dt`: exact for a discrete measure, where the integral
/// collapses to a finite sum over consecutive distance thresholds. Agrees
/// with `apply_t(k, ω, 1)` by telescoping.
pub fn geometric_t1(k: &KernelMatrix, omega: &MeasureSpace) -> Vec<f64> {
    assert!(k.is_finite(), "geometric_t1 requires a finite (clamped) kernel");
    assert_eq!(k.n(), omega.n());
    let n = k.n();
    let mut out = Vec::with_capacity(n);
    for x in 0..n {
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|y| (k.distance(x, y), omega.weight(y)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // Collapse equal thresholds, accumulate ball masses.
        let mut thresholds: Vec<(f64, f64)> = Vec::new();
        for (d, wy) in pairs {
            match thresholds.last_mut() {
                Some((t, mass)) if *t == d => *mass += wy,
                _ => thresholds.push((d, wy)),
            }
        }
        let mut integral = 0.0;
        let mut ball_mass = 0.0;
        for (idx, &(t, mass)) in thresholds.iter().enumerate() {
            ball_mass += mass;
            let next_inv = thresholds.get(idx + 1).map_or(0.0, |&(tn, _)| 1.0 / tn);
            integral += ball_mass * (1.0 / t - next_inv);
        }
        out.push(integral);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::space::KernelMatrix;

    fn single_point(k: f64, w: f64) -> (KernelMatrix, MeasureSpace) {
        (
            KernelMatrix::from_fn_symmetric(1, |_, _| k).unwrap(),
            MeasureSpace::new(vec![w]).unwrap(),
        )
    }

    fn ones_kernel(n: usize, w: f64) -> (KernelMatrix, MeasureSpace) {
        (
            KernelMatrix::from_fn_symmetric(n, |_, _| 1.0).unwrap(),
            MeasureSpace::new(vec![w; n]).unwrap(),
        )
    }

    fn random_kernel(n: usize, seed: u64) -> (KernelMatrix, MeasureSpace) {
        let mut rng = SplitMix64::new(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.next_f64(), rng.next_f64())).collect();
        let k = KernelMatrix::from_fn_symmetric(n, |i, j| {
            if i == j {
                f64::INFINITY
            } else {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                1.0 / (dx * dx + dy * dy)
            }
        })
        .unwrap()
        .clamped_default()
        .unwrap();
        let weights: Vec<f64> = (0..n).map(|_| rng.next_range(0.5, 1.5) / n as f64).collect();
        (k, MeasureSpace::new(weights).unwrap())
    }

    #[test]
    fn apply_t_single_point() {
        let (k, w) = single_point(1.0, 0.5);
        assert_eq!(apply_t(&k, &w, &[1.0]), vec![0.5]);
    }

    #[test]
    fn apply_t_two_point_ones() {
        let (k, w) = ones_kernel(2, 0.3);
        assert_eq!(apply_t(&k, &w, &[1.0, 1.0]), vec![0.6, 0.6]);
    }

    #[test]
    fn operator_norm_closed_forms() {
        let (k, w) = single_point(2.0, 0.25);
        assert!((operator_norm(&k, &w).unwrap() - 0.5).abs() < 1e-12);

        let (k2, w2) = ones_kernel(2, 0.3);
        assert!((operator_norm(&k2, &w2).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn iterated_kernels_scalar_geometric() {
        let (k, w) = single_point(1.0, 0.5);
        let iters = iterated_kernels(&k, &w, 5).unwrap();
        for (idx, m) in iters.iter().enumerate() {
            let expect = 0.5_f64.powi(idx as i32);
            assert!((m.get(0, 0) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn iterated_kernels_two_point_and_symmetry() {
        let (k, w) = ones_kernel(2, 0.3);
        let iters = iterated_kernels(&k, &w, 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((iters[1].get(i, j) - 0.6).abs() < 1e-15);
            }
        }

        let (kr, wr) = random_kernel(30, 0xBEEF);
        for m in iterated_kernels(&kr, &wr, 8).unwrap() {
            assert_eq!(m.max_rel_asymmetry(), 0.0);
        }
    }

    #[test]
    fn iterated_kernels_overflow_signals_divergence_regime() {
        let (k, w) = single_point(1e308, 10.0);
        match iterated_kernels(&k, &w, 3) {
            Err(NeumannError::Overflow { j: 2 }) => {}
            other => panic!("expected overflow at j = 2, got {other:?}"),
        }
    }

    #[test]
    fn neumann_sum_single_point_closed_form() {
        let (k, w) = single_point(1.0, 0.5);
        let r = neumann_sum(&k, &w, 1e-10).unwrap();
        assert!(!r.diverged);
        assert!(r.tail_certified);
        let h_solve = r.h_solve.as_ref().unwrap();
        assert!((h_solve.get(0, 0) - 2.0).abs() <= 2.0 * 1e-14);
        let tail = r.tail_entry(&w, 0, 0).unwrap();
        assert!((h_solve.get(0, 0) - r.h_series.get(0, 0)) <= tail * 1.0000001);
    }

    #[test]
    fn neumann_sum_two_point_closed_form() {
        let (k, w) = ones_kernel(2, 0.2);
        let r = neumann_sum(&k, &w, 1e-10).unwrap();
        let h = r.h_solve.as_ref().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.get(i, j) - 5.0 / 3.0).abs() <= 5.0 / 3.0 * 1e-14);
            }
        }
    }

    #[test]
    fn neumann_sum_flags_divergence() {
        let (k, w) = single_point(1.0, 1.5);
        let r = neumann_sum_with(&k, &w, NeumannOptions {
            max_j: 200,
            ..NeumannOptions::default()
        })
        .unwrap();
        assert!(r.diverged);
        assert!(r.h_solve.is_none());
        let crossing = r.threshold_crossing.expect("partial sums must cross 1e6");
        assert!(crossing.j <= 40);
        assert!(crossing.value > 1e6);
    }

    #[test]
    fn minimal_solution_single_point() {
        let (k, w) = single_point(1.0, 0.5);
        let sol = minimal_solution(&k, &w, &[1.0]).unwrap();
        assert!((sol.u0[0] - 2.0).abs() < 1e-12);
        assert_eq!(sol.method, SolutionMethod::Solve);
        assert!(sol.u0[0] >= sol.g[0]);
    }

    #[test]
    fn minimal_solution_rejects_supercritical() {
        let (k, w) = single_point(1.0, 1.5);
        assert!(matches!(
            minimal_solution(&k, &w, &[1.0]),
            Err(NeumannError::NormAtLeastOne { .. })
        ));
    }

    #[test]
    fn geometric_t1_matches_apply_t() {
        let (k, w) = random_kernel(25, 0xCAFE);
        let direct = apply_t(&k, &w, &vec![1.0; 25]);
        let geometric = geometric_t1(&k, &w);
        for (a, b) in direct.iter().zip(&geometric) {
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn geometric_t1_two_point_formula() {
        let k = KernelMatrix::from_fn_symmetric(2, |i, j| if i == j { 4.0 } else { 0.5 }).unwrap();
        let w = MeasureSpace::new(vec![0.3, 0.7]).unwrap();
        let t1 = geometric_t1(&k, &w);
        // T1(x1) = ω1/d(x1,x1) + ω2/d(x1,x2)
        assert!((t1[0] - (0.3 * 4.0 + 0.7 * 0.5)).abs() < 1e-14);
        assert!((t1[1] - (0.3 * 0.5 + 0.7 * 4.0)).abs() < 1e-14);
    }
}
