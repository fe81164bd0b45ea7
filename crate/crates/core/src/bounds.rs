//! Explicit constants for the bilateral resolvent bounds
//! `K·e^{c·K₂/K} ≤ H ≤ K·e^{C·K₂/K}`, certification of both inequalities in
//! log space, the matching `u₀` bounds, and the boundedness equivalences.
//!
//! The lower constant is `c = 1/(4κ²)`. The upper constant is assembled from
//! the proof chain: snowflake exponent `β`, a free parameter `α ∈ (1, 1/‖T‖)`
//! fixed at the log-scale midpoint `α = ‖T‖^{-1/2}`, and `τ > 1` chosen so
//! that `τ^β = √α`, giving `ρ = τ^β/α = ‖T‖^{1/4} < 1`. The ledger keeps all
//! intermediates so alternates can be swept. `C_final` is astronomically
//! large for κ ≥ 1; certification therefore works entirely in log space.

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::neumann::{
    apply_t, minimal_solution, neumann_sum, MinimalSolution, NeumannError,
};
use crate::space::{modify, quasimetric_constant, KernelMatrix, MeasureSpace, Modifier, SpaceError};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("operator norm {norm_t} outside (0,1); no upper constant exists")]
    InvalidNorm { norm_t: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Neumann(#[from] NeumannError),
}

/// Every constant of the upper-bound proof chain, kept for audit.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantLedger {
    pub kappa: f64,
    #[serde(rename = "norm_T")]
    pub norm_t: f64,
    /// Lower constant `1/(4κ²)`.
    pub c: f64,
    pub alpha: f64,
    pub tau: f64,
    pub beta: f64,
    /// `τ^β/α`, strictly below 1 by the selection rule.
    pub rho: f64,
    #[serde(rename = "C_tau_kappa")]
    pub c_tau_kappa: f64,
    #[serde(rename = "A")]
    pub a_const: f64,
    #[serde(rename = "B")]
    pub b_const: f64,
    #[serde(rename = "C_final")]
    pub c_final: f64,
}

/// `c = 1/(4κ²)`.
pub fn lower_constant(kappa: f64) -> f64 {
    assert!(kappa >= 0.5, "quasi-metric constants are at least 1/2");
    1.0 / (4.0 * kappa * kappa)
}

/// Snowflake exponent used throughout: `2·log₂(2κ)` floored at the metric
/// value 2, since the raw formula degenerates as κ → 1/2 while every stated
/// inequality stays valid with β = 2 there.
pub(crate) fn snowflake_exponent(kappa: f64) -> f64 {
    2.0 * (2.0 * kappa.max(1.0)).log2()
}

/// Assemble the upper constant `C_final = 2·max(A, B)` with
/// `A = (2κ)²/(1−ρ)` and `B = C(τ,κ)/(1−ρ)`,
/// `C(τ,κ) = (2κ)⁶(1−τ⁻¹)^{−2β}`.
pub fn upper_constant(kappa: f64, norm_t: f64) -> Result<ConstantLedger, BoundsError> {
    if !(norm_t > 0.0 && norm_t < 1.0) || !norm_t.is_finite() {
        return Err(BoundsError::InvalidNorm { norm_t });
    }
    assert!(kappa >= 0.5, "quasi-metric constants are at least 1/2");
    let beta = snowflake_exponent(kappa);
    let alpha = (1.0 / norm_t).sqrt();
    let tau = alpha.powf(1.0 / (2.0 * beta));
    let rho = tau.powf(beta) / alpha;
    let two_kappa = 2.0 * kappa;
    let c_tau_kappa = two_kappa.powi(6) * (1.0 - 1.0 / tau).powf(-2.0 * beta);
    let a_const = two_kappa.powi(2) / (1.0 - rho);
    let b_const = c_tau_kappa / (1.0 - rho);
    Ok(ConstantLedger {
        kappa,
        norm_t,
        c: lower_constant(kappa),
        alpha,
        tau,
        beta,
        rho,
        c_tau_kappa,
        a_const,
        b_const,
        c_final: 2.0 * a_const.max(b_const),
    })
}

/// Margins and verdicts for one certification run. Margins live in log
/// space: `lower = log H − log K − c·V` and `upper = C·V + log K − log H`
/// with `V = K₂/K`, per pair (or per point for the `u₀` form, cols = 1).
#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub lower_margins: Vec<f64>,
    #[serde(skip)]
    pub upper_margins: Vec<f64>,
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    /// `min (log H − log K)/V` over entries with `V > tol_abs`.
    #[serde(rename = "c_empirical")]
    pub c_empirical_min: Option<f64>,
    /// `max (log H − log K)/V` over the same entries.
    #[serde(rename = "C_empirical")]
    pub c_empirical_max: Option<f64>,
    pub lower_pass: bool,
    pub upper_pass: bool,
    /// Entries excluded from empirical-constant extraction (`V ≤ tol_abs`);
    /// they still count toward the verdicts.
    pub excluded_small_ratio: usize,
    /// Diagonal or clamped entries, reported but never failed on their own.
    pub flagged_entries: usize,
    pub tol_abs: f64,
}

impl BoundCertificate {
    pub fn margin_at(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.lower_margins[i * self.cols + j],
            self.upper_margins[i * self.cols + j],
        )
    }
}

fn build_certificate(
    rows: usize,
    cols: usize,
    log_ratio: impl Fn(usize, usize) -> f64,
    v: impl Fn(usize, usize) -> f64,
    flagged: impl Fn(usize, usize) -> bool,
    c: f64,
    c_final: f64,
    tol_abs: f64,
) -> BoundCertificate {
    let mut lower = Vec::with_capacity(rows * cols);
    let mut upper = Vec::with_capacity(rows * cols);
    let mut c_min: Option<f64> = None;
    let mut c_max: Option<f64> = None;
    let mut excluded = 0usize;
    let mut flags = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            let r = log_ratio(i, j);
            let vij = v(i, j);
            lower.push(r - c * vij);
            upper.push(c_final * vij - r);
            if flagged(i, j) {
                flags += 1;
            }
            if vij > tol_abs {
                let ratio = r / vij;
                c_min = Some(c_min.map_or(ratio, |m| m.min(ratio)));
                c_max = Some(c_max.map_or(ratio, |m| m.max(ratio)));
            } else {
                excluded += 1;
            }
        }
    }
    let min_lower = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let min_upper = upper.iter().copied().fold(f64::INFINITY, f64::min);
    BoundCertificate {
        rows,
        cols,
        lower_margins: lower,
        upper_margins: upper,
        min_lower_margin: min_lower,
        min_upper_margin: min_upper,
        c_empirical_min: c_min,
        c_empirical_max: c_max,
        lower_pass: min_lower >= -tol_abs,
        upper_pass: min_upper >= -tol_abs,
        excluded_small_ratio: excluded,
        flagged_entries: flags,
        tol_abs,
    }
}

/// Certify `K·e^{c·V} ≤ H ≤ K·e^{C_final·V}` entrywise, `V = K₂/K`.
pub fn certify(
    h: &Matrix,
    k: &KernelMatrix,
    k2: &Matrix,
    ledger: &ConstantLedger,
    tol_abs: f64,
) -> BoundCertificate {
    let n = k.n();
    assert_eq!(n, h.n());
    assert_eq!(n, k2.n());
    build_certificate(
        n,
        n,
        |i, j| (h.get(i, j) / k.entry(i, j)).ln(),
        |i, j| k2.get(i, j) / k.entry(i, j),
        |i, j| i == j || k.cap().map_or(false, |cap| k.entry(i, j) == cap),
        ledger.c,
        ledger.c_final,
        tol_abs,
    )
}

/// Certify `m·e^{c·(Tm)/m} ≤ u₀ ≤ m·e^{C·(Tm)/m}` per point. With `m` unit
/// this is exactly the `u₀ = Tu₀ + 1` statement with `(Tm)/m = T1`.
pub fn certify_u0(
    u0: &MinimalSolution,
    t_g_over_g: &[f64],
    m: Option<&Modifier>,
    ledger: &ConstantLedger,
    tol_abs: f64,
) -> BoundCertificate {
    let n = u0.u0.len();
    assert_eq!(n, t_g_over_g.len());
    if let Some(md) = m {
        assert_eq!(n, md.values().len());
    }
    build_certificate(
        n,
        1,
        |i, _| {
            let mi = m.map_or(1.0, |md| md.value(i));
            (u0.u0[i] / mi).ln()
        },
        |i, _| t_g_over_g[i],
        |_, _| false,
        ledger.c,
        ledger.c_final,
        tol_abs,
    )
}

/// Finite-scale view of the boundedness equivalences
/// (a) `H ≤ C₁K`, (b) `‖T‖ < 1` and `K₂ ≤ C₂K`, (c) `sup u₀/m < ∞`.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    #[serde(rename = "norm_T")]
    pub norm_t: f64,
    pub diverged: bool,
    /// `max H/K`; absent when the series diverges (`H = +∞`).
    pub c1_sup_h_over_k: Option<f64>,
    pub c2_sup_k2_over_k: f64,
    pub sup_tm_over_m: f64,
    /// `max u₀/m`; absent when `‖T‖ ≥ 1` (minimal solution infinite).
    pub sup_u0_over_m: Option<f64>,
    pub kappa_modified: f64,
    /// `‖T‖ ≤ 1 − 1/sup(u₀/m)`, the Schur direction of (c) ⇒ (b).
    pub schur_bound_holds: Option<bool>,
    /// `log C₁ ≤ C_final·C₂`, the (b) ⇒ (a) direction with the explicit constant.
    pub upper_bound_holds: Option<bool>,
    /// `sup (Tm)/m ≤ 3κ·C₂`, the bounded-diameter branch of (b).
    pub t1_bound_holds: bool,
}

const EQUIV_TOL: f64 = 1e-9;

/// Compute the equivalence diagnostics for `K` (modified by `m` when given:
/// every reported ratio is invariant under modification, while the κ in the
/// consistency checks is the modified kernel's).
pub fn equivalence_report(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    m: Option<&Modifier>,
) -> Result<EquivalenceReport, BoundsError> {
    let n = k.n();
    let kappa_modified = match m {
        Some(md) => {
            let (kt, _) = modify(k, omega, md);
            quasimetric_constant(&kt)?.0
        }
        None => quasimetric_constant(k)?.0,
    };

    let r = neumann_sum(k, omega, 1e-10)?;
    let mvals: Vec<f64> = (0..n).map(|i| m.map_or(1.0, |md| md.value(i))).collect();

    let c2 = {
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(r.k2.get(i, j) / k.entry(i, j));
            }
        }
        worst
    };
    let c1 = if r.diverged {
        None
    } else {
        let h = r.h_solve.as_ref().unwrap_or(&r.h_series);
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(h.get(i, j) / k.entry(i, j));
            }
        }
        Some(worst)
    };

    let tm = apply_t(k, omega, &mvals);
    let sup_tm = tm
        .iter()
        .zip(&mvals)
        .map(|(t, m)| t / m)
        .fold(0.0_f64, f64::max);

    let sup_u0 = if r.norm_t < 1.0 {
        let sol = minimal_solution(k, omega, &mvals)?;
        Some(
            sol.u0
                .iter()
                .zip(&mvals)
                .map(|(u, m)| u / m)
                .fold(0.0_f64, f64::max),
        )
    } else {
        None
    };

    let schur_bound_holds = sup_u0.map(|c| r.norm_t <= 1.0 - 1.0 / c + EQUIV_TOL);
    let upper_bound_holds = match (c1, r.norm_t < 1.0) {
        (Some(c1v), true) => {
            let ledger = upper_constant(kappa_modified, r.norm_t)?;
            Some(c1v.ln() <= ledger.c_final * c2 + EQUIV_TOL)
        }
        _ => None,
    };
    let t1_bound_holds = sup_tm <= 3.0 * kappa_modified * c2 * (1.0 + EQUIV_TOL);

    Ok(EquivalenceReport {
        norm_t: r.norm_t,
        diverged: r.diverged,
        c1_sup_h_over_k: c1,
        c2_sup_k2_over_k: c2,
        sup_tm_over_m: sup_tm,
        sup_u0_over_m: sup_u0,
        kappa_modified,
        schur_bound_holds,
        upper_bound_holds,
        t1_bound_holds,
    })
}
