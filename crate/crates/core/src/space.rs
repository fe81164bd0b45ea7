//! Finite measure spaces, quasi-metric kernels, and their diagnostics:
//! quasi-metric and Ptolemy constants with witnesses, snowflake metrics,
//! modifier discovery, kernel modification, and the far-point extension.
//!
//! A kernel `K` is stored as a symmetric matrix of extended reals in
//! `(0, +∞]`; the associated quasi-metric is `d = 1/K` entrywise (with
//! `1/∞ = 0`). All scans are exhaustive — at desk scale (n ≤ 300) exactness
//! is affordable and the constants feed certified bounds downstream.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use serde::Serialize;
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("invalid measure space: {0}")]
    InvalidSpace(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid modifier: value at point {index} is {value}")]
    InvalidModifier { index: usize, value: f64 },
    #[error(
        "kernel is not quasi-metric: d({i},{j}) > 0 while d({i},{k}) + d({k},{j}) = 0; no finite constant exists"
    )]
    NotQuasiMetric { i: usize, j: usize, k: usize },
    #[error(
        "kernel has no finite Ptolemy constant: diagonal product positive on quadruple {quad:?} with vanishing side products"
    )]
    NotPtolemy { quad: [usize; 4] },
    #[error("distance is identically zero; quasi-metric constant undefined")]
    DegenerateDistance,
    #[error("kernel value K({x},{w}) at the reference point is infinite")]
    InfiniteAtReference { x: usize, w: usize },
    #[error("space is unbounded: d({i},{j}) is infinite")]
    Unbounded { i: usize, j: usize },
    #[error("kernel has no finite entry; cannot derive a clamp value")]
    NoFiniteEntry,
}

/// A finite point set carrying a strictly positive measure. Coordinates are
/// optional bookkeeping for model builders; the algebra never needs them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    weights: Vec<f64>,
    coords: Option<Vec<Vec<f64>>>,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self, SpaceError> {
        if weights.is_empty() {
            return Err(SpaceError::InvalidSpace("no points".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(SpaceError::InvalidSpace(format!(
                    "weight {i} is {w}; weights must be strictly positive and finite"
                )));
            }
        }
        Ok(MeasureSpace {
            weights,
            coords: None,
        })
    }

    pub fn with_coords(weights: Vec<f64>, coords: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        let mut s = MeasureSpace::new(weights)?;
        if coords.len() != s.weights.len() {
            return Err(SpaceError::InvalidSpace(
                "coordinate list length differs from weight list".into(),
            ));
        }
        s.coords = Some(coords);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Measure scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> MeasureSpace {
        MeasureSpace {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            coords: self.coords.clone(),
        }
    }
}

/// Symmetric kernel matrix with entries in `(0, +∞]` and an optional clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    mat: Matrix,
    cap: Option<f64>,
}

/// Factor applied to the largest finite entry when deriving the default clamp.
pub const DEFAULT_CAP_FACTOR: f64 = 1e12;

impl KernelMatrix {
    /// Validates symmetry (exact), positivity, and absence of NaN.
    pub fn new(mat: Matrix) -> Result<Self, SpaceError> {
        if mat.n() == 0 {
            return Err(SpaceError::InvalidKernel("empty matrix".into()));
        }
        for i in 0..mat.n() {
            for j in 0..mat.n() {
                let v = mat.get(i, j);
                if v.is_nan() || v <= 0.0 {
                    return Err(SpaceError::InvalidKernel(format!(
                        "entry ({i},{j}) is {v}; entries must lie in (0, +inf]"
                    )));
                }
                if j > i && mat.get(j, i) != v {
                    return Err(SpaceError::InvalidKernel(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(KernelMatrix { mat, cap: None })
    }

    /// Build from the upper triangle in row-major order
    /// `(0,0), (0,1), …, (0,n−1), (1,1), …`; mirrors exactly.
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self, SpaceError> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(SpaceError::InvalidKernel(format!(
                "expected {} upper-triangle entries, got {}",
                n * (n + 1) / 2,
                upper.len()
            )));
        }
        let mut mat = Matrix::zeros(n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                mat.set(i, j, upper[idx]);
                mat.set(j, i, upper[idx]);
                idx += 1;
            }
        }
        KernelMatrix::new(mat)
    }

    /// Evaluate `f` on pairs `i ≤ j` and mirror.
    pub fn from_fn_symmetric(
        n: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, SpaceError> {
        let mut mat = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                mat.set(i, j, v);
                mat.set(j, i, v);
            }
        }
        KernelMatrix::new(mat)
    }

    pub fn n(&self) -> usize {
        self.mat.n()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    /// `d(i,j) = 1/K(i,j)`, with `1/∞ = 0`.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        1.0 / self.mat.get(i, j)
    }

    pub fn distance_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n(), |i, j| self.distance(i, j))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn is_finite(&self) -> bool {
        self.mat.is_finite()
    }

    pub fn max_finite_entry(&self) -> Option<f64> {
        self.mat.max_finite()
    }

    /// The default clamp: `DEFAULT_CAP_FACTOR` times the largest finite entry.
    pub fn default_cap(&self) -> Result<f64, SpaceError> {
        self.max_finite_entry()
            .map(|m| m * DEFAULT_CAP_FACTOR)
            .ok_or(SpaceError::NoFiniteEntry)
    }

    /// `min(K, cap)` entrywise. Clamping keeps the quasi-metric structure
    /// (it replaces `d` by `max(d, 1/cap)`) and tames infinite entries
    /// before Neumann-series work.
    pub fn clamped(&self, cap: f64) -> Result<KernelMatrix, SpaceError> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(SpaceError::InvalidKernel(format!(
                "clamp value {cap} must be positive and finite"
            )));
        }
        let n = self.n();
        let mut mat = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                mat.set(i, j, self.mat.get(i, j).min(cap));
            }
        }
        Ok(KernelMatrix {
            mat,
            cap: Some(cap),
        })
    }

    pub fn clamped_default(&self) -> Result<KernelMatrix, SpaceError> {
        self.clamped(self.default_cap()?)
    }
}

/// Positive weight function used to turn a modifiable kernel into a
/// quasi-metric one via `K̃ = K/(m⊗m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modifier {
    values: Vec<f64>,
    source: ModifierSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModifierSource {
    UserSupplied,
    ReferencePoint { w: usize },
    BoundaryDistance { alpha: f64 },
    GreenMin { x0: usize },
}

impl Modifier {
    pub fn new(values: Vec<f64>, source: ModifierSource) -> Result<Self, SpaceError> {
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpaceError::InvalidModifier { index: i, value: v });
            }
        }
        Ok(Modifier { values, source })
    }

    pub fn unit(n: usize) -> Modifier {
        Modifier {
            values: vec![1.0; n],
            source: ModifierSource::UserSupplied,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn source(&self) -> &ModifierSource {
        &self.source
    }

    /// Pointwise reciprocal; inverts `modify` up to floating-point round trip.
    pub fn reciprocal(&self) -> Modifier {
        Modifier {
            values: self.values.iter().map(|v| 1.0 / v).collect(),
            source: ModifierSource::UserSupplied,
        }
    }
}

/// Diagnostics bundle for one kernel.
#[derive(Debug, Clone, Serialize)]
pub struct QuasiMetricReport {
    pub kappa: f64,
    pub kappa_witness: [usize; 3],
    pub ptolemy: f64,
    pub ptolemy_witness: [usize; 4],
    pub beta: f64,
    pub snowflake_comparability: f64,
}

struct ScanBest<const W: usize> {
    ratio: f64,
    witness: [usize; W],
}

/// Largest `d(i,j) / (d(i,k) + d(k,j))` over ordered triples, skipping 0/0.
/// This is exactly the least admissible quasi-metric constant.
fn max_triple_ratio(d: &Matrix) -> Result<(f64, [usize; 3]), SpaceError> {
    let n = d.n();
    let scan_row = |i: usize| -> Result<Option<ScanBest<3>>, SpaceError> {
        let mut best: Option<ScanBest<3>> = None;
        for j in 0..n {
            let num = d.get(i, j);
            for k in 0..n {
                let den = d.get(i, k) + d.get(k, j);
                if den == 0.0 {
                    if num > 0.0 {
                        return Err(SpaceError::NotQuasiMetric { i, j, k });
                    }
                    continue;
                }
                let ratio = num / den;
                if best.as_ref().map_or(true, |b| ratio > b.ratio) {
                    best = Some(ScanBest {
                        ratio,
                        witness: [i, j, k],
                    });
                }
            }
        }
        Ok(best)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = (0..n).into_par_iter().map(scan_row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..n).map(scan_row).collect();

    // Sequential reduction in row order keeps ties lexicographic and the
    // result independent of the thread count.
    let mut best: Option<ScanBest<3>> = None;
    for row in rows {
        let row = row?;
        if let Some(b) = row {
            if best.as_ref().map_or(true, |cur| b.ratio > cur.ratio) {
                best = Some(b);
            }
        }
    }
    best.map(|b| (b.ratio, b.witness))
        .ok_or(SpaceError::DegenerateDistance)
}

/// Quasi-metric constant `κ` of `d = 1/K` and a triple attaining it.
///
/// Scans all ordered triples `(i,j,k)`, including degenerate ones — the
/// quasi-triangle inequality quantifies over all of them, and triples with
/// `k ∈ {i,j}` are what force `κ ≥ 1` when `d` vanishes on the diagonal.
/// Ties break to the lexicographically smallest triple.
pub fn quasimetric_constant(k: &KernelMatrix) -> Result<(f64, [usize; 3]), SpaceError> {
    max_triple_ratio(&k.distance_matrix())
}

/// Best constant in the four-point Ptolemy inequality
/// `st ≤ cp·max(ac, bd)`, over all ordered quadruples. Always `≤ 4κ²`.
pub fn ptolemy_constant(k: &KernelMatrix) -> Result<(f64, [usize; 4]), SpaceError> {
    let d = k.distance_matrix();
    let n = d.n();
    let scan_y1 = |y1: usize| -> Result<Option<ScanBest<4>>, SpaceError> {
        let mut best: Option<ScanBest<4>> = None;
        for y2 in 0..n {
            let a = d.get(y1, y2);
            for y3 in 0..n {
                let b = d.get(y2, y3);
                let t = d.get(y1, y3);
                for y4 in 0..n {
                    let c = d.get(y3, y4);
                    let dd = d.get(y4, y1);
                    let s = d.get(y2, y4);
                    let num = s * t;
                    let den = (a * c).max(b * dd);
                    if den == 0.0 {
                        if num > 0.0 {
                            return Err(SpaceError::NotPtolemy {
                                quad: [y1, y2, y3, y4],
                            });
                        }
                        continue;
                    }
                    let ratio = num / den;
                    if best.as_ref().map_or(true, |cur| ratio > cur.ratio) {
                        best = Some(ScanBest {
                            ratio,
                            witness: [y1, y2, y3, y4],
                        });
                    }
                }
            }
        }
        Ok(best)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = (0..n).into_par_iter().map(scan_y1).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..n).map(scan_y1).collect();

    let mut best: Option<ScanBest<4>> = None;
    for row in rows {
        if let Some(b) = row? {
            if best.as_ref().map_or(true, |cur| b.ratio > cur.ratio) {
                best = Some(b);
            }
        }
    }
    best.map(|b| (b.ratio, b.witness))
        .ok_or(SpaceError::DegenerateDistance)
}

/// Result of the snowflake construction.
#[derive(Debug, Clone)]
pub struct Snowflake {
    /// The constant-1 quasi-metric `D`.
    pub metric: Matrix,
    /// Exponent with `D^β` comparable to `d`.
    pub beta: f64,
    /// Measured `max d/D^β`; at most `(2κ)²`.
    pub comparability: f64,
    /// Re-scanned quasi-triangle constant of `D` (≤ 1 up to rounding).
    pub scanned_constant: f64,
}

/// Snowflake `d = 1/K` into a quasi-metric `D` with constant 1 such that
/// `D^β ≤ d ≤ (2κ)²·D^β`.
///
/// Construction: `ρ = d^{1/β}` entrywise, then `D(i,j)` is the infimum of
/// `Σ ρ` over chains from `i` to `j` — on a finite space an all-pairs
/// shortest path over the complete graph, computed exactly by Floyd–Warshall
/// relaxation. `D(x,x) > 0` is permitted (chains have at least one edge).
///
/// The exponent is `β = 2·log₂(2·max(κ,1))`: for `κ ≥ 1` this is the usual
/// `2·log₂(2κ)`; for `κ < 1` that formula degenerates (`β → 0` as `κ → 1/2`)
/// while `β = 2` keeps every stated inequality valid with the true `κ`.
pub fn snowflake(k: &KernelMatrix) -> Result<Snowflake, SpaceError> {
    let (kappa, _) = quasimetric_constant(k)?;
    let beta = 2.0 * (2.0 * kappa.max(1.0)).log2();
    let n = k.n();
    let d = k.distance_matrix();

    let mut snow = Matrix::from_fn(n, |i, j| d.get(i, j).powf(1.0 / beta));
    for mid in 0..n {
        for i in 0..n {
            let dim = snow.get(i, mid);
            for j in 0..n {
                let cand = dim + snow.get(mid, j);
                if cand < snow.get(i, j) {
                    snow.set(i, j, cand);
                }
            }
        }
    }

    let mut comparability = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let dv = d.get(i, j);
            let sb = snow.get(i, j).powf(beta);
            if dv == 0.0 && sb == 0.0 {
                continue;
            }
            comparability = comparability.max(dv / sb);
        }
    }

    let (scanned_constant, _) = max_triple_ratio(&snow)?;
    Ok(Snowflake {
        metric: snow,
        beta,
        comparability,
        scanned_constant,
    })
}

/// Modifier candidate `m(x) = K(x,w)` from the Ptolemy characterization.
///
/// Points with `K(x,w) = ∞` are refused rather than deleted: dropping them
/// is only harmless when they carry no mass, which the caller must establish.
pub fn find_modifier(k: &KernelMatrix, w: usize) -> Result<Modifier, SpaceError> {
    let n = k.n();
    assert!(w < n, "reference point out of range");
    let mut values = Vec::with_capacity(n);
    for x in 0..n {
        let v = k.entry(x, w);
        if !v.is_finite() {
            return Err(SpaceError::InfiniteAtReference { x, w });
        }
        values.push(v);
    }
    Modifier::new(values, ModifierSource::ReferencePoint { w })
}

/// `K̃(x,y) = K(x,y)/(m(x)m(y))` and `ω̃ = m²·ω`. Leaves the operator norm
/// and every ratio `K_j/K` invariant; any clamp on `K` is dropped because it
/// no longer bounds the rescaled entries.
pub fn modify(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    m: &Modifier,
) -> (KernelMatrix, MeasureSpace) {
    let n = k.n();
    assert_eq!(n, omega.n());
    assert_eq!(n, m.values().len());
    let mut mat = Matrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = k.entry(i, j) / (m.value(i) * m.value(j));
            mat.set(i, j, v);
            mat.set(j, i, v);
        }
    }
    let weights = omega
        .weights()
        .iter()
        .zip(m.values())
        .map(|(&w, &mv)| mv * mv * w)
        .collect();
    (
        KernelMatrix { mat, cap: None },
        MeasureSpace {
            weights,
            coords: omega.coords.clone(),
        },
    )
}

/// The far-point extension used in the proof of the `u₀` bounds.
#[derive(Debug, Clone)]
pub struct FarPointExtension {
    pub kernel: KernelMatrix,
    pub space: MeasureSpace,
    /// Index of the appended far point.
    pub z: usize,
    /// Diameter of the original space in `d`.
    pub ddiam: f64,
    /// Quasi-metric constant of the extended space: `max(κ, 1)`.
    pub kappa_star: f64,
}

/// Append a massless point `z` at distance `Ddiam = max d(x,y)` from every
/// original point. `d*(z,z) = 0` is represented by clamping `K*(z,z)` to the
/// kernel's cap (or the default cap of the extended entries).
///
/// The zero weight at `z` is intentional: it keeps every iterated kernel on
/// the original pairs untouched while `K_j*(·,z)` encodes `T^{j-1}1`.
pub fn extend_with_far_point(
    k: &KernelMatrix,
    omega: &MeasureSpace,
) -> Result<FarPointExtension, SpaceError> {
    let n = k.n();
    assert_eq!(n, omega.n());
    let (kappa, _) = quasimetric_constant(k)?;

    let mut ddiam = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let d = k.distance(i, j);
            if !d.is_finite() {
                return Err(SpaceError::Unbounded { i, j });
            }
            ddiam = ddiam.max(d);
        }
    }
    if ddiam == 0.0 {
        return Err(SpaceError::DegenerateDistance);
    }

    let far_kernel = 1.0 / ddiam;
    let max_finite = k
        .max_finite_entry()
        .map(|m| m.max(far_kernel))
        .unwrap_or(far_kernel);
    let cap = k.cap().unwrap_or(max_finite * DEFAULT_CAP_FACTOR);

    let mut mat = Matrix::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            mat.set(i, j, k.entry(i, j));
        }
        mat.set(i, n, far_kernel);
        mat.set(n, i, far_kernel);
    }
    mat.set(n, n, cap);

    let mut weights = omega.weights().to_vec();
    weights.push(0.0);

    Ok(FarPointExtension {
        kernel: KernelMatrix {
            mat,
            cap: Some(cap),
        },
        space: MeasureSpace {
            weights,
            coords: None,
        },
        z: n,
        ddiam,
        kappa_star: kappa.max(1.0),
    })
}

/// Full diagnostics: κ, Ptolemy constant, snowflake exponent and
/// comparability, with witnesses.
pub fn diagnose(k: &KernelMatrix) -> Result<QuasiMetricReport, SpaceError> {
    let (kappa, kappa_witness) = quasimetric_constant(k)?;
    let (ptolemy, ptolemy_witness) = ptolemy_constant(k)?;
    let snow = snowflake(k)?;
    Ok(QuasiMetricReport {
        kappa,
        kappa_witness,
        ptolemy,
        ptolemy_witness,
        beta: snow.beta,
        snowflake_comparability: snow.comparability,
    })
}
