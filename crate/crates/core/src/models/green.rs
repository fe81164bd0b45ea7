//! Green-kernel surrogate for the fractional Laplacian on a bounded domain:
//!
//! `Ĝ(x,y) = δ(x)^{α/2}·δ(y)^{α/2} / (|x−y|^{n−α}·(|x−y|+δ(x)+δ(y))^{α/2})`
//!
//! taken with constant 1 (the comparability constants are absorbed by the
//! robustness of the bounds), together with the boundary modifier
//! `m(x) = δ(x)^{α/2}` that makes it quasi-metric after modification.

use super::{ModelError, Potential};
use crate::space::{KernelMatrix, MeasureSpace, Modifier, ModifierSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitBall,
    HalfSpace,
}

#[derive(Debug, Clone)]
pub struct DomainGreenSpec {
    pub domain: Domain,
    pub dim: usize,
    pub alpha: f64,
    pub points: Vec<Vec<f64>>,
    pub volumes: Vec<f64>,
    /// Distance to the boundary, strictly positive on the interior grid.
    pub delta: Vec<f64>,
    pub potential: Potential,
    /// Half-space grids are truncated to a bounded box; the extent is recorded.
    pub truncation: Option<f64>,
}

impl DomainGreenSpec {
    /// Midpoint grid on `[−1,1]^dim` restricted to the open unit ball,
    /// `δ(x) = 1 − |x|`.
    pub fn unit_ball_grid(
        dim: usize,
        res: usize,
        alpha: f64,
        potential: Potential,
    ) -> Result<DomainGreenSpec, ModelError> {
        if res == 0 {
            return Err(ModelError::InvalidSpec("grid resolution must be positive".into()));
        }
        let h = 2.0 / res as f64;
        let mut points = Vec::new();
        let mut delta = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let p: Vec<f64> = idx.iter().map(|&i| -1.0 + (i as f64 + 0.5) * h).collect();
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r < 1.0 {
                delta.push(1.0 - r);
                points.push(p);
            }
            // odometer over the dim-dimensional grid
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    let volumes = vec![h.powi(dim as i32); points.len()];
                    return DomainGreenSpec::validated(DomainGreenSpec {
                        domain: Domain::UnitBall,
                        dim,
                        alpha,
                        points,
                        volumes,
                        delta,
                        potential,
                        truncation: None,
                    });
                }
            }
        }
    }

    /// Midpoint grid on `(0, extent]×[−extent/2, extent/2]^{dim−1}` with the
    /// boundary hyperplane at `x₁ = 0`: `δ(x) = x₁`.
    pub fn half_space_grid(
        dim: usize,
        res: usize,
        extent: f64,
        alpha: f64,
        potential: Potential,
    ) -> Result<DomainGreenSpec, ModelError> {
        if res == 0 || !(extent > 0.0) {
            return Err(ModelError::InvalidSpec("bad half-space grid".into()));
        }
        let h = extent / res as f64;
        let mut points = Vec::new();
        let mut delta = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let mut p = Vec::with_capacity(dim);
            p.push((idx[0] as f64 + 0.5) * h);
            for &i in &idx[1..] {
                p.push(-extent / 2.0 + (i as f64 + 0.5) * h);
            }
            delta.push(p[0]);
            points.push(p);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    let volumes = vec![h.powi(dim as i32); points.len()];
                    return DomainGreenSpec::validated(DomainGreenSpec {
                        domain: Domain::HalfSpace,
                        dim,
                        alpha,
                        points,
                        volumes,
                        delta,
                        potential,
                        truncation: Some(extent),
                    });
                }
            }
        }
    }

    fn validated(spec: DomainGreenSpec) -> Result<DomainGreenSpec, ModelError> {
        if !(spec.alpha > 0.0 && spec.alpha <= 2.0 && spec.alpha < spec.dim as f64) {
            return Err(ModelError::InvalidSpec(format!(
                "surrogate requires 0 < alpha ≤ 2 and alpha < n; got alpha = {}, n = {} \
                 (alpha > 2 is unsupported here)",
                spec.alpha, spec.dim
            )));
        }
        if spec.points.is_empty() {
            return Err(ModelError::EmptyMeasure);
        }
        Ok(spec)
    }
}

/// Assemble `(Ĝ, ω, m)`. Off-diagonal entries are positive and finite; the
/// diagonal is clamped at the default cap.
pub fn build_green_surrogate(
    spec: &DomainGreenSpec,
) -> Result<(KernelMatrix, MeasureSpace, Modifier), ModelError> {
    let spec = DomainGreenSpec::validated(spec.clone())?;
    let n = spec.points.len();
    for (i, &d) in spec.delta.iter().enumerate() {
        if !(d > 0.0) {
            return Err(ModelError::BoundaryPoint { index: i, delta: d });
        }
    }

    let exps = spec.alpha / 2.0;
    let power = spec.dim as f64 - spec.alpha;
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                entries.push(f64::INFINITY);
                continue;
            }
            let r: f64 = spec.points[i]
                .iter()
                .zip(&spec.points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if r == 0.0 {
                return Err(ModelError::DuplicatePoints { i, j });
            }
            let num = spec.delta[i].powf(exps) * spec.delta[j].powf(exps);
            let den = r.powf(power) * (r + spec.delta[i] + spec.delta[j]).powf(exps);
            entries.push(num / den);
        }
    }
    let kernel = KernelMatrix::from_upper_triangle(n, &entries)?.clamped_default()?;

    let mut weights = Vec::with_capacity(n);
    for (i, (p, &vol)) in spec.points.iter().zip(&spec.volumes).enumerate() {
        let w = spec.potential.eval(p) * vol;
        if !(w > 0.0 && w.is_finite()) {
            return Err(ModelError::NonPositiveWeight { index: i });
        }
        weights.push(w);
    }
    let space = MeasureSpace::with_coords(weights, spec.points.clone())?;

    let modifier = Modifier::new(
        spec.delta.iter().map(|d| d.powf(exps)).collect(),
        ModifierSource::BoundaryDistance { alpha: spec.alpha },
    )?;
    Ok((kernel, space, modifier))
}

/// Modifier `m(x) = min(1, K(x, x₀))` from a reference point. The `min`
/// keeps the value finite even where the kernel blows up, so a clamped or
/// unclamped column both work.
pub fn green_min_modifier(k: &KernelMatrix, x0: usize) -> Result<Modifier, ModelError> {
    assert!(x0 < k.n(), "reference point out of range");
    let values: Vec<f64> = (0..k.n()).map(|x| k.entry(x, x0).min(1.0)).collect();
    Ok(Modifier::new(values, ModifierSource::GreenMin { x0 })?)
}
