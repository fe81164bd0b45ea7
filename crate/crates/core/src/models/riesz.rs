//! Riesz kernels `c_{n,α}·|x−y|^{α−n}` on finite point clouds.

use super::{ModelError, Potential};
use crate::rng::SplitMix64;
use crate::space::{KernelMatrix, MeasureSpace};

/// The classical normalization `c_{n,α} = Γ((n−α)/2) / (2^α π^{n/2} Γ(α/2))`.
/// It cancels in every bound ratio; it is carried so reports state the
/// kernel actually built (e.g. `c_{3,2} = 1/(4π)`).
pub fn riesz_normalization(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    libm::tgamma((n - alpha) / 2.0)
        / (2f64.powf(alpha) * std::f64::consts::PI.powf(n / 2.0) * libm::tgamma(alpha / 2.0))
}

#[derive(Debug, Clone)]
pub struct RieszSpec {
    pub dim: usize,
    pub alpha: f64,
    pub points: Vec<Vec<f64>>,
    /// Quadrature cell volume per point (midpoint rule).
    pub volumes: Vec<f64>,
    pub potential: Potential,
}

impl RieszSpec {
    /// Seeded uniform cloud in the unit cube with equal cell volumes `1/n`.
    pub fn random_cloud(
        dim: usize,
        alpha: f64,
        n_points: usize,
        seed: u64,
        potential: Potential,
    ) -> RieszSpec {
        let mut rng = SplitMix64::new(seed);
        let points = (0..n_points)
            .map(|_| (0..dim).map(|_| rng.next_f64()).collect())
            .collect();
        RieszSpec {
            dim,
            alpha,
            points,
            volumes: vec![1.0 / n_points as f64; n_points],
            potential,
        }
    }

    pub fn normalization(&self) -> f64 {
        riesz_normalization(self.dim, self.alpha)
    }
}

/// Assemble the Riesz kernel and the measure `ω_i = q(x_i)·vol_i`.
/// The diagonal (`|x−x| = 0`, kernel infinite) is clamped at the default cap.
pub fn build_riesz(spec: &RieszSpec) -> Result<(KernelMatrix, MeasureSpace), ModelError> {
    if spec.dim < 2 {
        return Err(ModelError::InvalidSpec("dimension must be at least 2".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha < spec.dim as f64) {
        return Err(ModelError::InvalidSpec(format!(
            "alpha = {} must lie in (0, n) with n = {}",
            spec.alpha, spec.dim
        )));
    }
    let n = spec.points.len();
    if n == 0 {
        return Err(ModelError::EmptyMeasure);
    }
    if spec.volumes.len() != n || spec.points.iter().any(|p| p.len() != spec.dim) {
        return Err(ModelError::InvalidSpec(
            "points/volumes shape mismatch".into(),
        ));
    }

    let c = spec.normalization();
    let power = spec.alpha - spec.dim as f64;
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            if i == j {
                entries.push(f64::INFINITY);
                continue;
            }
            let r2: f64 = spec.points[i]
                .iter()
                .zip(&spec.points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if r2 == 0.0 {
                return Err(ModelError::DuplicatePoints { i, j });
            }
            entries.push(c * r2.sqrt().powf(power));
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
    Ok((kernel, space))
}
