//! Seeded instance builders shared by the CLI, the browser demo, and the
//! test suites. Everything regenerates bit-identically from the seed.

use crate::neumann::{operator_norm, NeumannError};
use crate::rng::SplitMix64;
use crate::space::{KernelMatrix, MeasureSpace};

/// Random quasi-metric instance: `n` points uniform in the unit square,
/// `d = |x_i − x_j|^power` (power 2 gives κ near 2), `K = 1/d` with the
/// diagonal set to four times the largest off-diagonal entry (recorded as
/// the kernel's cap), weights uniform in `[0.5, 1.5)/n` optionally rescaled
/// so the operator norm hits `target_norm` exactly (the norm is linear in
/// the measure). The moderate diagonal keeps the spectrum non-degenerate;
/// a huge clamp would reduce `T` to a multiple of the identity.
#[derive(Debug, Clone)]
pub struct PlaneInstanceSpec {
    pub n: usize,
    pub seed: u64,
    pub power: f64,
    pub target_norm: Option<f64>,
}

impl PlaneInstanceSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        PlaneInstanceSpec {
            n,
            seed,
            power: 2.0,
            target_norm: None,
        }
    }

    pub fn with_target_norm(mut self, target: f64) -> Self {
        self.target_norm = Some(target);
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }
}

pub fn random_plane_instance(
    spec: &PlaneInstanceSpec,
) -> Result<(KernelMatrix, MeasureSpace), NeumannError> {
    let base = SplitMix64::new(spec.seed);
    let mut coord_rng = base.split(1);
    let mut weight_rng = base.split(2);

    let pts: Vec<(f64, f64)> = (0..spec.n)
        .map(|_| (coord_rng.next_f64(), coord_rng.next_f64()))
        .collect();
    let off_diag = |i: usize, j: usize| {
        let dx = pts[i].0 - pts[j].0;
        let dy = pts[i].1 - pts[j].1;
        let r = (dx * dx + dy * dy).sqrt();
        1.0 / r.powf(spec.power)
    };
    let mut cap = 1.0_f64;
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            cap = cap.max(off_diag(i, j));
        }
    }
    cap *= 4.0;
    let kernel = KernelMatrix::from_fn_symmetric(spec.n, |i, j| {
        if i == j {
            f64::INFINITY
        } else {
            off_diag(i, j)
        }
    })
    .expect("plane kernel entries are positive")
    .clamped(cap)
    .expect("cap is positive and finite");

    let weights: Vec<f64> = (0..spec.n)
        .map(|_| weight_rng.next_range(0.5, 1.5) / spec.n as f64)
        .collect();
    let space = MeasureSpace::with_coords(weights, pts.iter().map(|&(x, y)| vec![x, y]).collect())
        .expect("weights are positive");

    let space = match spec.target_norm {
        Some(target) => rescale_to_norm(&kernel, &space, target)?,
        None => space,
    };
    Ok((kernel, space))
}

/// Scale the measure so `‖T‖` equals `target`.
pub fn rescale_to_norm(
    k: &KernelMatrix,
    omega: &MeasureSpace,
    target: f64,
) -> Result<MeasureSpace, NeumannError> {
    assert!(target > 0.0 && target.is_finite());
    let norm = operator_norm(k, omega)?;
    Ok(omega.scaled(target / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::quasimetric_constant;

    #[test]
    fn instances_regenerate_from_seed() {
        let spec = PlaneInstanceSpec::new(15, 77).with_target_norm(0.6);
        let (k1, w1) = random_plane_instance(&spec).unwrap();
        let (k2, w2) = random_plane_instance(&spec).unwrap();
        assert_eq!(k1.matrix(), k2.matrix());
        assert_eq!(w1.weights(), w2.weights());
    }

    #[test]
    fn target_norm_hit_exactly() {
        let spec = PlaneInstanceSpec::new(20, 3).with_target_norm(0.9);
        let (k, w) = random_plane_instance(&spec).unwrap();
        let norm = operator_norm(&k, &w).unwrap();
        assert!((norm - 0.9).abs() < 1e-9);
    }

    #[test]
    fn squared_distance_instances_are_quasi_metric() {
        for seed in 0..5u64 {
            let (k, _) = random_plane_instance(&PlaneInstanceSpec::new(18, seed)).unwrap();
            let (kappa, _) = quasimetric_constant(&k).unwrap();
            assert!((0.5..=2.0 + 1e-9).contains(&kappa));
        }
    }
}
