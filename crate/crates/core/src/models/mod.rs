//! Kernel families the estimates apply to: Riesz kernels on point clouds,
//! a fractional Green-kernel surrogate on bounded domains with its boundary
//! modifier, and the dyadic-cube Carleson model.

mod dyadic;
mod green;
mod riesz;

pub use dyadic::{build_dyadic, CubeId, DyadicModel, SRule};
pub use green::{build_green_surrogate, green_min_modifier, Domain, DomainGreenSpec};
pub use riesz::{build_riesz, riesz_normalization, RieszSpec};

use thiserror::Error;

use crate::space::SpaceError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sample points {i} and {j} coincide")]
    DuplicatePoints { i: usize, j: usize },
    #[error("grid point {index} lies on the boundary (delta = {delta})")]
    BoundaryPoint { index: usize, delta: f64 },
    #[error("the measure has no atoms")]
    EmptyMeasure,
    #[error("weight at point {index} is not strictly positive")]
    NonPositiveWeight { index: usize },
    #[error("atom {index} lies outside [0,1)^n")]
    AtomOutOfDomain { index: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Potential `q` restricted to constants and radial polynomials, evaluated
/// pointwise to produce the measure `ω_i = q(x_i)·vol_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant(f64),
    /// `Σ_k c_k·|x|^k` with the listed coefficients.
    RadialPoly(Vec<f64>),
}

impl Potential {
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::RadialPoly(coeffs) => {
                let r = point.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut acc = 0.0;
                let mut pow = 1.0;
                for &c in coeffs {
                    acc += c * pow;
                    pow *= r;
                }
                acc
            }
        }
    }

    /// `"0.75"` or `"radial:c0,c1,…"`.
    pub fn parse(text: &str) -> Result<Potential, ModelError> {
        let text = text.trim();
        if let Some(rest) = text.strip_prefix("radial:") {
            let coeffs: Result<Vec<f64>, _> =
                rest.split(',').map(|t| t.trim().parse::<f64>()).collect();
            return coeffs
                .map(Potential::RadialPoly)
                .map_err(|e| ModelError::InvalidSpec(format!("bad radial coefficients: {e}")));
        }
        text.parse::<f64>()
            .map(Potential::Constant)
            .map_err(|e| ModelError::InvalidSpec(format!("bad potential {text:?}: {e}")))
    }
}
