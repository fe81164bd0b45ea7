//! Neumann-series resolvent kernels of integral operators with quasi-metric
//! kernels on finite discrete measure spaces, with certified bilateral
//! exponential bounds.
//!
//! Given a symmetric kernel `K > 0` on a finite measure space `(Ω, ω)` whose
//! reciprocal `d = 1/K` satisfies a quasi-triangle inequality with constant
//! `κ`, the resolvent kernel `H = Σ_{j≥1} K_j` of `(I − T)⁻¹T` is sandwiched
//! between `K·e^{c·K₂/K}` and `K·e^{C·K₂/K}`, where `c = 1/(4κ²)` and `C` is
//! assembled explicitly from `κ` and `‖T‖`. This crate computes all of the
//! pieces — diagnostics (`κ`, Ptolemy constant, snowflake metric, modifiers),
//! iterated kernels, the resolvent by truncated series and by direct solve,
//! the derived constants — and certifies the bounds in log space, entry by
//! entry, on concrete instances: Riesz kernels, a fractional Green-kernel
//! surrogate on bounded domains, the dyadic Carleson model, and seeded
//! random quasi-metric spaces.

pub mod bounds;
pub mod instances;
pub mod io;
pub mod matrix;
pub mod models;
pub mod neumann;
pub mod rng;
pub mod space;

pub use bounds::{
    certify, certify_u0, equivalence_report, lower_constant, upper_constant, BoundCertificate,
    BoundsError, ConstantLedger, EquivalenceReport,
};
pub use matrix::Matrix;
pub use neumann::{
    apply_t, geometric_t1, iterated_kernels, minimal_solution, neumann_sum, neumann_sum_with,
    operator_norm, MinimalSolution, NeumannError, NeumannOptions, ResolventResult,
};
pub use space::{
    diagnose, extend_with_far_point, find_modifier, modify, ptolemy_constant,
    quasimetric_constant, snowflake, FarPointExtension, KernelMatrix, MeasureSpace, Modifier,
    ModifierSource, QuasiMetricReport, Snowflake, SpaceError,
};
