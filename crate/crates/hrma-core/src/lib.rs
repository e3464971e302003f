//! Numerical convex analysis for the Cauchy problem of the homogeneous real
//! Monge-Ampère equation (HRMA) on toric data.
//!
//! The toolkit builds the Legendre transform potential `ψ(s, x) = (u₀ + s·u̇₀)*(x)`
//! from toric Cauchy data, tracks the convex lifespan past which the symplectic
//! potential `u_s = u₀ + s·u̇₀` stops being convex, locates the gap set `A_s`
//! where `u_s` differs from its convex envelope, and measures the Alexandrov
//! Monge-Ampère mass that ψ deposits on its singular locus.
//!
//! Layout:
//! * [`convex`] — discrete Legendre-Fenchel conjugation, lower convex
//!   envelopes, subdifferentials and gap sets of piecewise-linear functions.
//! * [`toric`] — polytopes, Guillemin potentials, Cauchy data, the convex
//!   lifespan and the evolving set `A_s` with its diagnostics.
//! * [`ray`] — time slices of ψ, gradients, singular points, metric
//!   coefficients and residuals of the geodesic equation on the regular locus.
//! * [`mass`] — subgradient chords, swept-region rasterization and the
//!   Monge-Ampère mass report with its a-priori volume bound.

pub mod convex;
pub mod mass;
pub mod numeric;
pub mod ray;
pub mod toric;

pub use convex::{
    conjugate, gap_set, lower_convex_envelope, subdifferential, BoundaryMode, IntervalUnion,
    PLConvexFunction, SampledFunction, SubdifferentialInterval,
};
pub use mass::{chords, mass_report, prop3_bound, swept_area, MassReport, SubgradientChord,
    SweptRegion};
pub use ray::{
    essential_smoothness_probe, metric_profile, ray_slice, regular_residual, time_derivative,
    MetricProfile, RaySlice, SingularPoint,
};
pub use toric::{
    a_set, a_set_diagnostics, cauchy_from_kahler, convex_lifespan, guillemin_potential, u_s, ASet,
    LifespanResult, Polytope, ToricCauchyData,
};

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid must be strictly increasing (violated at index {index})")]
    NonIncreasingGrid { index: usize },
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("x = {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("function is not convex: secant slope decreases at index {index}")]
    NotConvex { index: usize },
    #[error("slope range [{lo}, {hi}] is degenerate")]
    DegenerateSlopeRange { lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("(s = {s}, x = {x}) lies on the singular locus")]
    Singular { s: f64, x: f64 },
    #[error("internal invariant check failed: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
