//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsfError {
    #[error("base operator data is not self-adjoint (defect {defect:.3e})")]
    NonHermitianBase { defect: f64 },
    #[error("perturbation is unbounded or has non-finite entries")]
    UnboundedPerturbation,
    #[error("spectral parameter {z} is too close to the spectrum (cond estimate {cond:.3e})")]
    SingularShift { z: num_complex::Complex64, cond: f64 },
    #[error("requested extension order {requested} exceeds available derivatives {available}")]
    OrderTooHigh { requested: usize, available: usize },
    #[error("cutoff support contains a declared non-real eigenvalue at {eig}")]
    InadmissibleCutoff { eig: num_complex::Complex64 },
    #[error("contour of radius {radius} around {center} passes too close to the spectrum")]
    ContourHitsSpectrum { center: num_complex::Complex64, radius: f64 },
    #[error("contour quadrature did not reach an idempotent projector (defect {defect:.3e})")]
    NonIdempotent { defect: f64 },
    #[error("resolvent growth exponent exceeds cap {cap}")]
    GrowthUnbounded { cap: usize },
    #[error("quadrature failed to converge within the node budget ({nodes} nodes, rel change {rel:.3e})")]
    QuadratureNotConverged { nodes: usize, rel: f64 },
    #[error("epsilon extrapolation diverged (spread {spread:.3e})")]
    ExtrapolationDiverged { spread: f64 },
    #[error("phase jump near lambda = {lambda} could not be resolved by refinement")]
    UnresolvablePhaseJump { lambda: f64 },
    #[error("square-root branch violated: Im sqrt(z) <= 0 off the boundary at z = {z}")]
    BranchViolation { z: num_complex::Complex64 },
    #[error("kernel resolution too coarse: {msg}")]
    ResolutionTooCoarse { msg: String },
    #[error("I + T0 is nearly singular at lambda = {lambda} (s_min = {smin:.3e})")]
    NearSingularity { lambda: f64, smin: f64 },
    #[error("order estimation unstable: {msg}")]
    OrderUnresolved { msg: String },
    #[error("potential has (numerically) zero mean; leading high-energy term degenerate")]
    ZeroMeanPotential,
    #[error("closed form evaluated on the spectral singularity (beta = 1/pi, lambda = 1/2)")]
    OnSingularity,
    #[error("determinant closed form requires Im z != 0")]
    RealAxisEvaluation,
    #[error("operator specification not supported by this operation: {msg}")]
    UnsupportedSpec { msg: String },
    #[error("geometric sum G_m is numerically singular (sector hypothesis violated)")]
    GmNotInvertible,
    #[error("invalid configuration: {msg}")]
    ConfigInvalid { msg: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SsfError>;

impl SsfError {
    /// Process exit code contract: 2 config, 3 non-convergence, 4 singularity proximity.
    pub fn exit_code(&self) -> i32 {
        use SsfError::*;
        match self {
            ConfigInvalid { .. } | UnsupportedSpec { .. } | Io(_) => 2,
            QuadratureNotConverged { .. }
            | ExtrapolationDiverged { .. }
            | NonIdempotent { .. }
            | GrowthUnbounded { .. }
            | OrderUnresolved { .. }
            | ResolutionTooCoarse { .. } => 3,
            SingularShift { .. }
            | NearSingularity { .. }
            | UnresolvablePhaseJump { .. }
            | ContourHitsSpectrum { .. }
            | OnSingularity => 4,
            _ => 3,
        }
    }
}
