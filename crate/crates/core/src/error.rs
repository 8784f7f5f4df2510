use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlagError {
    #[error("point {point} lies {distance:e} from its loop vertex (tolerance {tol:e})")]
    NestingViolation { point: usize, distance: f64, tol: f64 },

    #[error("density sign error: {0}")]
    SignError(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("resolution {requested} too coarse: {reason}")]
    TooCoarse { requested: usize, reason: String },

    #[error("step {step}: displacement {displacement:e} exceeds limit {limit:e}")]
    StepTooLarge { step: usize, displacement: f64, limit: f64 },

    #[error("incompatible tangent: {0}")]
    IncompatibleTangent(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("signature shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("both entries of the pair are zero")]
    ZeroPair,

    #[error("arc {arc}: source mass {source_mass} differs from target mass {target_mass}")]
    MassMismatch { arc: usize, source_mass: f64, target_mass: f64 },

    #[error("source and target densities have opposite signs")]
    SignMismatch,

    #[error("circle map is not monotone at vertex {0}")]
    NonMonotone(usize),

    #[error("constraint violation at marked vertex {index}: value {value:e}")]
    ConstraintViolation { index: usize, value: f64 },

    #[error("unsupported flag shape: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, FlagError>;
