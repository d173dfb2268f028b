use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (|A + A^T|_F = {residual:e})")]
    NotSkew { residual: f64 },

    #[error("matrix is not a rotation (orthonormality defect {defect:e}, det {det})")]
    NotRotation { defect: f64, det: f64 },

    #[error("signature mismatch: expected {expected}, found {found}")]
    SignatureMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spanning set is rank deficient (smallest singular value {sigma:e})")]
    RankDeficient { sigma: f64 },

    #[error("subspaces are not complementary (smallest singular value {sigma:e})")]
    NotComplementary { sigma: f64 },

    #[error("vector is not in the subspace (residual {residual:e})")]
    NotInSubspace { residual: f64 },

    #[error("velocity is not tangent to the group at this point (residual {residual:e})")]
    NotTangent { residual: f64 },

    #[error("invalid metric: {reason}")]
    InvalidMetric { reason: String },

    #[error("inertia entries must be positive, got {0:?}")]
    NonPositiveInertia([f64; 3]),

    #[error("decoupling matrix is singular (smallest singular value {sigma:e})")]
    SingularDecoupling { sigma: f64 },

    #[error("velocity violates the constraint (residual {residual:e})")]
    NotOnConstraint { residual: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
