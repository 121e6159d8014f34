use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite: pivot {pivot:e} at index {index}")]
    NotPositiveSemiDefinite { index: usize, pivot: f64 },

    #[error("covariance sequence could not be factorized for n = {n}")]
    EmbeddingFailed { n: usize },

    #[error("grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error("functional is not centered: mean {mean:e} lies {z:.2} standard errors from zero")]
    NotCentered { mean: f64, z: f64 },

    #[error("variance estimate {0:e} is degenerate")]
    DegenerateVariance(f64),

    #[error("covariance is singular: smallest eigenvalue {min:e} against norm {norm:e}")]
    SingularCovariance { min: f64, norm: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("kernel domination violated at a = {a}, s = {s}: |K| = {kernel:e} > g = {dominator:e}")]
    DominationViolated {
        a: f64,
        s: f64,
        kernel: f64,
        dominator: f64,
    },

    #[error("Hermite tail {tail:e} is not negligible against partial sum {partial:e}")]
    TailNotNegligible { tail: f64, partial: f64 },

    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("power p = {0} is too small, need p >= 2")]
    PTooSmall(usize),

    #[error("dense storage for n = {n} exceeds the cap of n = {cap}; pass an index subsample")]
    StorageCapExceeded { n: usize, cap: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment spec at `{path}`: {message}")]
    SpecInvalid { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
