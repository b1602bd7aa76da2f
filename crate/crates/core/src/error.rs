use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergence(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("circulant embedding failed: most negative eigenvalue {min_eigenvalue:e} at embedding size {size}")]
    EmbeddingFailure { min_eigenvalue: f64, size: usize },

    #[error("PAM step blew up at step {step}: |u| exceeded 1e300")]
    Blowup { step: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("point {point:?} is not in shell {shell}")]
    ShellMembership { point: Vec<i64>, shell: u32 },

    #[error("need at least {needed} shells with nonzero counts, found {found}")]
    InsufficientShells { needed: usize, found: usize },

    #[error("field spacing must be 1 for peak extraction, got {0}")]
    Spacing(f64),

    #[error("censored tail: only {exceedances} exceedances at the largest usable level (need {needed})")]
    Censored { exceedances: usize, needed: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
