use thiserror::Error;

/// Errors raised by model construction, evaluation, and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular shape tensor at point {point} (reciprocal condition {rcond:.3e})")]
    SingularShapeTensor { point: usize, rcond: f64 },

    #[error("inverted deformation at point {point} (J = {jacobian:.6e})")]
    InvertedElement { point: usize, jacobian: f64 },

    #[error("Cam-Clay return map did not converge at point {point:?} (trial p = {p_trial:.6e}, q = {q_trial:.6e})")]
    ReturnMapFailure {
        point: Option<usize>,
        p_trial: f64,
        q_trial: f64,
    },

    #[error("non-finite residual at point {point}")]
    NonFiniteResidual { point: usize },

    #[error("linear solve failed at step {step}, iteration {iteration}: {reason}")]
    SolveFailure {
        step: usize,
        iteration: usize,
        reason: String,
    },

    #[error("Newton iteration did not converge at step {step} after {iterations} iterations (|r_u| = {residual_u:.3e}, |r_p| = {residual_p:.3e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual_u: f64,
        residual_p: f64,
    },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("configuration error at '{key}': {message}")]
    Config { key: String, message: String },

    #[error("configuration parse error: {0}")]
    ConfigParse(String),

    #[error("unit mismatch at '{key}': expected {expected}, found '{found}'")]
    UnitMismatch {
        key: String,
        expected: String,
        found: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
