use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },

    #[error("oracle restricted to assignment case: {0}")]
    NotAssignment(String),

    #[error("Gibbs kernel is not finite after stabilization; gamma = {gamma:e} is too small")]
    NonFiniteKernel { gamma: f64 },

    #[error("Sinkhorn did not converge: marginal residual {residual:e} after {iterations} iterations")]
    SinkhornNotConverged { residual: f64, iterations: usize },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("singular matrix: {0}; add diagonal jitter")]
    Singular(String),

    #[error("integration diverged: {0}")]
    Diverged(String),

    #[error("particle weights are numerically zero (filter degeneracy)")]
    DegenerateWeights,

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument { .. })
    }
}
