use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("control net has no faces")]
    Empty,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate rational basis on element {element}: denominator {denominator:e}")]
    DegenerateBasis { element: usize, denominator: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("inconsistent equality constraints (residual {residual:e}) on edges {edges:?}")]
    InfeasibleConstraint { edges: Vec<usize>, residual: f64 },

    #[error("singular parameterization on element {element} at ({xi}, {eta})")]
    SingularParameterization { element: usize, xi: f64, eta: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("nonpositive lumped mass {value:e} for basis function {index}")]
    Lumping { index: usize, value: f64 },

    #[error("eigensolver failed to converge: {log}")]
    Eigensolver { log: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format(_) => "FormatError",
            Error::Topology(_) => "TopologyError",
            Error::Empty => "EmptyError",
            Error::Domain(_) => "DomainError",
            Error::DegenerateBasis { .. } => "DegenerateBasisError",
            Error::Internal(_) => "InternalError",
            Error::InfeasibleConstraint { .. } => "InfeasibleConstraintError",
            Error::SingularParameterization { .. } => "SingularParameterizationError",
            Error::Resource(_) => "ResourceError",
            Error::Lumping { .. } => "LumpingError",
            Error::Eigensolver { .. } => "EigensolverError",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefiniteError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
