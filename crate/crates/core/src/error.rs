use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("matrix is not a rotation (orthonormality drift {drift:.3e}, det {det:.6})")]
    NotARotation { drift: f64, det: f64 },
    #[error("rotation angle too close to pi for a stable logarithm (trace {trace:.12})")]
    AngleNearPi { trace: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Lie(#[from] LieError),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("molecule has {components} disconnected heavy-atom components")]
    Disconnected { components: usize },
    #[error("invalid molecular graph: {0}")]
    InvalidGraph(String),

    #[error("sigma {sigma} outside table range [{min}, {max}]")]
    OutOfRange { sigma: f64, min: f64, max: f64 },
    #[error("series truncation insufficient: density row for sigma {sigma} has mass {mass:.3e}")]
    TruncationInsufficient { sigma: f64, mass: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("molecule has no conformer coordinates")]
    NoCoordinates,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("more than {limit} valid cut sets")]
    CombinatorialLimit { limit: usize },
    #[error("bond {0} is not a torsional bond")]
    NotTorsional(usize),

    #[error("inertia tensor is singular")]
    SingularInertia,
    #[error("training diverged at step {step}: loss {loss:.4e} exceeds ten times the initial {initial:.4e}")]
    Divergence { step: usize, loss: f64, initial: f64 },

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("dihedral undefined: collinear atoms")]
    UndefinedDihedral,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("serialization error: {0}")]
    Serialization(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable name of the variant, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Lie(LieError::NotARotation { .. }) => "NotARotation",
            Error::Lie(LieError::AngleNearPi { .. }) => "AngleNearPi",
            Error::Parse { .. } => "ParseError",
            Error::Disconnected { .. } => "DisconnectedError",
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::TruncationInsufficient { .. } => "TruncationInsufficient",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NoCoordinates => "NoCoordinates",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::CombinatorialLimit { .. } => "CombinatorialLimit",
            Error::NotTorsional(_) => "NotTorsional",
            Error::SingularInertia => "SingularInertia",
            Error::Divergence { .. } => "Divergence",
            Error::DegenerateConfiguration(_) => "DegenerateConfiguration",
            Error::UndefinedDihedral => "UndefinedDihedral",
            Error::NonFinite(_) => "NonFinite",
            Error::Serialization(_) => "Serialization",
            Error::Io(_) => "Io",
        }
    }

    /// Errors caused by malformed input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Disconnected { .. }
                | Error::InvalidGraph(_)
                | Error::Serialization(_)
                | Error::Io(_)
                | Error::NoCoordinates
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
