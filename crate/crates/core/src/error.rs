use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// A configured budget (subdivision level, simplex count, sampling depth) ran out.
    Budget,
    /// Input validation or a certified hypothesis failed.
    Hypothesis,
    /// Anything else: I/O, parsing, internal bugs.
    Other,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate simplex {0}: vertices are affinely dependent")]
    DegenerateSimplex(String),

    #[error("simplex of dimension {0} exceeds the supported maximum of 8")]
    SimplexTooLarge(usize),

    #[error("ray centre lies on the boundary of the simplex")]
    CenterOnBoundary,

    #[error("ray does not exit the simplex (malformed facet forms)")]
    RayDoesNotExit,

    #[error("simplex {0} is listed but one of its faces is not")]
    NotFaceClosed(String),

    #[error("simplices {0} and {1} intersect outside their common face")]
    BadIntersection(String, String),

    #[error("unknown vertex {0}")]
    UnknownVertex(String),

    #[error("invalid complex: {0}")]
    InvalidComplex(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("no carrier found for {0}: point is outside the polyhedron")]
    CarrierNotFound(String),

    #[error("not a refinement: {0}")]
    NotARefinement(String),

    #[error("point {0} is outside the domain")]
    OutsideDomain(String),

    #[error("not simplicial: simplex {simplex} maps to {image}, which spans no simplex")]
    NotSimplicial { simplex: String, image: String },

    #[error("oracle failed: {0}")]
    OracleDomainError(String),

    #[error("Lipschitz certificate violated: {0}")]
    LipschitzViolation(String),

    #[error("no witness found for {simplex}: {reason}")]
    WitnessNotFound { simplex: String, reason: String },

    #[error("internal check failed: {0}")]
    InternalCheckFailed(String),

    #[error("sup-norm bound not met: {0}")]
    SupBoundNotMet(String),

    #[error("point {0} is outside the simplex")]
    OutsideSimplex(String),

    #[error("squeeze ratio {0} is not in (0,1)")]
    EpsilonTooLarge(String),

    #[error("the target complex has no maximal simplex of dimension >= 1")]
    ZeroDimensionalL,

    #[error("hypothesis not certified ({check}): {detail}")]
    HypothesisNotCertified { check: String, detail: String },

    #[error("point {0} is outside the retraction neighbourhood")]
    OutsideU(String),

    #[error("unsupported dimension {0} for rendering")]
    UnsupportedDimension(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::BudgetExceeded(_) | Error::SupBoundNotMet(_) => ErrorKind::Budget,
            Error::WitnessNotFound { reason, .. } if reason.contains("depth") => ErrorKind::Budget,
            Error::Io(_) | Error::Parse(_) | Error::InternalCheckFailed(_) => ErrorKind::Other,
            _ => ErrorKind::Hypothesis,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
