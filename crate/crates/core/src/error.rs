use thiserror::Error;

/// Everything that can go wrong while building or evaluating an invariant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid group table: {0}")]
    InvalidGroupTable(String),
    #[error("algebra models do not match: {0}")]
    ModelMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),
    #[error("ill-conditioned rank decision: singular value {value:e} lies within a decade of the cutoff {cutoff:e}")]
    IllConditioned { value: f64, cutoff: f64 },
    #[error("not a projection: {0}")]
    NotProjection(String),
    #[error("unsupported model pair: {0}")]
    UnsupportedModelPair(String),
    #[error("not a cochain complex: {0}")]
    NotComplex(String),
    #[error("operator is not positive: {0}")]
    NotPositive(String),
    #[error("sequence is not exact: {0}")]
    NotExact(String),
    #[error("operator is not invertible: {0}")]
    NotInvertible(String),
    #[error("not of determinant class: {0}")]
    NotDeterminantClass(String),
    #[error("line atom {0:?} has no trivialization in the supplied context")]
    UnresolvedAtom(String),
    #[error("invalid homomorphism: {0}")]
    HomomorphismInvalid(String),
    #[error("coefficient system is not unimodular: {0}")]
    NotUnimodular(String),
    #[error("unknown built-in space {0:?}")]
    UnknownSpace(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("not a subcomplex: {0}")]
    NotSubcomplex(String),
    #[error("attaching map is not cellular: {0}")]
    NotCellular(String),
    #[error("coefficient module must have von Neumann dimension 1, found {0}")]
    DimensionNotOne(f64),
    #[error("fiber Euler characteristic is {0}, the fibration formula needs 0")]
    EulerNotZero(i64),
    #[error("missing transport: {0}")]
    MissingTransport(String),
    #[error("document error: {0}")]
    Document(String),
}

impl Error {
    /// True for failures that come from numerics rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergent(_) | Error::NotDeterminantClass(_) | Error::IllConditioned { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
