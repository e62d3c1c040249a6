use thiserror::Error;

use crate::exprlang::ParseError;

#[derive(Debug, Clone, Error)]
pub enum GeomError {
    #[error("singular matrix: pivot {pivot:.3e} in column {column}")]
    SingularMatrix { pivot: f64, column: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("derivative nesting deeper than {0} levels")]
    DepthExceeded(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("chart `{0}` has an empty sampling domain")]
    EmptyDomain(String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("no transition from `{from}` to `{to}`")]
    NoTransition { from: String, to: String },
    #[error("point {coords:?} of `{from}` lies in no piece of the transition to `{to}`")]
    OutOfPiece { from: String, to: String, coords: Vec<f64> },
    #[error("field `{field}` has no components on chart `{chart}`")]
    MissingChartComponents { field: String, chart: String },
    #[error("contact forms need odd dimension, got {0}")]
    EvenDimension(usize),
    #[error("structure `{0}` is not cooriented")]
    NotCooriented(String),
    #[error("factor `{0}` is not Sasakian")]
    FactorNotSasakian(String),
    #[error("not homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("shadow metric not positive definite (eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("metric and symplectic form are not compatible: {0}")]
    NotCompatible(String),
    #[error("unknown example key `{0}`")]
    UnknownKey(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
