use thiserror::Error;

pub type Result<T, E = QmtError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmtError {
    #[error("invalid sample space: {0}")]
    InvalidSpace(String),
    #[error("event or measure belongs to a different sample space")]
    SpaceMismatch,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (max defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("axiom violated: {0}")]
    Axiom(String),
    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:.3e})"
    )]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("events are not pairwise disjoint")]
    NotDisjoint,
    #[error("sample space too large for this operation: {n_atoms} atoms (limit {limit})")]
    SpaceTooLarge { n_atoms: usize, limit: usize },
    #[error("conditional measure undefined: conditioning event has measure {measure:.3e}")]
    ConditionUndefined { measure: f64 },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("marginal for setting pair {pair} is not diagonal (max off-diagonal {max_off_diagonal:.3e})")]
    MarginalsNotDiagonal { pair: String, max_off_diagonal: f64 },
    #[error("invalid sign pattern: {0}")]
    InvalidPattern(String),
    #[error("not strongly positive: eigenvalue {eigenvalue:.3e} below tolerance")]
    NotStronglyPositive { eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid projector family: {0}")]
    InvalidProjectors(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid structured model: {0}")]
    InvalidModel(String),
    #[error("LP error: {0}")]
    Lp(String),
    #[error("parse error: {0}")]
    Parse(String),
}
