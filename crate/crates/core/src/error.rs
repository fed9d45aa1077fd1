use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point lies outside the polytope: {0}")]
    InfeasiblePoint(String),

    #[error("point is a vertex of the polytope, no move is possible")]
    AtVertex,

    #[error("no nullspace direction admits positive travel in both senses")]
    DegenerateDirection,

    #[error("no fractional edge left to round")]
    NothingToRound,

    #[error("LP solver failed: {0}")]
    SolverFailure(String),

    #[error("instance is infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}
