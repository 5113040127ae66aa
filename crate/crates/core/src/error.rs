use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("rule {rule} is unsafe: head variable `{variable}` does not occur in the body")]
    SafetyViolation { rule: usize, variable: String },

    #[error("arity mismatch for `{predicate}`: expected {expected}, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("fact `{0}` uses an intensional predicate and cannot appear in an input database")]
    IdbFactInInput(String),

    #[error("`{0}` is not an intensional predicate of the program")]
    NotIntensional(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("goal `{0}` is not derivable")]
    GoalNotDerivable(String),

    #[error("instance too large for the exhaustive oracle: {0}")]
    OracleTooLarge(String),

    #[error("encoding too large: {clauses} clauses exceeds the cap of {cap}")]
    EncodingTooLarge { clauses: usize, cap: usize },

    #[error("fact `{0}` of the candidate subset is not in the database")]
    NotASubset(String),

    #[error("tuple is not an answer: `{0}`")]
    TupleNotAnswer(String),

    #[error("solver budget exhausted after {0:?}")]
    Timeout(Duration),

    #[error("external solver: {0}")]
    ExternalSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
