use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("unknown {kind} `{name}`")]
    UnknownSymbol { kind: &'static str, name: String },
    #[error("free variable `{0}` reached during evaluation")]
    NonGround(String),
    #[error("recursive definition involving `{0}`")]
    StratificationViolation(String),
    #[error("`{name}` expects {expected} argument(s), found {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("no clause of `{function}` matches ({args})")]
    NoMatchingClause { function: String, args: String },
    #[error("clause selection for `{0}` depends on a non-constant argument")]
    NonStaticMatch(String),
    #[error("uninterpreted function `{0}` cannot be computed from chain state")]
    Uninterpreted(String),
    #[error("`{0}` is a built-in and cannot be redefined")]
    Reserved(String),
    #[error("resource limit exceeded: {what} (limit {limit})")]
    ResourceLimit { what: &'static str, limit: usize },
    #[error("the candidate claim is not in conflict with the claim store")]
    NotInConflict,
    #[error("the claim store is contradictory without the candidate")]
    InconsistentContext,
}

pub type Result<T, E = LogicError> = std::result::Result<T, E>;
