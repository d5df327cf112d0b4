use thiserror::Error;

use crate::logic::LogicError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("binding `{0}` is already used")]
    DuplicateBinding(String),
    #[error("agent `{0}` is declared twice")]
    DuplicateAgent(String),
    #[error("`{0}` is declared twice")]
    DuplicateDeclaration(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("`{binding}` depends on `{dep}`, which is not an earlier binding")]
    ForwardDependency { binding: String, dep: String },
    #[error("`{0}` transfers to its own source")]
    SelfTransfer(String),
    #[error("`{0}` must transfer a positive amount")]
    NonPositiveAmount(String),
    #[error("`{0}` transfers from an oracle, which holds no wallet")]
    OracleTransfer(String),
    #[error("closed guard of `{0}` uses an uninterpreted function; use a claimed guard")]
    OpaqueInClosedGuard(String),
    #[error("`{0}` is reserved")]
    Reserved(String),
    #[error("unknown event kind `{0}`")]
    UnknownEventKind(String),
    #[error("event refers to unknown binding `{0}`")]
    UnknownBinding(String),
    #[error("scenario directive `{0}` in a contract")]
    ScenarioDirective(String),
    #[error("{0}")]
    Definition(#[from] LogicError),
}

/// A parse or well-formedness error at a source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct LangError {
    pub line: usize,
    pub col: usize,
    pub kind: LangErrorKind,
}

impl LangError {
    pub fn new(line: usize, col: usize, kind: LangErrorKind) -> Self {
        LangError { line, col, kind }
    }
}
