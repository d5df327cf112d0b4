//! Claims, definitions, evaluation and refutation.

mod defs;
mod error;
mod eval;
mod formula;
mod ground;
mod minimize;
mod prop;
mod refute;
mod replay;
mod term;

pub use defs::{builtin_predicate, BuiltinKind, DefinitionSet, FunctionClause, Pattern, PredicateDef, BUILTIN_PREDICATES};
pub use error::{LogicError, Result};
pub use eval::{evaluate, evaluate_term, GroundAtom, Model};
pub use formula::{Claim, ClaimOrigin, CmpOp, Formula};
pub use ground::ground_expand;
pub use minimize::{minimize_conflict, DiscordCertificate};
pub use prop::{compile, AtomId, AtomTable, Prop};
pub use refute::{refute, PremiseRef, RefuteConfig, Refutation, Rule, Step};
pub use replay::{
    check_certificate, replay, satisfiable_by_enumeration, ReplayError, ENUMERATION_ATOM_LIMIT,
    MINIMALITY_CHECK_LIMIT,
};
pub use term::{is_identifier, is_keyword, AgentId, ArithOp, Term, Value};
pub(crate) use term::write_quoted;
