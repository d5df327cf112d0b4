use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a wallet agent, an oracle, or one of the built-in authorities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        AgentId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_owned())
    }
}

/// A term of the guard language.
///
/// `Var` only appears under a quantifier or inside a definition body; every
/// other variant is ground.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Int(i64),
    Agent(AgentId),
    /// `|w|`, the current balance of a wallet.
    Balance(Box<Term>),
    App(String, Vec<Term>),
    Var(String),
    Arith(ArithOp, Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
        }
    }

    /// `None` on overflow.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
        }
    }
}

impl Term {
    pub fn constant(s: impl Into<String>) -> Self {
        Term::Const(s.into())
    }

    pub fn agent(s: impl Into<String>) -> Self {
        Term::Agent(AgentId(s.into()))
    }

    pub fn balance_of(agent: impl Into<String>) -> Self {
        Term::Balance(Box::new(Term::agent(agent)))
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(name.into(), args)
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Var(s.into())
    }

    pub fn arith(op: ArithOp, a: Term, b: Term) -> Self {
        Term::Arith(op, Box::new(a), Box::new(b))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Balance(t) => t.is_ground(),
            Term::App(_, args) => args.iter().all(Term::is_ground),
            Term::Arith(_, a, b) => a.is_ground() && b.is_ground(),
            _ => true,
        }
    }

    pub(crate) fn substitute(&self, var: &str, value: &Term) -> Term {
        match self {
            Term::Var(v) if v == var => value.clone(),
            Term::Balance(t) => Term::Balance(Box::new(t.substitute(var, value))),
            Term::App(n, args) => {
                Term::App(n.clone(), args.iter().map(|a| a.substitute(var, value)).collect())
            }
            Term::Arith(op, a, b) => Term::arith(*op, a.substitute(var, value), b.substitute(var, value)),
            other => other.clone(),
        }
    }
}

/// A fully evaluated term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn to_term(&self) -> Term {
        match self {
            Value::Int(i) => Term::Int(*i),
            Value::Sym(s) => Term::Const(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write_symbol(f, s),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "true", "false", "forall", "exists", "in", "claim", "tx", "issue", "after", "agent", "oracle",
    "domain", "declare", "def", "pred", "fn", "constraint", "fact", "balance", "scenario",
    "policy", "seed", "horizon", "at", "submit", "by", "halt", "tick", "prodigal", "frugal",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !is_keyword(s)
}

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

pub(crate) fn write_symbol(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    if is_identifier(s) {
        f.write_str(s)
    } else {
        write_quoted(f, s)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(s) => write_symbol(f, s),
            Term::Int(i) => write!(f, "{i}"),
            Term::Agent(a) => f.write_str(a.as_str()),
            Term::Balance(t) => write!(f, "|{t}|"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::Var(v) => f.write_str(v),
            Term::Arith(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
