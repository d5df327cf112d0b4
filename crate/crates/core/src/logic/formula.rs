use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::{AgentId, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator obtained by swapping the operands.
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

/// Formulas of the guard and claim language. Quantifiers range over finite
/// named domains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String, Vec<Term>),
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    ForAll(String, String, Box<Formula>),
    Exists(String, String, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Atom(pred.into(), args)
    }

    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Self {
        Formula::Cmp(op, lhs, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(var: impl Into<String>, domain: impl Into<String>, body: Formula) -> Self {
        Formula::ForAll(var.into(), domain.into(), Box::new(body))
    }

    pub fn exists(var: impl Into<String>, domain: impl Into<String>, body: Formula) -> Self {
        Formula::Exists(var.into(), domain.into(), Box::new(body))
    }

    /// Left-nested conjunction; `True` for an empty sequence.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `False` for an empty sequence.
    pub fn disjunction(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::False)
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) | Formula::Cmp(..) => 1,
            Formula::Not(f) | Formula::ForAll(_, _, f) | Formula::Exists(_, _, f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Free variables, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        fn term_vars(t: &Term, bound: &[String], out: &mut Vec<String>) {
            match t {
                Term::Var(v) if !bound.contains(v) && !out.contains(v) => out.push(v.clone()),
                Term::Balance(t) => term_vars(t, bound, out),
                Term::App(_, args) => args.iter().for_each(|a| term_vars(a, bound, out)),
                Term::Arith(_, a, b) => {
                    term_vars(a, bound, out);
                    term_vars(b, bound, out);
                }
                _ => {}
            }
        }
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, args) => args.iter().for_each(|a| term_vars(a, bound, out)),
            Formula::Cmp(_, l, r) => {
                term_vars(l, bound, out);
                term_vars(r, bound, out);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::ForAll(v, _, body) | Formula::Exists(v, _, body) => {
                bound.push(v.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub(crate) fn substitute(&self, var: &str, value: &Term) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(p, args) => {
                Formula::Atom(p.clone(), args.iter().map(|a| a.substitute(var, value)).collect())
            }
            Formula::Cmp(op, l, r) => {
                Formula::Cmp(*op, l.substitute(var, value), r.substitute(var, value))
            }
            Formula::Not(f) => Formula::not(f.substitute(var, value)),
            Formula::And(a, b) => Formula::and(a.substitute(var, value), b.substitute(var, value)),
            Formula::Or(a, b) => Formula::or(a.substitute(var, value), b.substitute(var, value)),
            Formula::Implies(a, b) => {
                Formula::implies(a.substitute(var, value), b.substitute(var, value))
            }
            Formula::ForAll(v, d, body) | Formula::Exists(v, d, body) => {
                let body = if v == var {
                    body.as_ref().clone()
                } else {
                    body.substitute(var, value)
                };
                match self {
                    Formula::ForAll(..) => Formula::forall(v.clone(), d.clone(), body),
                    _ => Formula::exists(v.clone(), d.clone(), body),
                }
            }
        }
    }
}

/// Canonical, fully parenthesised rendering. Every binary connective is
/// wrapped in parentheses so the text re-parses to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(p, args) if args.is_empty() => f.write_str(p),
            Formula::Atom(p, args) => write!(f, "{}", Term::App(p.clone(), args.clone())),
            Formula::Cmp(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
            Formula::Not(inner) => write!(f, "!{inner}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::ForAll(v, d, body) => write!(f, "(forall {v} in {d}: {body})"),
            Formula::Exists(v, d, body) => write!(f, "(exists {v} in {d}: {body})"),
        }
    }
}

/// Where a claim entered the claim store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimOrigin {
    Submitted,
    Block(String),
}

impl fmt::Display for ClaimOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClaimOrigin::Submitted => f.write_str("submitted"),
            ClaimOrigin::Block(id) => write!(f, "block {id}"),
        }
    }
}

/// `[authority] body`: the authority is accountable for `body`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Claim {
    pub authority: AgentId,
    pub body: Formula,
    pub origin: ClaimOrigin,
}

impl Claim {
    pub fn new(authority: impl Into<String>, body: Formula) -> Self {
        Claim {
            authority: AgentId(authority.into()),
            body,
            origin: ClaimOrigin::Submitted,
        }
    }

    pub fn with_origin(mut self, origin: ClaimOrigin) -> Self {
        self.origin = origin;
        self
    }

    /// Same authority and body, ignoring where the claim came from.
    pub fn same_statement(&self, other: &Claim) -> bool {
        self.authority == other.authority && self.body == other.body
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.authority, self.body)
    }
}
