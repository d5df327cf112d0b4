//! Propositional view of ground formulas used by refutation and replay.
//!
//! After `ground_expand`, every leaf is either decided by its arguments
//! (comparisons between constants, `hashlock` on constants) or depends on
//! information the chain cannot compute: extensional atoms, uninterpreted
//! function values, balances, the clock. The latter become named atoms whose
//! truth value is unknown; the name is the canonical text of the leaf.

use std::collections::BTreeMap;

use super::defs::{builtin_predicate, BuiltinKind, DefinitionSet};
use super::error::{LogicError, Result};
use super::eval::{compare, hashlock_holds};
use super::formula::{CmpOp, Formula};
use super::ground::ground_expand;
use super::term::{Term, Value};

pub type AtomId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prop {
    Const(bool),
    Atom(AtomId),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Implies(Box<Prop>, Box<Prop>),
}

impl Prop {
    /// Three-valued (strong Kleene) evaluation under a partial assignment.
    pub fn eval3(&self, assignment: &[Option<bool>]) -> Option<bool> {
        match self {
            Prop::Const(b) => Some(*b),
            Prop::Atom(id) => assignment.get(*id).copied().flatten(),
            Prop::Not(p) => p.eval3(assignment).map(|b| !b),
            Prop::And(a, b) => match (a.eval3(assignment), b.eval3(assignment)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Prop::Or(a, b) => match (a.eval3(assignment), b.eval3(assignment)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Prop::Implies(a, b) => match (a.eval3(assignment), b.eval3(assignment)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    pub fn atoms(&self, out: &mut Vec<AtomId>) {
        match self {
            Prop::Const(_) => {}
            Prop::Atom(id) => {
                if !out.contains(id) {
                    out.push(*id);
                }
            }
            Prop::Not(p) => p.atoms(out),
            Prop::And(a, b) | Prop::Or(a, b) | Prop::Implies(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }
}

/// Interns atom names; ids follow first-occurrence order.
#[derive(Debug, Clone, Default)]
pub struct AtomTable {
    ids: BTreeMap<String, AtomId>,
    names: Vec<String>,
}

impl AtomTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> AtomId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(name.to_owned(), id);
        self.names.push(name.to_owned());
        id
    }

    pub fn get(&self, name: &str) -> Option<AtomId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: AtomId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Grounds `f` and compiles it, interning unknown leaves into `table`.
pub fn compile(f: &Formula, defs: &DefinitionSet, table: &mut AtomTable) -> Result<Prop> {
    let ground = ground_expand(f, defs)?;
    leaves(&ground, table)
}

enum Folded {
    Known(Value),
    Unknown(Term),
}

fn fold(t: &Term) -> Result<Folded> {
    Ok(match t {
        Term::Const(s) => Folded::Known(Value::Sym(s.clone())),
        Term::Agent(a) => Folded::Known(Value::Sym(a.0.clone())),
        Term::Int(i) => Folded::Known(Value::Int(*i)),
        Term::Var(v) => return Err(LogicError::NonGround(v.clone())),
        Term::Balance(inner) => Folded::Unknown(Term::Balance(Box::new(canonical(inner)?))),
        Term::Arith(op, a, b) => match (fold(a)?, fold(b)?) {
            (Folded::Known(Value::Int(x)), Folded::Known(Value::Int(y))) => Folded::Known(Value::Int(
                op.apply(x, y)
                    .ok_or_else(|| LogicError::TypeMismatch(format!("overflow in {t}")))?,
            )),
            (Folded::Known(Value::Sym(s)), _) | (_, Folded::Known(Value::Sym(s))) => {
                return Err(LogicError::TypeMismatch(format!("arithmetic on symbol {s}")))
            }
            (a, b) => Folded::Unknown(Term::arith(*op, unfold(a), unfold(b))),
        },
        Term::App(name, args) => Folded::Unknown(Term::App(
            name.clone(),
            args.iter().map(canonical).collect::<Result<_>>()?,
        )),
    })
}

/// Canonical term: constants and agents collapse to the same symbol.
fn canonical(t: &Term) -> Result<Term> {
    Ok(unfold(fold(t)?))
}

fn unfold(f: Folded) -> Term {
    match f {
        Folded::Known(v) => v.to_term(),
        Folded::Unknown(t) => t,
    }
}

fn term_text(f: &Folded) -> String {
    match f {
        Folded::Known(v) => v.to_string(),
        Folded::Unknown(t) => t.to_string(),
    }
}

fn leaves(f: &Formula, table: &mut AtomTable) -> Result<Prop> {
    Ok(match f {
        Formula::True => Prop::Const(true),
        Formula::False => Prop::Const(false),
        Formula::Not(p) => Prop::Not(Box::new(leaves(p, table)?)),
        Formula::And(a, b) => Prop::And(Box::new(leaves(a, table)?), Box::new(leaves(b, table)?)),
        Formula::Or(a, b) => Prop::Or(Box::new(leaves(a, table)?), Box::new(leaves(b, table)?)),
        Formula::Implies(a, b) => {
            Prop::Implies(Box::new(leaves(a, table)?), Box::new(leaves(b, table)?))
        }
        Formula::ForAll(..) | Formula::Exists(..) => {
            unreachable!("ground_expand removes quantifiers")
        }
        Formula::Atom(p, args) => {
            let folded = args.iter().map(fold).collect::<Result<Vec<_>>>()?;
            if let Some((_, BuiltinKind::Pure)) = builtin_predicate(p) {
                if let [Folded::Known(h), Folded::Known(s)] = folded.as_slice() {
                    return Ok(Prop::Const(hashlock_holds(h, s)?));
                }
            }
            let args: Vec<String> = folded.iter().map(term_text).collect();
            let name = if args.is_empty() {
                p.clone()
            } else {
                format!("{p}({})", args.join(", "))
            };
            Prop::Atom(table.intern(&name))
        }
        Formula::Cmp(op, l, r) => {
            let (l, r) = (fold(l)?, fold(r)?);
            if let (Folded::Known(a), Folded::Known(b)) = (&l, &r) {
                return Ok(Prop::Const(compare(*op, a, b)?));
            }
            if *op == CmpOp::Ne {
                return Ok(Prop::Not(Box::new(cmp_atom(CmpOp::Eq, l, r, table))));
            }
            cmp_atom(*op, l, r, table)
        }
    })
}

fn cmp_atom(op: CmpOp, l: Folded, r: Folded, table: &mut AtomTable) -> Prop {
    let (lt, rt) = (term_text(&l), term_text(&r));
    // unknown side first; two unknowns in text order
    let swap = match (&l, &r) {
        (Folded::Known(_), Folded::Unknown(_)) => true,
        (Folded::Unknown(_), Folded::Unknown(_)) => rt < lt,
        _ => false,
    };
    let name = if swap {
        format!("{rt} {} {lt}", op.flipped().symbol())
    } else {
        format!("{lt} {} {rt}", op.symbol())
    };
    Prop::Atom(table.intern(&name))
}
