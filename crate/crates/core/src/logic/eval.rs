//! Closed-world evaluation of guards against a chain model.

use std::collections::{BTreeMap, BTreeSet};

use super::defs::{builtin_predicate, BuiltinKind, DefinitionSet};
use super::error::{LogicError, Result};
use super::formula::{Claim, CmpOp, Formula};
use super::term::{AgentId, Term, Value};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(pred: impl Into<String>, args: Vec<Value>) -> Self {
        GroundAtom {
            pred: pred.into(),
            args,
        }
    }
}

/// What the chain knows: balances, published atoms, the claim store and the
/// time oracle's clock.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub balances: BTreeMap<AgentId, i64>,
    pub atoms: BTreeSet<GroundAtom>,
    pub claims: Vec<Claim>,
    pub clock: u64,
}

impl Model {
    pub fn with_balance(mut self, agent: &str, amount: i64) -> Self {
        self.balances.insert(AgentId::new(agent), amount);
        self
    }

    pub fn with_atom(mut self, pred: &str, args: Vec<Value>) -> Self {
        self.atoms.insert(GroundAtom::new(pred, args));
        self
    }

    pub fn with_clock(mut self, clock: u64) -> Self {
        self.clock = clock;
        self
    }
}

/// Classical truth value of a closed formula. Definitions are unfolded,
/// quantifiers range over their declared domains, and atoms of declared
/// predicates are false unless present in the model.
pub fn evaluate(f: &Formula, model: &Model, defs: &DefinitionSet) -> Result<bool> {
    Evaluator {
        model,
        defs,
        unfolding: Vec::new(),
    }
    .formula(f, &mut Vec::new())
}

/// Value of a closed term.
pub fn evaluate_term(t: &Term, model: &Model, defs: &DefinitionSet) -> Result<Value> {
    Evaluator {
        model,
        defs,
        unfolding: Vec::new(),
    }
    .term(t, &mut Vec::new())
}

type Env = Vec<(String, Value)>;

struct Evaluator<'a> {
    model: &'a Model,
    defs: &'a DefinitionSet,
    unfolding: Vec<String>,
}

pub(crate) fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<bool> {
    match (op, l, r) {
        (CmpOp::Eq, _, _) => Ok(l == r),
        (CmpOp::Ne, _, _) => Ok(l != r),
        (_, Value::Int(a), Value::Int(b)) => Ok(op.holds(a.cmp(b))),
        _ => Err(LogicError::TypeMismatch(format!(
            "`{}` needs integers, got {l} and {r}",
            op.symbol()
        ))),
    }
}

pub(crate) fn hashlock_holds(digest: &Value, secret: &Value) -> Result<bool> {
    match (digest, secret) {
        (Value::Sym(h), Value::Sym(s)) => Ok(sha256_hex(s) == *h),
        _ => Err(LogicError::TypeMismatch(
            "hashlock expects a hex digest and a secret string".into(),
        )),
    }
}

pub(crate) fn tick_arg(v: &Value, pred: &str) -> Result<u64> {
    match v {
        Value::Int(t) if *t >= 0 => Ok(*t as u64),
        Value::Int(_) => Ok(0),
        _ => Err(LogicError::TypeMismatch(format!("{pred} expects a tick count"))),
    }
}

impl Evaluator<'_> {
    fn enter(&mut self, name: &str) -> Result<()> {
        if self.unfolding.iter().any(|n| n == name) {
            return Err(LogicError::StratificationViolation(name.to_owned()));
        }
        self.unfolding.push(name.to_owned());
        Ok(())
    }

    fn formula(&mut self, f: &Formula, env: &mut Env) -> Result<bool> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Cmp(op, l, r) => {
                let l = self.term(l, env)?;
                let r = self.term(r, env)?;
                compare(*op, &l, &r)
            }
            Formula::Atom(p, args) => {
                let values = args
                    .iter()
                    .map(|a| self.term(a, env))
                    .collect::<Result<Vec<_>>>()?;
                self.atom(p, values)
            }
            Formula::Not(inner) => Ok(!self.formula(inner, env)?),
            Formula::And(a, b) => Ok(self.formula(a, env)? && self.formula(b, env)?),
            Formula::Or(a, b) => Ok(self.formula(a, env)? || self.formula(b, env)?),
            Formula::Implies(a, b) => Ok(!self.formula(a, env)? || self.formula(b, env)?),
            Formula::ForAll(v, d, body) | Formula::Exists(v, d, body) => {
                let universal = matches!(f, Formula::ForAll(..));
                for value in self.defs.domain(d)? {
                    env.push((v.clone(), value.clone()));
                    let holds = self.formula(body, env);
                    env.pop();
                    if holds? != universal {
                        return Ok(!universal);
                    }
                }
                Ok(universal)
            }
        }
    }

    fn atom(&mut self, p: &str, args: Vec<Value>) -> Result<bool> {
        if let Some((arity, kind)) = builtin_predicate(p) {
            check_arity(p, arity, args.len())?;
            return match kind {
                BuiltinKind::Pure => hashlock_holds(&args[0], &args[1]),
                BuiltinKind::Clock if p == "before" => {
                    Ok(self.model.clock <= tick_arg(&args[0], p)?)
                }
                BuiltinKind::Clock => Ok(self.model.clock > tick_arg(&args[0], p)?),
                BuiltinKind::Extensional => Ok(self.holds_extensionally(p, args)),
            };
        }
        if let Some(def) = self.defs.predicates.get(p) {
            check_arity(p, def.params.len(), args.len())?;
            self.enter(p)?;
            let mut inner: Env = def.params.iter().cloned().zip(args).collect();
            let result = self.formula(&def.body, &mut inner);
            self.unfolding.pop();
            return result;
        }
        if let Some(&arity) = self.defs.opaque_predicates.get(p) {
            check_arity(p, arity, args.len())?;
            return Ok(self.holds_extensionally(p, args));
        }
        Err(LogicError::UnknownSymbol {
            kind: "predicate",
            name: p.to_owned(),
        })
    }

    fn holds_extensionally(&self, p: &str, args: Vec<Value>) -> bool {
        let atom = GroundAtom::new(p, args);
        self.model.atoms.contains(&atom)
            || self
                .defs
                .facts
                .iter()
                .any(|(fp, fa)| *fp == atom.pred && *fa == atom.args)
    }

    fn term(&mut self, t: &Term, env: &mut Env) -> Result<Value> {
        match t {
            Term::Const(s) => Ok(Value::Sym(s.clone())),
            Term::Int(i) => Ok(Value::Int(*i)),
            Term::Agent(a) => Ok(Value::Sym(a.0.clone())),
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, val)| val.clone())
                .ok_or_else(|| LogicError::NonGround(v.clone())),
            Term::Balance(w) => match self.term(w, env)? {
                Value::Sym(name) => self
                    .model
                    .balances
                    .get(&AgentId(name.clone()))
                    .map(|b| Value::Int(*b))
                    .ok_or(LogicError::UnknownSymbol {
                        kind: "wallet",
                        name,
                    }),
                Value::Int(i) => Err(LogicError::TypeMismatch(format!(
                    "balance of non-wallet {i}"
                ))),
            },
            Term::Arith(op, a, b) => match (self.term(a, env)?, self.term(b, env)?) {
                (Value::Int(x), Value::Int(y)) => op
                    .apply(x, y)
                    .map(Value::Int)
                    .ok_or_else(|| LogicError::TypeMismatch(format!("overflow in {t}"))),
                (x, y) => Err(LogicError::TypeMismatch(format!(
                    "arithmetic on non-integers {x} {} {y}",
                    op.symbol()
                ))),
            },
            Term::App(name, args) => {
                let values = args
                    .iter()
                    .map(|a| self.term(a, env))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(clauses) = self.defs.functions.get(name) {
                    check_arity(name, clauses[0].patterns.len(), values.len())?;
                    let (clause, mut inner) = clauses
                        .iter()
                        .find_map(|c| c.bind(&values).map(|bound| (c, bound)))
                        .ok_or_else(|| LogicError::NoMatchingClause {
                            function: name.clone(),
                            args: join(&values),
                        })?;
                    self.enter(name)?;
                    let result = self.term(&clause.body, &mut inner);
                    self.unfolding.pop();
                    return result;
                }
                if self.defs.opaque_functions.contains_key(name) {
                    return Err(LogicError::Uninterpreted(name.clone()));
                }
                Err(LogicError::UnknownSymbol {
                    kind: "function",
                    name: name.clone(),
                })
            }
        }
    }
}

pub(crate) fn check_arity(name: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(LogicError::ArityMismatch {
            name: name.to_owned(),
            expected,
            found,
        })
    }
}

pub(crate) fn join(values: &[Value]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
