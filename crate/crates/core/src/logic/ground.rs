//! Definition and quantifier elimination.

use super::defs::{builtin_predicate, DefinitionSet, Pattern};
use super::error::{LogicError, Result};
use super::eval::check_arity;
use super::formula::Formula;
use super::term::{Term, Value};

/// Rewrites `f` into an equivalent quantifier-free formula with every defined
/// predicate and function unfolded. Quantifiers become left-nested
/// conjunctions/disjunctions over their domain (empty domains give `True` for
/// `forall` and `False` for `exists`).
pub fn ground_expand(f: &Formula, defs: &DefinitionSet) -> Result<Formula> {
    Expander {
        defs,
        unfolding: Vec::new(),
    }
    .formula(f)
}

struct Expander<'a> {
    defs: &'a DefinitionSet,
    unfolding: Vec<String>,
}

fn static_value(t: &Term) -> Option<Value> {
    match t {
        Term::Const(s) => Some(Value::Sym(s.clone())),
        Term::Agent(a) => Some(Value::Sym(a.0.clone())),
        Term::Int(i) => Some(Value::Int(*i)),
        _ => None,
    }
}

impl Expander<'_> {
    fn enter(&mut self, name: &str) -> Result<()> {
        if self.unfolding.iter().any(|n| n == name) {
            return Err(LogicError::StratificationViolation(name.to_owned()));
        }
        self.unfolding.push(name.to_owned());
        Ok(())
    }

    fn formula(&mut self, f: &Formula) -> Result<Formula> {
        Ok(match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Cmp(op, l, r) => Formula::Cmp(*op, self.term(l)?, self.term(r)?),
            Formula::Atom(p, args) => {
                let args = args
                    .iter()
                    .map(|a| self.term(a))
                    .collect::<Result<Vec<_>>>()?;
                if let Some((arity, _)) = builtin_predicate(p) {
                    check_arity(p, arity, args.len())?;
                    Formula::Atom(p.clone(), args)
                } else if let Some(def) = self.defs.predicates.get(p) {
                    check_arity(p, def.params.len(), args.len())?;
                    let body = def
                        .params
                        .iter()
                        .zip(&args)
                        .fold(def.body.clone(), |body, (param, arg)| {
                            body.substitute(param, arg)
                        });
                    self.enter(p)?;
                    let out = self.formula(&body);
                    self.unfolding.pop();
                    out?
                } else if let Some(&arity) = self.defs.opaque_predicates.get(p) {
                    check_arity(p, arity, args.len())?;
                    Formula::Atom(p.clone(), args)
                } else {
                    return Err(LogicError::UnknownSymbol {
                        kind: "predicate",
                        name: p.clone(),
                    });
                }
            }
            Formula::Not(inner) => Formula::not(self.formula(inner)?),
            Formula::And(a, b) => Formula::and(self.formula(a)?, self.formula(b)?),
            Formula::Or(a, b) => Formula::or(self.formula(a)?, self.formula(b)?),
            Formula::Implies(a, b) => Formula::implies(self.formula(a)?, self.formula(b)?),
            Formula::ForAll(v, d, body) | Formula::Exists(v, d, body) => {
                let instances = self
                    .defs
                    .domain(d)?
                    .iter()
                    .map(|value| self.formula(&body.substitute(v, &value.to_term())))
                    .collect::<Result<Vec<_>>>()?;
                if matches!(f, Formula::ForAll(..)) {
                    Formula::conjunction(instances)
                } else {
                    Formula::disjunction(instances)
                }
            }
        })
    }

    fn term(&mut self, t: &Term) -> Result<Term> {
        match t {
            Term::Var(v) => Err(LogicError::NonGround(v.clone())),
            Term::Const(_) | Term::Int(_) | Term::Agent(_) => Ok(t.clone()),
            Term::Balance(w) => Ok(Term::Balance(Box::new(self.term(w)?))),
            Term::Arith(op, a, b) => match (self.term(a)?, self.term(b)?) {
                (Term::Int(x), Term::Int(y)) => op
                    .apply(x, y)
                    .map(Term::Int)
                    .ok_or_else(|| LogicError::TypeMismatch(format!("overflow in {t}"))),
                (a, b) => Ok(Term::arith(*op, a, b)),
            },
            Term::App(name, args) => {
                let args = args
                    .iter()
                    .map(|a| self.term(a))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(clauses) = self.defs.functions.get(name) {
                    check_arity(name, clauses[0].patterns.len(), args.len())?;
                    let statics: Vec<Option<Value>> = args.iter().map(static_value).collect();
                    let mut chosen = None;
                    for clause in clauses {
                        let mut matches = true;
                        for (p, s) in clause.patterns.iter().zip(&statics) {
                            match (p, s) {
                                (Pattern::Var(_), _) => {}
                                (Pattern::Value(v), Some(a)) if v == a => {}
                                (Pattern::Value(_), Some(_)) => {
                                    matches = false;
                                    break;
                                }
                                (Pattern::Value(_), None) => {
                                    return Err(LogicError::NonStaticMatch(name.clone()))
                                }
                            }
                        }
                        if matches {
                            chosen = Some(clause);
                            break;
                        }
                    }
                    let clause = chosen.ok_or_else(|| LogicError::NoMatchingClause {
                        function: name.clone(),
                        args: args.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
                    })?;
                    let body = clause
                        .patterns
                        .iter()
                        .zip(&args)
                        .fold(clause.body.clone(), |body, (p, arg)| match p {
                            Pattern::Var(v) => body.substitute(v, arg),
                            Pattern::Value(_) => body,
                        });
                    self.enter(name)?;
                    let out = self.term(&body);
                    self.unfolding.pop();
                    out
                } else if let Some(&arity) = self.defs.opaque_functions.get(name) {
                    check_arity(name, arity, args.len())?;
                    Ok(Term::App(name.clone(), args))
                } else {
                    Err(LogicError::UnknownSymbol {
                        kind: "function",
                        name: name.clone(),
                    })
                }
            }
        }
    }
}
