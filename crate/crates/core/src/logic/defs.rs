use std::collections::{BTreeMap, BTreeSet};

use super::error::{LogicError, Result};
use super::formula::Formula;
use super::term::{Term, Value};

/// How a built-in predicate obtains its truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// Decided from its arguments alone.
    Pure,
    /// Depends on the time oracle's clock.
    Clock,
    /// Looked up in the chain's published atoms.
    Extensional,
}

pub const BUILTIN_PREDICATES: &[(&str, usize, BuiltinKind)] = &[
    ("hashlock", 2, BuiltinKind::Pure),
    ("before", 1, BuiltinKind::Clock),
    ("expired", 1, BuiltinKind::Clock),
    ("updates", 3, BuiltinKind::Extensional),
    ("published", 1, BuiltinKind::Extensional),
];

pub fn builtin_predicate(name: &str) -> Option<(usize, BuiltinKind)> {
    BUILTIN_PREDICATES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, arity, kind)| (arity, kind))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub params: Vec<String>,
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pattern {
    Var(String),
    Value(Value),
}

/// One equation `f(p1, .., pn) = body`; clauses are tried in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionClause {
    pub patterns: Vec<Pattern>,
    pub body: Term,
}

impl FunctionClause {
    pub(crate) fn bind(&self, args: &[Value]) -> Option<Vec<(String, Value)>> {
        let mut env = Vec::new();
        for (p, a) in self.patterns.iter().zip(args) {
            match p {
                Pattern::Var(v) => env.push((v.clone(), a.clone())),
                Pattern::Value(expected) if expected == a => {}
                Pattern::Value(_) => return None,
            }
        }
        Some(env)
    }
}

/// Domains, definitions, declarations and integrity constraints of a contract.
///
/// Defined predicates and functions must form an acyclic dependency graph;
/// `check` enforces that together with name resolution and arities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefinitionSet {
    pub domains: BTreeMap<String, Vec<Value>>,
    pub predicates: BTreeMap<String, PredicateDef>,
    pub functions: BTreeMap<String, Vec<FunctionClause>>,
    /// Declared predicates without a definition. Closed-world during guard
    /// evaluation, unknown during refutation.
    pub opaque_predicates: BTreeMap<String, usize>,
    /// Declared uninterpreted functions; usable in claims only.
    pub opaque_functions: BTreeMap<String, usize>,
    pub constraints: Vec<Formula>,
    /// Ground atoms asserted at genesis.
    pub facts: Vec<(String, Vec<Value>)>,
}

impl DefinitionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_domain(mut self, name: &str, elems: impl IntoIterator<Item = Value>) -> Self {
        self.domains.insert(name.to_owned(), elems.into_iter().collect());
        self
    }

    pub fn with_predicate(mut self, name: &str, params: &[&str], body: Formula) -> Self {
        self.predicates.insert(
            name.to_owned(),
            PredicateDef {
                params: params.iter().map(|s| s.to_string()).collect(),
                body,
            },
        );
        self
    }

    pub fn with_function_clause(mut self, name: &str, patterns: Vec<Pattern>, body: Term) -> Self {
        self.functions
            .entry(name.to_owned())
            .or_default()
            .push(FunctionClause { patterns, body });
        self
    }

    pub fn with_opaque_predicate(mut self, name: &str, arity: usize) -> Self {
        self.opaque_predicates.insert(name.to_owned(), arity);
        self
    }

    pub fn with_opaque_function(mut self, name: &str, arity: usize) -> Self {
        self.opaque_functions.insert(name.to_owned(), arity);
        self
    }

    pub fn with_constraint(mut self, c: Formula) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn domain(&self, name: &str) -> Result<&[Value]> {
        self.domains
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| LogicError::UnknownSymbol {
                kind: "domain",
                name: name.to_owned(),
            })
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        if let Some(clauses) = self.functions.get(name) {
            return clauses.first().map(|c| c.patterns.len());
        }
        self.opaque_functions.get(name).copied()
    }

    pub fn predicate_arity(&self, name: &str) -> Option<usize> {
        if let Some((arity, _)) = builtin_predicate(name) {
            return Some(arity);
        }
        if let Some(def) = self.predicates.get(name) {
            return Some(def.params.len());
        }
        self.opaque_predicates.get(name).copied()
    }

    /// Resolves every name, checks arities and closedness, and rejects
    /// recursive definitions.
    pub fn check(&self) -> Result<()> {
        for name in self
            .predicates
            .keys()
            .chain(self.opaque_predicates.keys())
        {
            if builtin_predicate(name).is_some() {
                return Err(LogicError::Reserved(name.clone()));
            }
        }
        for (name, clauses) in &self.functions {
            let arity = clauses[0].patterns.len();
            for c in clauses {
                if c.patterns.len() != arity {
                    return Err(LogicError::ArityMismatch {
                        name: name.clone(),
                        expected: arity,
                        found: c.patterns.len(),
                    });
                }
                let bound: Vec<String> = c
                    .patterns
                    .iter()
                    .filter_map(|p| match p {
                        Pattern::Var(v) => Some(v.clone()),
                        Pattern::Value(_) => None,
                    })
                    .collect();
                self.check_term(&c.body, &bound)?;
            }
        }
        for def in self.predicates.values() {
            self.check_formula(&def.body, &def.params)?;
        }
        for c in &self.constraints {
            self.check_formula(c, &[])?;
        }
        for (pred, args) in &self.facts {
            self.check_arity_pred(pred, args.len())?;
        }
        self.check_stratified()
    }

    fn check_arity_pred(&self, name: &str, found: usize) -> Result<()> {
        match self.predicate_arity(name) {
            None => Err(LogicError::UnknownSymbol {
                kind: "predicate",
                name: name.to_owned(),
            }),
            Some(expected) if expected != found => Err(LogicError::ArityMismatch {
                name: name.to_owned(),
                expected,
                found,
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn check_formula(&self, f: &Formula, bound: &[String]) -> Result<()> {
        match f {
            Formula::True | Formula::False => Ok(()),
            Formula::Atom(p, args) => {
                self.check_arity_pred(p, args.len())?;
                args.iter().try_for_each(|a| self.check_term(a, bound))
            }
            Formula::Cmp(_, l, r) => {
                self.check_term(l, bound)?;
                self.check_term(r, bound)
            }
            Formula::Not(f) => self.check_formula(f, bound),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                self.check_formula(a, bound)?;
                self.check_formula(b, bound)
            }
            Formula::ForAll(v, d, body) | Formula::Exists(v, d, body) => {
                self.domain(d)?;
                let mut inner = bound.to_vec();
                inner.push(v.clone());
                self.check_formula(body, &inner)
            }
        }
    }

    pub fn check_term(&self, t: &Term, bound: &[String]) -> Result<()> {
        match t {
            Term::Var(v) if bound.contains(v) => Ok(()),
            Term::Var(v) => Err(LogicError::NonGround(v.clone())),
            Term::Balance(inner) => self.check_term(inner, bound),
            Term::Arith(_, a, b) => {
                self.check_term(a, bound)?;
                self.check_term(b, bound)
            }
            Term::App(name, args) => {
                match self.function_arity(name) {
                    None => {
                        return Err(LogicError::UnknownSymbol {
                            kind: "function",
                            name: name.clone(),
                        })
                    }
                    Some(expected) if expected != args.len() => {
                        return Err(LogicError::ArityMismatch {
                            name: name.clone(),
                            expected,
                            found: args.len(),
                        })
                    }
                    Some(_) => {}
                }
                args.iter().try_for_each(|a| self.check_term(a, bound))
            }
            Term::Const(_) | Term::Int(_) | Term::Agent(_) => Ok(()),
        }
    }

    fn dependencies(&self, name: &str) -> BTreeSet<String> {
        let mut out = self.dependencies_all(name);
        out.retain(|n| self.predicates.contains_key(n) || self.functions.contains_key(n));
        out
    }

    fn check_stratified(&self) -> Result<()> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit(
            defs: &DefinitionSet,
            name: &str,
            marks: &mut BTreeMap<String, Mark>,
        ) -> Result<()> {
            match marks.get(name) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => {
                    return Err(LogicError::StratificationViolation(name.to_owned()))
                }
                None => {}
            }
            marks.insert(name.to_owned(), Mark::Active);
            for dep in defs.dependencies(name) {
                visit(defs, &dep, marks)?;
            }
            marks.insert(name.to_owned(), Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for name in self.predicates.keys().chain(self.functions.keys()) {
            visit(self, name, &mut marks)?;
        }
        Ok(())
    }

    /// True when `f` (transitively through definitions) mentions an
    /// uninterpreted function.
    pub fn mentions_opaque_function(&self, f: &Formula) -> bool {
        let mut refs = BTreeSet::new();
        formula_refs(f, &mut refs);
        let mut seen = BTreeSet::new();
        let mut stack: Vec<String> = refs.into_iter().collect();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if self.opaque_functions.contains_key(&n) {
                return true;
            }
            stack.extend(self.dependencies_all(&n));
        }
        false
    }

    fn dependencies_all(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(def) = self.predicates.get(name) {
            formula_refs(&def.body, &mut out);
        }
        if let Some(clauses) = self.functions.get(name) {
            for c in clauses {
                term_refs(&c.body, &mut out);
            }
        }
        out
    }
}

fn formula_refs(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom(p, args) => {
            out.insert(p.clone());
            args.iter().for_each(|a| term_refs(a, out));
        }
        Formula::Cmp(_, l, r) => {
            term_refs(l, out);
            term_refs(r, out);
        }
        Formula::Not(f) | Formula::ForAll(_, _, f) | Formula::Exists(_, _, f) => {
            formula_refs(f, out)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            formula_refs(a, out);
            formula_refs(b, out);
        }
    }
}

fn term_refs(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::App(n, args) => {
            out.insert(n.clone());
            args.iter().for_each(|a| term_refs(a, out));
        }
        Term::Balance(inner) => term_refs(inner, out),
        Term::Arith(_, a, b) => {
            term_refs(a, out);
            term_refs(b, out);
        }
        _ => {}
    }
}
