//! Canonical concrete syntax. Output is fully parenthesized and re-parses to
//! an equal AST.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::ast::{Action, AgentKind, Contract, EventKind, Guard, Scenario, Transaction, TIME_ORACLE, TOKEN_ORACLE};
use crate::blocktree::OracleConfig;
use crate::logic::{is_identifier, write_quoted, Formula, Pattern, Term, Value};

struct Printer {
    agents: BTreeSet<String>,
    members: BTreeSet<String>,
    out: String,
}

impl Printer {
    fn new(c: &Contract) -> Self {
        let mut agents: BTreeSet<String> = c.agents.iter().map(|a| a.id.0.clone()).collect();
        agents.insert(TIME_ORACLE.into());
        agents.insert(TOKEN_ORACLE.into());
        let members = c
            .definitions
            .domains
            .values()
            .flatten()
            .filter_map(|v| match v {
                Value::Sym(s) => Some(s.clone()),
                Value::Int(_) => None,
            })
            .collect();
        Printer {
            agents,
            members,
            out: String::new(),
        }
    }

    fn symbol(&mut self, s: &str, bare_ok: bool) {
        if bare_ok && is_identifier(s) {
            self.out.push_str(s);
        } else {
            write_quoted(&mut self.out, s).expect("writing to a String");
        }
    }

    fn value(&mut self, v: &Value) {
        match v {
            Value::Int(i) => write!(self.out, "{i}").unwrap(),
            Value::Sym(s) => self.symbol(s, true),
        }
    }

    fn values(&mut self, vs: &[Value]) {
        for (i, v) in vs.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.value(v);
        }
    }

    fn term(&mut self, t: &Term, bound: &[String]) {
        match t {
            Term::Const(s) => {
                let collides = self.agents.contains(s) || bound.contains(s);
                self.symbol(s, !collides)
            }
            Term::Int(i) => write!(self.out, "{i}").unwrap(),
            Term::Agent(a) => self.out.push_str(a.as_str()),
            Term::Var(v) => self.out.push_str(v),
            Term::Balance(w) => {
                self.out.push('|');
                self.term(w, bound);
                self.out.push('|');
            }
            Term::Arith(op, a, b) => {
                self.out.push('(');
                self.term(a, bound);
                write!(self.out, " {} ", op.symbol()).unwrap();
                self.term(b, bound);
                self.out.push(')');
            }
            Term::App(name, args) => self.app(name, args, bound),
        }
    }

    fn app(&mut self, name: &str, args: &[Term], bound: &[String]) {
        self.out.push_str(name);
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.term(a, bound);
        }
        self.out.push(')');
    }

    fn formula(&mut self, f: &Formula, bound: &mut Vec<String>) {
        match f {
            Formula::True => self.out.push_str("true"),
            Formula::False => self.out.push_str("false"),
            Formula::Atom(p, args) if args.is_empty() => self.out.push_str(p),
            Formula::Atom(p, args) => self.app(p, args, bound),
            Formula::Cmp(op, l, r) => {
                self.term(l, bound);
                write!(self.out, " {} ", op.symbol()).unwrap();
                self.term(r, bound);
            }
            Formula::Not(inner) => {
                self.out.push('!');
                self.formula(inner, bound);
            }
            Formula::And(a, b) => self.binary(a, "&", b, bound),
            Formula::Or(a, b) => self.binary(a, "|", b, bound),
            Formula::Implies(a, b) => self.binary(a, "->", b, bound),
            Formula::ForAll(v, d, body) | Formula::Exists(v, d, body) => {
                let q = if matches!(f, Formula::ForAll(..)) {
                    "forall"
                } else {
                    "exists"
                };
                write!(self.out, "({q} {v} in {d}: ").unwrap();
                bound.push(v.clone());
                self.formula(body, bound);
                bound.pop();
                self.out.push(')');
            }
        }
    }

    fn binary(&mut self, a: &Formula, op: &str, b: &Formula, bound: &mut Vec<String>) {
        self.out.push('(');
        self.formula(a, bound);
        write!(self.out, " {op} ").unwrap();
        self.formula(b, bound);
        self.out.push(')');
    }

    fn closed(&mut self, f: &Formula) {
        self.formula(f, &mut Vec::new());
    }

    fn pattern(&mut self, p: &Pattern) {
        match p {
            Pattern::Var(v) => self.out.push_str(v),
            Pattern::Value(Value::Sym(s)) => {
                let resolves = self.agents.contains(s) || self.members.contains(s);
                self.symbol(s, resolves)
            }
            Pattern::Value(v) => self.value(v),
        }
    }

    fn tx(&mut self, tx: &Transaction) {
        write!(self.out, "tx {} -({})[", tx.source, tx.amount).unwrap();
        match &tx.guard {
            Guard::Closed(g) => self.closed(g),
            Guard::Claimed(c) => {
                write!(self.out, "claim {}: ", c.authority).unwrap();
                self.closed(&c.body);
            }
        }
        write!(self.out, "]-> {}", tx.sink).unwrap();
    }

    fn contract(&mut self, c: &Contract) {
        for a in &c.agents {
            match a.kind {
                AgentKind::Wallet if a.balance != 0 => {
                    writeln!(self.out, "agent {} balance {};", a.id, a.balance).unwrap()
                }
                AgentKind::Wallet => writeln!(self.out, "agent {};", a.id).unwrap(),
                AgentKind::Oracle => writeln!(self.out, "oracle {};", a.id).unwrap(),
            }
        }
        let d = &c.definitions;
        for (name, values) in &d.domains {
            write!(self.out, "domain {name} = {{").unwrap();
            self.values(values);
            self.out.push_str("};\n");
        }
        for (name, arity) in &d.opaque_predicates {
            writeln!(self.out, "declare pred {name}/{arity};").unwrap();
        }
        for (name, arity) in &d.opaque_functions {
            writeln!(self.out, "declare fn {name}/{arity};").unwrap();
        }
        for (name, def) in &d.predicates {
            write!(self.out, "def pred {name}({}) = ", def.params.join(", ")).unwrap();
            self.formula(&def.body, &mut def.params.clone());
            self.out.push_str(";\n");
        }
        for (name, clauses) in &d.functions {
            for clause in clauses {
                write!(self.out, "def fn {name}(").unwrap();
                for (i, p) in clause.patterns.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.pattern(p);
                }
                self.out.push_str(") = ");
                let vars: Vec<String> = clause
                    .patterns
                    .iter()
                    .filter_map(|p| match p {
                        Pattern::Var(v) => Some(v.clone()),
                        Pattern::Value(_) => None,
                    })
                    .collect();
                self.term(&clause.body, &vars);
                self.out.push_str(";\n");
            }
        }
        for constraint in &d.constraints {
            self.out.push_str("constraint ");
            self.closed(constraint);
            self.out.push_str(";\n");
        }
        for (pred, args) in &d.facts {
            write!(self.out, "fact {pred}").unwrap();
            if !args.is_empty() {
                self.out.push('(');
                self.values(args);
                self.out.push(')');
            }
            self.out.push_str(";\n");
        }
        for action in &c.actions {
            if let Action::IssueAfter { deps, .. } = action {
                write!(self.out, "after [{}] ", deps.join(", ")).unwrap();
            }
            write!(self.out, "issue {} = ", action.binding()).unwrap();
            self.tx(action.tx());
            self.out.push_str(";\n");
        }
    }
}

/// Canonical text of a contract.
pub fn pretty_print(c: &Contract) -> String {
    let mut p = Printer::new(c);
    p.contract(c);
    p.out
}

/// Canonical text of a scenario: directives, then the contract, then events.
pub fn pretty_print_scenario(s: &Scenario) -> String {
    let mut p = Printer::new(&s.contract);
    if let Some(name) = &s.name {
        writeln!(p.out, "scenario {name};").unwrap();
    }
    match s.oracle {
        OracleConfig::Prodigal => p.out.push_str("policy prodigal;\n"),
        OracleConfig::Frugal(k) => writeln!(p.out, "policy frugal {k};").unwrap(),
    }
    writeln!(p.out, "seed {};", s.seed).unwrap();
    if let Some(h) = s.horizon {
        writeln!(p.out, "horizon {h};").unwrap();
    }
    p.contract(&s.contract);
    for e in &s.events {
        write!(p.out, "at {}: ", e.tick).unwrap();
        match &e.kind {
            EventKind::Claim(c) => {
                write!(p.out, "claim {}: ", c.authority).unwrap();
                p.closed(&c.body);
            }
            EventKind::Submit { binding, by } => {
                write!(p.out, "submit {binding}").unwrap();
                if let Some(a) = by {
                    write!(p.out, " by {a}").unwrap();
                }
            }
            EventKind::Halt(a) => write!(p.out, "halt {a}").unwrap(),
            EventKind::Tick => p.out.push_str("tick"),
        }
        p.out.push_str(";\n");
    }
    p.out
}

/// Formula text in the context of a contract's agents.
pub fn print_formula(f: &Formula, c: &Contract) -> String {
    let mut p = Printer::new(c);
    p.closed(f);
    p.out
}
