use std::collections::{BTreeMap, BTreeSet};

use super::ast::{
    Action, Agent, AgentKind, Contract, EventKind, Guard, Scenario, ScriptedEvent, Transaction,
    TIME_ORACLE, TOKEN_ORACLE,
};
use super::error::{LangError, LangErrorKind};
use super::lexer::{lex, Tok, Token};
use crate::blocktree::OracleConfig;
use crate::logic::{
    is_keyword, AgentId, ArithOp, Claim, CmpOp, FunctionClause, Formula, Pattern, PredicateDef,
    Term, Value,
};

type PResult<T> = Result<T, LangError>;

/// Parses a contract file. Scenario directives (`at`, `policy`, ...) are
/// rejected.
pub fn parse_contract(src: &str) -> PResult<Contract> {
    let mut p = Parser::new(src)?;
    p.contract_only = true;
    p.file()?;
    Ok(p.finish()?.contract)
}

/// Parses a scenario file: a contract plus oracle policy, seed, horizon and
/// scripted events.
pub fn parse_scenario(src: &str) -> PResult<Scenario> {
    let mut p = Parser::new(src)?;
    p.file()?;
    p.finish()
}

/// Parses a standalone formula; identifiers in `agents` resolve to agents.
pub fn parse_formula(src: &str, agents: &[&str]) -> PResult<Formula> {
    let mut p = Parser::new(src)?;
    p.agents = agents
        .iter()
        .map(|a| (a.to_string(), AgentKind::Wallet))
        .collect();
    let f = p.formula(&mut Vec::new())?;
    p.expect(Tok::Eof)?;
    Ok(f)
}

#[derive(Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

enum Pending {
    Guard(Pos, String),
    EventClaim(Pos, usize),
    Submit(Pos, String),
    Def(Pos, DefItem),
}

enum DefItem {
    Pred(String),
    Clause(String, usize),
    Constraint(usize),
    Fact(usize),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    contract_only: bool,
    /// Every declared agent and oracle, gathered before parsing so that
    /// identifier resolution does not depend on declaration order.
    agents: BTreeMap<String, AgentKind>,
    domain_members: BTreeSet<String>,
    scenario: Scenario,
    seen_bindings: BTreeSet<String>,
    declared: BTreeSet<String>,
    pending: Vec<Pending>,
    first_def: Option<Pos>,
}

fn cmp_op(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Eq => CmpOp::Eq,
        Tok::Ne => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return None,
    })
}

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        let toks = lex(src)?;
        let mut agents = BTreeMap::new();
        let mut domain_members = BTreeSet::new();
        for (i, t) in toks.iter().enumerate() {
            let Tok::Ident(kw) = &t.tok else { continue };
            match kw.as_str() {
                "agent" | "oracle" => {
                    if let Some(Token {
                        tok: Tok::Ident(name),
                        ..
                    }) = toks.get(i + 1)
                    {
                        let kind = if kw == "agent" {
                            AgentKind::Wallet
                        } else {
                            AgentKind::Oracle
                        };
                        agents.entry(name.clone()).or_insert(kind);
                    }
                }
                "domain" => {
                    let members = toks[i + 1..]
                        .iter()
                        .skip_while(|t| t.tok != Tok::LBrace)
                        .take_while(|t| t.tok != Tok::RBrace && t.tok != Tok::Semi);
                    for m in members {
                        match &m.tok {
                            Tok::Ident(s) | Tok::Str(s) => {
                                domain_members.insert(s.clone());
                            }
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(Parser {
            toks,
            pos: 0,
            contract_only: false,
            agents,
            domain_members,
            scenario: Scenario::new(Contract::default()),
            seen_bindings: BTreeSet::new(),
            declared: BTreeSet::new(),
            pending: Vec::new(),
            first_def: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> Pos {
        let t = &self.toks[self.pos];
        Pos {
            line: t.line,
            col: t.col,
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, pos: Pos, kind: LangErrorKind) -> LangError {
        LangError::new(pos.line, pos.col, kind)
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(self.err_at(self.here(), LangErrorKind::Syntax(msg.into())))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.syntax(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            let wanted = if t == Tok::Eof {
                "end of input".to_string()
            } else {
                t.describe()
            };
            self.unexpected(&wanted)
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    /// A non-keyword identifier.
    fn name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) => self.syntax(format!("`{s}` is a keyword")),
            _ => self.unexpected("an identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn natural(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(i as u64)
            }
            _ => self.unexpected("a non-negative integer"),
        }
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Sym(s))
            }
            Tok::Int(_) | Tok::Minus => Ok(Value::Int(self.int()?)),
            _ => Ok(Value::Sym(self.name()?)),
        }
    }

    fn list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if *self.peek() == close {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                self.expect(close)?;
                return Ok(out);
            }
        }
    }

    fn declared_agent(&self, pos: Pos, name: &str) -> PResult<()> {
        if self.agents.contains_key(name) {
            Ok(())
        } else {
            Err(self.err_at(pos, LangErrorKind::UnknownAgent(name.into())))
        }
    }

    fn authority(&mut self) -> PResult<String> {
        let pos = self.here();
        let a = self.name()?;
        if a == TOKEN_ORACLE {
            return Err(self.err_at(pos, LangErrorKind::Reserved(a)));
        }
        if a != TIME_ORACLE {
            self.declared_agent(pos, &a)?;
        }
        Ok(a)
    }

    fn bind_var(&self, pos: Pos, v: &str) -> PResult<()> {
        if self.agents.contains_key(v) || v == TIME_ORACLE || v == TOKEN_ORACLE {
            return Err(self.err_at(
                pos,
                LangErrorKind::Syntax(format!("variable `{v}` shadows an agent")),
            ));
        }
        Ok(())
    }

    fn file(&mut self) -> PResult<()> {
        while *self.peek() != Tok::Eof {
            self.item()?;
        }
        Ok(())
    }

    fn scenario_directive(&self, pos: Pos, kw: &str) -> PResult<()> {
        if self.contract_only {
            Err(self.err_at(pos, LangErrorKind::ScenarioDirective(kw.into())))
        } else {
            Ok(())
        }
    }

    fn declare_name(&mut self, pos: Pos, name: &str) -> PResult<()> {
        if !self.declared.insert(name.to_owned()) {
            return Err(self.err_at(pos, LangErrorKind::DuplicateDeclaration(name.into())));
        }
        Ok(())
    }

    fn item(&mut self) -> PResult<()> {
        let pos = self.here();
        let kw = match self.peek() {
            Tok::Ident(s) if is_keyword(s) => s.clone(),
            _ => return self.unexpected("a declaration, action or directive"),
        };
        self.bump();
        match kw.as_str() {
            "agent" | "oracle" => {
                let name_pos = self.here();
                let name = self.name()?;
                if name == TOKEN_ORACLE || name == TIME_ORACLE {
                    return Err(self.err_at(name_pos, LangErrorKind::Reserved(name)));
                }
                if self.scenario.contract.agent(&name).is_some() {
                    return Err(self.err_at(name_pos, LangErrorKind::DuplicateAgent(name)));
                }
                let agent = if kw == "agent" {
                    let balance = if self.is_kw("balance") {
                        self.bump();
                        self.int()?
                    } else {
                        0
                    };
                    if balance < 0 {
                        return Err(self.err_at(
                            name_pos,
                            LangErrorKind::Syntax(format!("negative initial balance for `{name}`")),
                        ));
                    }
                    Agent::wallet(&name, balance)
                } else {
                    Agent::oracle(&name)
                };
                self.scenario.contract.agents.push(agent);
            }
            "domain" => {
                let name = self.name()?;
                self.declare_name(pos, &format!("domain {name}"))?;
                self.expect(Tok::Eq)?;
                self.expect(Tok::LBrace)?;
                let values = self.list(Tok::RBrace, Self::value)?;
                self.scenario.contract.definitions.domains.insert(name, values);
            }
            "declare" => {
                let is_pred = self.is_kw("pred");
                if !is_pred && !self.is_kw("fn") {
                    return self.unexpected("`pred` or `fn`");
                }
                self.bump();
                let name = self.name()?;
                self.declare_name(pos, &name)?;
                self.expect(Tok::Slash)?;
                let arity = self.natural()? as usize;
                let defs = &mut self.scenario.contract.definitions;
                if is_pred {
                    defs.opaque_predicates.insert(name, arity);
                } else {
                    defs.opaque_functions.insert(name, arity);
                }
            }
            "def" => {
                self.first_def.get_or_insert(pos);
                if self.is_kw("pred") {
                    self.bump();
                    let name = self.name()?;
                    self.declare_name(pos, &name)?;
                    self.expect(Tok::LParen)?;
                    let mut params = Vec::new();
                    for v in self.list(Tok::RParen, Self::name)? {
                        self.bind_var(pos, &v)?;
                        params.push(v);
                    }
                    self.expect(Tok::Eq)?;
                    let body = self.formula(&mut params.clone())?;
                    self.scenario
                        .contract
                        .definitions
                        .predicates
                        .insert(name.clone(), PredicateDef { params, body });
                    self.pending.push(Pending::Def(pos, DefItem::Pred(name)));
                } else if self.is_kw("fn") {
                    self.bump();
                    let name = self.name()?;
                    let is_new = !self.scenario.contract.definitions.functions.contains_key(&name);
                    if is_new {
                        self.declare_name(pos, &name)?;
                    }
                    self.expect(Tok::LParen)?;
                    let patterns = self.list(Tok::RParen, Self::pattern)?;
                    let mut bound = Vec::new();
                    for p in &patterns {
                        if let Pattern::Var(v) = p {
                            self.bind_var(pos, v)?;
                            bound.push(v.clone());
                        }
                    }
                    self.expect(Tok::Eq)?;
                    let body = self.term(&bound)?;
                    let clauses = self
                        .scenario
                        .contract
                        .definitions
                        .functions
                        .entry(name.clone())
                        .or_default();
                    clauses.push(FunctionClause { patterns, body });
                    let idx = clauses.len() - 1;
                    self.pending.push(Pending::Def(pos, DefItem::Clause(name, idx)));
                } else {
                    return self.unexpected("`pred` or `fn`");
                }
            }
            "constraint" => {
                self.first_def.get_or_insert(pos);
                let c = self.formula(&mut Vec::new())?;
                let defs = &mut self.scenario.contract.definitions;
                defs.constraints.push(c);
                let idx = defs.constraints.len() - 1;
                self.pending.push(Pending::Def(pos, DefItem::Constraint(idx)));
            }
            "fact" => {
                let pred = self.name()?;
                let args = if *self.peek() == Tok::LParen {
                    self.bump();
                    self.list(Tok::RParen, Self::value)?
                } else {
                    Vec::new()
                };
                let defs = &mut self.scenario.contract.definitions;
                defs.facts.push((pred, args));
                let idx = defs.facts.len() - 1;
                self.pending.push(Pending::Def(pos, DefItem::Fact(idx)));
            }
            "issue" => {
                let action = self.issue(pos, Vec::new())?;
                self.scenario.contract.actions.push(action);
            }
            "after" => {
                self.expect(Tok::LBracket)?;
                let deps = self.list(Tok::RBracket, Self::name)?;
                self.expect_kw("issue")?;
                let action = self.issue(pos, deps)?;
                self.scenario.contract.actions.push(action);
            }
            "scenario" => {
                self.scenario_directive(pos, &kw)?;
                self.scenario.name = Some(self.name()?);
            }
            "policy" => {
                self.scenario_directive(pos, &kw)?;
                self.scenario.oracle = if self.is_kw("prodigal") {
                    self.bump();
                    OracleConfig::Prodigal
                } else if self.is_kw("frugal") {
                    self.bump();
                    let k_pos = self.here();
                    let k = self.natural()?;
                    if k == 0 {
                        return Err(self.err_at(
                            k_pos,
                            LangErrorKind::Syntax("frugal bound must be at least 1".into()),
                        ));
                    }
                    OracleConfig::Frugal(k as usize)
                } else {
                    return self.unexpected("`prodigal` or `frugal`");
                };
            }
            "seed" => {
                self.scenario_directive(pos, &kw)?;
                self.scenario.seed = self.natural()?;
            }
            "horizon" => {
                self.scenario_directive(pos, &kw)?;
                self.scenario.horizon = Some(self.natural()?);
            }
            "at" => {
                self.scenario_directive(pos, &kw)?;
                let tick = self.natural()?;
                self.expect(Tok::Colon)?;
                let kind = self.event()?;
                self.scenario.events.push(ScriptedEvent { tick, kind });
            }
            other => {
                return Err(self.err_at(
                    pos,
                    LangErrorKind::Syntax(format!("unexpected keyword `{other}`")),
                ))
            }
        }
        self.expect(Tok::Semi)
    }

    fn event(&mut self) -> PResult<EventKind> {
        let pos = self.here();
        let kind = match self.peek().clone() {
            Tok::Ident(k) => k,
            _ => return self.unexpected("an event"),
        };
        self.bump();
        Ok(match kind.as_str() {
            "claim" => {
                let authority = self.authority()?;
                self.expect(Tok::Colon)?;
                let body = self.formula(&mut Vec::new())?;
                self.pending
                    .push(Pending::EventClaim(pos, self.scenario.events.len()));
                EventKind::Claim(Claim::new(authority, body))
            }
            "submit" => {
                let binding = self.name()?;
                self.pending.push(Pending::Submit(pos, binding.clone()));
                let by = if self.is_kw("by") {
                    self.bump();
                    let p = self.here();
                    let a = self.name()?;
                    self.declared_agent(p, &a)?;
                    Some(AgentId::new(a))
                } else {
                    None
                };
                EventKind::Submit { binding, by }
            }
            "halt" => {
                let p = self.here();
                let a = self.name()?;
                self.declared_agent(p, &a)?;
                EventKind::Halt(AgentId::new(a))
            }
            "tick" => EventKind::Tick,
            other => return Err(self.err_at(pos, LangErrorKind::UnknownEventKind(other.into()))),
        })
    }

    fn issue(&mut self, pos: Pos, deps: Vec<String>) -> PResult<Action> {
        let binding_pos = self.here();
        let binding = self.name()?;
        for dep in &deps {
            if !self.seen_bindings.contains(dep) {
                return Err(self.err_at(
                    pos,
                    LangErrorKind::ForwardDependency {
                        binding,
                        dep: dep.clone(),
                    },
                ));
            }
        }
        if !self.seen_bindings.insert(binding.clone()) {
            return Err(self.err_at(binding_pos, LangErrorKind::DuplicateBinding(binding)));
        }
        self.expect(Tok::Eq)?;
        self.expect_kw("tx")?;
        let src_pos = self.here();
        let source = self.name()?;
        self.expect(Tok::Minus)?;
        self.expect(Tok::LParen)?;
        let amount_pos = self.here();
        let amount = self.int()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBracket)?;
        let guard = if self.is_kw("claim") {
            self.bump();
            let authority = self.authority()?;
            self.expect(Tok::Colon)?;
            Guard::Claimed(Claim::new(authority, self.formula(&mut Vec::new())?))
        } else {
            Guard::Closed(self.formula(&mut Vec::new())?)
        };
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Arrow)?;
        let sink_pos = self.here();
        let sink = self.name()?;
        for (p, a) in [(src_pos, &source), (sink_pos, &sink)] {
            match self.agents.get(a.as_str()) {
                None => return Err(self.err_at(p, LangErrorKind::UnknownAgent(a.clone()))),
                Some(AgentKind::Oracle) => {
                    return Err(self.err_at(p, LangErrorKind::OracleTransfer(binding)))
                }
                Some(AgentKind::Wallet) => {}
            }
        }
        if source == sink {
            return Err(self.err_at(sink_pos, LangErrorKind::SelfTransfer(binding)));
        }
        if amount <= 0 {
            return Err(self.err_at(amount_pos, LangErrorKind::NonPositiveAmount(binding)));
        }
        self.pending.push(Pending::Guard(pos, binding.clone()));
        let tx = Transaction {
            source: AgentId::new(source),
            amount,
            guard,
            sink: AgentId::new(sink),
        };
        Ok(if deps.is_empty() {
            Action::Issue { binding, tx }
        } else {
            Action::IssueAfter { deps, binding, tx }
        })
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                if self.agents.contains_key(&s) || self.domain_members.contains(&s) {
                    Ok(Pattern::Value(Value::Sym(s)))
                } else {
                    Ok(Pattern::Var(s))
                }
            }
            _ => Ok(Pattern::Value(self.value()?)),
        }
    }

    fn resolve(&self, name: String, bound: &[String]) -> Term {
        if bound.contains(&name) {
            Term::Var(name)
        } else if self.agents.contains_key(&name) || name == TIME_ORACLE || name == TOKEN_ORACLE {
            Term::Agent(AgentId(name))
        } else {
            Term::Const(name)
        }
    }

    fn term(&mut self, bound: &[String]) -> PResult<Term> {
        let mut lhs = self.term_primary(bound)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term_primary(bound)?;
            lhs = Term::arith(op, lhs, rhs);
        }
    }

    fn term_primary(&mut self, bound: &[String]) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Minus => Ok(Term::Int(self.int()?)),
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Const(s))
            }
            Tok::Bar => {
                self.bump();
                let inner = self.term(bound)?;
                self.expect(Tok::Bar)?;
                Ok(Term::Balance(Box::new(inner)))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term(bound)?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(_) => {
                let name = self.name()?;
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.list(Tok::RParen, |p| p.term(bound))?;
                    Ok(Term::App(name, args))
                } else {
                    Ok(self.resolve(name, bound))
                }
            }
            _ => self.unexpected("a term"),
        }
    }

    fn formula(&mut self, bound: &mut Vec<String>) -> PResult<Formula> {
        let lhs = self.disjunction(bound)?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula(bound)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self, bound: &mut Vec<String>) -> PResult<Formula> {
        let mut lhs = self.conjunction(bound)?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.conjunction(bound)?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self, bound: &mut Vec<String>) -> PResult<Formula> {
        let mut lhs = self.unary(bound)?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary(bound)?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self, bound: &mut Vec<String>) -> PResult<Formula> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary(bound)?));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            let universal = self.is_kw("forall");
            self.bump();
            let pos = self.here();
            let var = self.name()?;
            self.bind_var(pos, &var)?;
            self.expect_kw("in")?;
            let domain = self.name()?;
            self.expect(Tok::Colon)?;
            bound.push(var.clone());
            let body = self.formula(bound);
            bound.pop();
            let body = body?;
            return Ok(if universal {
                Formula::forall(var, domain, body)
            } else {
                Formula::exists(var, domain, body)
            });
        }
        self.primary(bound)
    }

    fn primary(&mut self, bound: &mut Vec<String>) -> PResult<Formula> {
        if self.is_kw("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Formula::False);
        }
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            self.bump();
            if let Ok(f) = self.formula(bound) {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    let continues_term =
                        cmp_op(self.peek()).is_some() || matches!(self.peek(), Tok::Plus | Tok::Minus);
                    if !continues_term {
                        return Ok(f);
                    }
                }
            }
            self.pos = save;
        }
        let start = self.pos;
        let lhs = self.term(bound)?;
        if let Some(op) = cmp_op(self.peek()) {
            self.bump();
            let rhs = self.term(bound)?;
            return Ok(Formula::Cmp(op, lhs, rhs));
        }
        let from_identifier = matches!(self.toks[start].tok, Tok::Ident(_));
        match lhs {
            Term::App(name, args) if from_identifier => Ok(Formula::Atom(name, args)),
            Term::Const(name) | Term::Var(name) | Term::Agent(AgentId(name))
                if from_identifier && self.pos == start + 1 =>
            {
                Ok(Formula::Atom(name, Vec::new()))
            }
            _ => self.unexpected("a comparison operator"),
        }
    }

    /// Name resolution and well-formedness checks that need the whole file.
    fn finish(mut self) -> PResult<Scenario> {
        let pending = std::mem::take(&mut self.pending);
        let s = &self.scenario;
        let defs = &s.contract.definitions;
        let err = |pos: Pos, kind: LangErrorKind| LangError::new(pos.line, pos.col, kind);
        let logic = |pos: Pos| move |e| err(pos, LangErrorKind::Definition(e));
        for item in &pending {
            match item {
                Pending::Def(pos, DefItem::Pred(name)) => {
                    let def = &defs.predicates[name];
                    defs.check_formula(&def.body, &def.params).map_err(logic(*pos))?;
                }
                Pending::Def(pos, DefItem::Clause(name, idx)) => {
                    let clause = &defs.functions[name][*idx];
                    let vars: Vec<String> = clause
                        .patterns
                        .iter()
                        .filter_map(|p| match p {
                            Pattern::Var(v) => Some(v.clone()),
                            Pattern::Value(_) => None,
                        })
                        .collect();
                    defs.check_term(&clause.body, &vars).map_err(logic(*pos))?;
                }
                Pending::Def(pos, DefItem::Constraint(idx)) => {
                    defs.check_formula(&defs.constraints[*idx], &[]).map_err(logic(*pos))?;
                }
                Pending::Def(pos, DefItem::Fact(idx)) => {
                    let (pred, args) = &defs.facts[*idx];
                    let f = Formula::atom(pred.clone(), args.iter().map(Value::to_term).collect());
                    defs.check_formula(&f, &[]).map_err(logic(*pos))?;
                }
                Pending::Guard(pos, binding) => {
                    let action = s.contract.action(binding).expect("parsed action");
                    match &action.tx().guard {
                        Guard::Closed(g) => {
                            defs.check_formula(g, &[]).map_err(logic(*pos))?;
                            if defs.mentions_opaque_function(g) {
                                return Err(err(
                                    *pos,
                                    LangErrorKind::OpaqueInClosedGuard(binding.clone()),
                                ));
                            }
                        }
                        Guard::Claimed(c) => defs.check_formula(&c.body, &[]).map_err(logic(*pos))?,
                    }
                }
                Pending::EventClaim(pos, idx) => {
                    if let EventKind::Claim(c) = &s.events[*idx].kind {
                        defs.check_formula(&c.body, &[]).map_err(logic(*pos))?;
                    }
                }
                Pending::Submit(pos, binding) => {
                    if s.contract.action(binding).is_none() {
                        return Err(err(*pos, LangErrorKind::UnknownBinding(binding.clone())));
                    }
                }
            }
        }
        let pos = self.first_def.unwrap_or(Pos { line: 1, col: 1 });
        defs.check().map_err(logic(pos))?;
        Ok(self.scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAIR: &str = "
        agent F balance 50; agent W; agent A; agent B;
        issue x = tx F -(50)[true]-> W;
        after [x] issue y = tx W -(20)[true]-> A;
        after [x] issue z = tx W -(20)[true]-> B;
    ";

    fn kind(src: &str) -> LangErrorKind {
        parse_scenario(src).unwrap_err().kind
    }

    #[test]
    fn fair_pocket_money_has_three_actions() {
        let c = parse_contract(FAIR).unwrap();
        assert_eq!(c.actions.len(), 3);
        assert_eq!(c.actions[1].deps(), ["x".to_string()]);
        assert_eq!(c.agent("F").unwrap().balance, 50);
    }

    #[test]
    fn declarations_only() {
        let c = parse_contract("agent A; oracle O;").unwrap();
        assert!(c.actions.is_empty());
        assert_eq!(c.agents.len(), 2);
    }

    #[test]
    fn self_transfer_is_rejected() {
        assert_eq!(
            kind("agent A balance 5; issue x = tx A -(5)[true]-> A;"),
            LangErrorKind::SelfTransfer("x".into())
        );
    }

    #[test]
    fn binding_errors() {
        assert_eq!(
            kind("agent A; agent B; issue x = tx A -(1)[true]-> B; issue x = tx A -(1)[true]-> B;"),
            LangErrorKind::DuplicateBinding("x".into())
        );
        assert_eq!(
            kind("agent A; agent B; after [y] issue x = tx A -(1)[true]-> B; issue y = tx A -(1)[true]-> B;"),
            LangErrorKind::ForwardDependency {
                binding: "x".into(),
                dep: "y".into()
            }
        );
        assert_eq!(
            kind("agent A; issue x = tx A -(1)[true]-> C;"),
            LangErrorKind::UnknownAgent("C".into())
        );
        assert_eq!(
            kind("agent A; agent B; issue x = tx A -(0)[true]-> B;"),
            LangErrorKind::NonPositiveAmount("x".into())
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_scenario("agent A;\nagent B;\nissue x = tx A -(1)[true] B;").unwrap_err();
        assert!(matches!(e.kind, LangErrorKind::Syntax(_)));
        assert_eq!((e.line, e.col), (3, 27));
    }

    #[test]
    fn scenario_events() {
        let s = parse_scenario(
            "scenario demo; agent A balance 1; agent B; oracle O; declare pred ok/1;
             issue x = tx A -(1)[claim O: ok(A)]-> B;
             policy frugal 2; seed 7; horizon 9;
             at 0: claim O: ok(A); at 1: submit x by A; at 2: halt B; at 3: tick;",
        )
        .unwrap();
        assert_eq!(s.events.len(), 4);
        assert_eq!(s.oracle, OracleConfig::Frugal(2));
        assert_eq!((s.seed, s.horizon), (7, Some(9)));
        assert_eq!(kind("at 1: dance;"), LangErrorKind::UnknownEventKind("dance".into()));
        assert_eq!(
            kind("agent A; at 1: submit nope;"),
            LangErrorKind::UnknownBinding("nope".into())
        );
        assert_eq!(
            parse_contract("seed 1;").unwrap_err().kind,
            LangErrorKind::ScenarioDirective("seed".into())
        );
    }

    #[test]
    fn formula_precedence_and_resolution() {
        let f = parse_formula("!p & q | r -> s -> t", &[]).unwrap();
        let a = |n: &str| Formula::atom(n, vec![]);
        assert_eq!(
            f,
            Formula::implies(
                Formula::or(Formula::and(Formula::not(a("p")), a("q")), a("r")),
                Formula::implies(a("s"), a("t"))
            )
        );
        let g = parse_formula("forall x in D: rank(C, x) = 1 & |A| >= \"A\"", &["A"]).unwrap();
        let Formula::ForAll(_, _, body) = g else { panic!() };
        assert_eq!(
            *body,
            Formula::and(
                Formula::cmp(CmpOp::Eq, Term::app("rank", vec![Term::constant("C"), Term::var("x")]), Term::Int(1)),
                Formula::cmp(CmpOp::Ge, Term::balance_of("A"), Term::constant("A")),
            )
        );
    }

    #[test]
    fn parenthesized_terms_and_formulas() {
        let f = parse_formula("((|S| - 1) > 10)", &["S"]).unwrap();
        assert_eq!(
            f,
            Formula::cmp(
                CmpOp::Gt,
                Term::arith(ArithOp::Sub, Term::balance_of("S"), Term::Int(1)),
                Term::Int(10)
            )
        );
        assert_eq!(parse_formula("a =< -3", &[]).unwrap(), Formula::cmp(CmpOp::Le, Term::constant("a"), Term::Int(-3)));
    }

    #[test]
    fn closed_guards_must_be_computable() {
        assert_eq!(
            kind("agent A balance 1; agent B; declare fn rank/2; issue x = tx A -(1)[rank(C, A) = 1]-> B;"),
            LangErrorKind::OpaqueInClosedGuard("x".into())
        );
        assert!(matches!(
            kind("agent A balance 1; agent B; issue x = tx A -(1)[nope(A)]-> B;"),
            LangErrorKind::Definition(_)
        ));
    }
}
