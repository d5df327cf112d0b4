//! Shared logic oracle: random formula sets over twelve ground atoms and a
//! brute-force evaluator independent of the library's search and checker.

#![allow(dead_code)]

use std::collections::BTreeMap;

use plurality::lang::parse_contract;
use plurality::logic::{
    check_certificate, minimize_conflict, refute, replay, Claim, DefinitionSet, Formula, LogicError,
    RefuteConfig, Term, MINIMALITY_CHECK_LIMIT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn logic_defs() -> DefinitionSet {
    parse_contract(
        "domain D = {a, b}; declare pred q/1;
         declare pred p0/0; declare pred p1/0; declare pred p2/0; declare pred p3/0; declare pred p4/0;
         declare pred p5/0; declare pred p6/0; declare pred p7/0; declare pred p8/0; declare pred p9/0;",
    )
    .expect("base definitions parse")
    .definitions
}

// Test-only two-valued evaluator: formulas are expanded over the universe
// below and evaluated on an assignment bitmask. Shares nothing with the
// search or the replay checker.
const UNIVERSE: [&str; 12] = ["p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "q(a)", "q(b)"];

enum Bool {
    Lit(bool),
    Atom(u32),
    Not(Box<Bool>),
    And(Vec<Bool>),
    Or(Vec<Bool>),
}

impl Bool {
    fn eval(&self, bits: u32) -> bool {
        match self {
            Bool::Lit(b) => *b,
            Bool::Atom(i) => bits >> i & 1 == 1,
            Bool::Not(a) => !a.eval(bits),
            Bool::And(xs) => xs.iter().all(|x| x.eval(bits)),
            Bool::Or(xs) => xs.iter().any(|x| x.eval(bits)),
        }
    }
}

fn expand(f: &Formula, env: &BTreeMap<String, String>) -> Bool {
    let atom = |p: &str, args: &[Term]| {
        let mut name = p.to_owned();
        if !args.is_empty() {
            let args: Vec<String> = args
                .iter()
                .map(|a| match a {
                    Term::Var(x) => env[x].clone(),
                    Term::Const(c) => c.clone(),
                    other => panic!("unexpected term {other}"),
                })
                .collect();
            name = format!("{p}({})", args.join(","));
        }
        let i = UNIVERSE.iter().position(|u| *u == name).expect("atom in universe");
        Bool::Atom(i as u32)
    };
    match f {
        Formula::True => Bool::Lit(true),
        Formula::False => Bool::Lit(false),
        Formula::Atom(p, args) => atom(p, args),
        Formula::Not(a) => Bool::Not(Box::new(expand(a, env))),
        Formula::And(a, b) => Bool::And(vec![expand(a, env), expand(b, env)]),
        Formula::Or(a, b) => Bool::Or(vec![expand(a, env), expand(b, env)]),
        Formula::Implies(a, b) => Bool::Or(vec![Bool::Not(Box::new(expand(a, env))), expand(b, env)]),
        Formula::ForAll(x, _, body) | Formula::Exists(x, _, body) => {
            let parts = ["a", "b"]
                .iter()
                .map(|d| {
                    let mut env = env.clone();
                    env.insert(x.clone(), d.to_string());
                    expand(body, &env)
                })
                .collect();
            if matches!(f, Formula::ForAll(..)) {
                Bool::And(parts)
            } else {
                Bool::Or(parts)
            }
        }
        other => panic!("unexpected formula {other}"),
    }
}

pub fn brute_sat(formulas: &[&Formula]) -> bool {
    let all = Bool::And(formulas.iter().map(|f| expand(f, &BTreeMap::new())).collect());
    (0u32..1 << UNIVERSE.len()).any(|bits| all.eval(bits))
}

pub fn random_formula(rng: &mut ChaCha8Rng, depth: u32, var: Option<&str>) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return match (rng.gen_range(0..10), var) {
            (0, Some(x)) | (1, Some(x)) => Formula::atom("q", vec![Term::var(x)]),
            (2, _) => Formula::atom("q", vec![Term::constant(if rng.gen() { "a" } else { "b" })]),
            _ => Formula::atom(format!("p{}", rng.gen_range(0..10)), vec![]),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1, var);
    match rng.gen_range(0..6) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 if var.is_none() => Formula::forall("x", "D", random_formula(rng, depth - 1, Some("x"))),
        4 => Formula::not(sub(rng)),
        _ if var.is_none() => Formula::exists("x", "D", random_formula(rng, depth - 1, Some("x"))),
        _ => Formula::and(sub(rng), sub(rng)),
    }
}

pub struct LogicCase {
    pub gamma: Vec<Claim>,
    pub defs: DefinitionSet,
    pub candidate: Claim,
}

pub fn logic_case(seed: u64, base: &DefinitionSet) -> LogicCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defs = base.clone();
    for _ in 0..rng.gen_range(0..=2) {
        defs.constraints.push(random_formula(&mut rng, 2, None));
    }
    let gamma = (0..rng.gen_range(0..=6))
        .map(|_| Claim::new(format!("O{}", rng.gen_range(0..3)), random_formula(&mut rng, 3, None)))
        .collect();
    let candidate = Claim::new("O0", random_formula(&mut rng, 3, None));
    LogicCase { gamma, defs, candidate }
}

/// Checks one random case; returns whether it produced a certificate.
pub fn check_logic_case(case: &LogicCase) -> Result<bool, String> {
    let LogicCase { gamma, defs, candidate } = case;
    let constraints = &defs.constraints;
    let config = RefuteConfig::default();
    let mut all: Vec<&Formula> = gamma.iter().map(|c| &c.body).chain(constraints).collect();
    let context_sat = brute_sat(&all);
    all.push(&candidate.body);
    let sat = brute_sat(&all);
    let found = refute(gamma, constraints, candidate, defs, &config).map_err(|e| e.to_string())?;
    ensure!(found.is_some() != sat, "refute says {} but enumeration says sat={sat}", found.is_some());
    let Some(refutation) = found else { return Ok(false) };
    replay(&refutation, candidate, defs).map_err(|e| format!("replay: {e}"))?;
    match minimize_conflict(gamma, constraints, candidate, defs, &config) {
        Err(LogicError::InconsistentContext) => {
            ensure!(!context_sat, "context reported inconsistent but it is satisfiable");
            Ok(false)
        }
        Err(e) => Err(format!("minimize: {e}")),
        Ok(cert) => {
            check_certificate(&cert, defs).map_err(|e| format!("check: {e}"))?;
            ensure!(cert.conflict.len() <= MINIMALITY_CHECK_LIMIT, "conflict too large");
            let core = |skip: Option<usize>| -> Vec<&Formula> {
                cert.conflict
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != skip)
                    .map(|(_, c)| &c.body)
                    .chain(constraints)
                    .chain([&candidate.body])
                    .collect()
            };
            ensure!(!brute_sat(&core(None)), "conflict set does not refute the candidate");
            for i in 0..cert.conflict.len() {
                ensure!(brute_sat(&core(Some(i))), "claim {i} is redundant in the conflict set");
            }
            let without_candidate: Vec<&Formula> = cert.conflict.iter().map(|c| &c.body).chain(constraints).collect();
            ensure!(brute_sat(&without_candidate), "conflict set is inconsistent without the candidate");
            Ok(true)
        }
    }
}

