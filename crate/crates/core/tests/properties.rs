mod common;

use std::collections::{BTreeMap, BTreeSet};

use plurality::blocktree::OracleConfig;
use plurality::lang::{parse_contract, pretty_print, Action, Contract, Guard, Transaction};
use plurality::logic::{
    evaluate, ground_expand, AgentId, ArithOp, Claim, CmpOp, Formula, GroundAtom, Model, Term, Value,
};
use plurality::runtime::{legal_transition, run, EventBody, Stage};
use plurality::validator::compute_state;
use plurality::workload::{append_campaign, random_scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CMP: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

// Untyped formulas for the printer: awkward constants, collisions with agents
// and bound variables, arithmetic, nested quantifiers.
struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
}

impl Gen {
    fn term(&mut self, depth: u32, vars: &[String], opaque: bool) -> Term {
        let pool = ["a", "b", "x y", "A", "forall", "in", "O2", "v0", "", "é"];
        match self.rng.gen_range(0..if depth == 0 { 5 } else { 7 }) {
            0 => Term::constant(pool[self.rng.gen_range(0..pool.len())]),
            1 => Term::Int(self.rng.gen_range(-9..=9)),
            2 => Term::agent(["A", "B", "O"][self.rng.gen_range(0..3)]),
            3 if !vars.is_empty() => Term::var(vars[self.rng.gen_range(0..vars.len())].clone()),
            3 | 4 => Term::balance_of(["A", "B"][self.rng.gen_range(0..2)]),
            5 if opaque => Term::app("f", vec![self.term(depth - 1, vars, opaque)]),
            _ => {
                let op = if self.rng.gen() { ArithOp::Add } else { ArithOp::Sub };
                Term::arith(op, self.term(depth - 1, vars, opaque), self.term(depth - 1, vars, opaque))
            }
        }
    }

    fn formula(&mut self, depth: u32, vars: &mut Vec<String>, opaque: bool) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return match self.rng.gen_range(0..5) {
                0 => [Formula::True, Formula::False][self.rng.gen_range(0..2)].clone(),
                1 => Formula::atom("r", vec![]),
                2 => Formula::atom("p", vec![self.term(2, vars, opaque)]),
                3 => Formula::atom("q", vec![self.term(1, vars, opaque), self.term(1, vars, opaque)]),
                _ => Formula::cmp(CMP[self.rng.gen_range(0..6)], self.term(2, vars, opaque), self.term(2, vars, opaque)),
            };
        }
        match self.rng.gen_range(0..6) {
            0 => Formula::not(self.formula(depth - 1, vars, opaque)),
            1 => Formula::and(self.formula(depth - 1, vars, opaque), self.formula(depth - 1, vars, opaque)),
            2 => Formula::or(self.formula(depth - 1, vars, opaque), self.formula(depth - 1, vars, opaque)),
            3 => Formula::implies(self.formula(depth - 1, vars, opaque), self.formula(depth - 1, vars, opaque)),
            _ => {
                let v = format!("v{}", self.fresh);
                self.fresh += 1;
                vars.push(v.clone());
                let body = self.formula(depth - 1, vars, opaque);
                vars.pop();
                if self.rng.gen() {
                    Formula::forall(v, "D", body)
                } else {
                    Formula::exists(v, "D", body)
                }
            }
        }
    }
}

fn random_contract(seed: u64) -> Contract {
    let mut c = parse_contract(
        r#"agent A balance 5; agent B; oracle O;
           domain D = {a, 1, "x y"};
           declare pred p/1; declare pred q/2; declare pred r/0; declare fn f/1;"#,
    )
    .unwrap();
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        fresh: 0,
    };
    for i in 0..g.rng.gen_range(1..4) {
        let claimed = g.rng.gen();
        let body = g.formula(6, &mut Vec::new(), claimed);
        let guard = if claimed {
            Guard::Claimed(Claim::new("O", body))
        } else {
            Guard::Closed(body)
        };
        c.actions.push(Action::Issue {
            binding: format!("t{i}"),
            tx: Transaction {
                source: AgentId::new("A"),
                amount: g.rng.gen_range(1..10),
                guard,
                sink: AgentId::new("B"),
            },
        });
    }
    if g.rng.gen() {
        let constraint = g.formula(4, &mut Vec::new(), true);
        c.definitions.constraints.push(constraint);
    }
    c
}

// Well-typed formulas for grounding: integer terms, symbol comparisons and
// defined predicates and functions over finite domains.
const TYPED_DEFS: &str = "agent A balance 3; agent B balance 7;
    domain N = {0, 1, 2}; domain S = {a, b};
    declare pred p/1;
    def fn inc(x) = (x + 1);
    def fn pick(a) = 2;
    def fn pick(b) = 0;
    def pred big(x) = x > 1;
    def pred some_p(s) = exists n in N: p(n) & s = a;";

fn typed_int(rng: &mut ChaCha8Rng, depth: u32, ints: &[String], syms: &[String]) -> Term {
    match rng.gen_range(0..if depth == 0 { 3 } else { 6 }) {
        0 => Term::Int(rng.gen_range(-3..=3)),
        1 if !ints.is_empty() => Term::var(ints[rng.gen_range(0..ints.len())].clone()),
        1 | 2 => Term::balance_of(["A", "B"][rng.gen_range(0..2)]),
        3 => Term::app("inc", vec![typed_int(rng, depth - 1, ints, syms)]),
        4 => Term::app("pick", vec![typed_sym(rng, syms)]),
        _ => Term::arith(
            if rng.gen() { ArithOp::Add } else { ArithOp::Sub },
            typed_int(rng, depth - 1, ints, syms),
            typed_int(rng, depth - 1, ints, syms),
        ),
    }
}

fn typed_sym(rng: &mut ChaCha8Rng, syms: &[String]) -> Term {
    if !syms.is_empty() && rng.gen() {
        Term::var(syms[rng.gen_range(0..syms.len())].clone())
    } else {
        Term::constant(["a", "b"][rng.gen_range(0..2)])
    }
}

fn typed_formula(rng: &mut ChaCha8Rng, depth: u32, ints: &mut Vec<String>, syms: &mut Vec<String>) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 => Formula::cmp(CMP[rng.gen_range(0..6)], typed_int(rng, 2, ints, syms), typed_int(rng, 2, ints, syms)),
            1 => Formula::cmp(CmpOp::Eq, typed_sym(rng, syms), typed_sym(rng, syms)),
            2 => Formula::atom("p", vec![typed_int(rng, 1, ints, syms)]),
            3 => Formula::atom("big", vec![typed_int(rng, 1, ints, syms)]),
            _ => Formula::atom("some_p", vec![typed_sym(rng, syms)]),
        };
    }
    let sub = |rng: &mut ChaCha8Rng, ints: &mut Vec<String>, syms: &mut Vec<String>| {
        typed_formula(rng, depth - 1, ints, syms)
    };
    match rng.gen_range(0..6) {
        0 => Formula::not(sub(rng, ints, syms)),
        1 => Formula::and(sub(rng, ints, syms), sub(rng, ints, syms)),
        2 => Formula::or(sub(rng, ints, syms), sub(rng, ints, syms)),
        3 => Formula::implies(sub(rng, ints, syms), sub(rng, ints, syms)),
        k => {
            let (scope, domain) = if k == 4 { (&mut *ints, "N") } else { (&mut *syms, "S") };
            let v = format!("v{}", scope.len());
            let v = if domain == "S" { format!("s{v}") } else { v };
            scope.push(v.clone());
            let body = typed_formula(rng, depth - 1, ints, syms);
            let f = if rng.gen() {
                Formula::forall(v, domain, body)
            } else {
                Formula::exists(v, domain, body)
            };
            if k == 4 { ints.pop() } else { syms.pop() };
            f
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_contracts_parse_back_equal(seed in any::<u64>()) {
        let c = random_contract(seed);
        let text = pretty_print(&c);
        let back = parse_contract(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &c, "{}", text);
        prop_assert_eq!(pretty_print(&back), text);
    }

    #[test]
    fn grounding_preserves_truth(seed in any::<u64>(), a in -2i64..6, b in -2i64..6, facts in proptest::collection::vec(-1i64..4, 0..4)) {
        let c = parse_contract(TYPED_DEFS).unwrap();
        let defs = &c.definitions;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = typed_formula(&mut rng, 5, &mut Vec::new(), &mut Vec::new());
        let mut model = Model::default().with_balance("A", a).with_balance("B", b);
        for n in facts {
            model.atoms.insert(GroundAtom::new("p", vec![Value::Int(n)]));
        }
        let direct = evaluate(&f, &model, defs);
        let grounded = ground_expand(&f, defs).and_then(|g| {
            prop_assert_no_quantifiers(&g);
            evaluate(&g, &model, defs)
        });
        prop_assert_eq!(direct, grounded, "{}", f);
    }

    #[test]
    fn refute_agrees_with_enumeration(seed in any::<u64>()) {
        let case = common::logic_case(seed, &common::logic_defs());
        common::check_logic_case(&case).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn frugal_oracle_bounds_children(seed in any::<u64>(), k in 1usize..4, ops in 1usize..80) {
        let r = append_campaign(seed, OracleConfig::Frugal(k), ops).map_err(TestCaseError::fail)?;
        prop_assert!(r.max_children <= k);
        prop_assert!(k > 1 || r.single_chain);
    }
}

fn prop_assert_no_quantifiers(f: &Formula) {
    match f {
        Formula::ForAll(..) | Formula::Exists(..) => panic!("quantifier left after grounding: {f}"),
        Formula::Not(a) => prop_assert_no_quantifiers(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            prop_assert_no_quantifiers(a);
            prop_assert_no_quantifiers(b);
        }
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn runs_conserve_value_on_every_chain(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let out = run(&s);
        let initial: i64 = s.contract.wallets().map(|a| a.balance).sum();
        for block in out.tree.blocks() {
            let state = compute_state(&out.tree, &block.id, &s.contract, 0).unwrap();
            prop_assert_eq!(state.balances.values().sum::<i64>(), initial);
        }
    }

    #[test]
    fn stages_only_move_forward(seed in any::<u64>()) {
        let t = run(&random_scenario(seed)).trace;
        let mut stage: BTreeMap<&str, Stage> = t.actions.iter().map(|a| (a.binding.as_str(), Stage::Pending)).collect();
        for e in &t.events {
            let next = match &e.body {
                EventBody::SubmitAction { .. } => Stage::Submitted,
                EventBody::Validated { .. } => Stage::Validated,
                EventBody::AppendCommitted { .. } => Stage::Published,
                EventBody::Rejection { .. } => Stage::Rejected,
                _ => continue,
            };
            let b = e.body.binding().unwrap();
            prop_assert!(legal_transition(stage[b], next), "{}: {:?} -> {:?}", b, stage[b], next);
            stage.insert(b, next);
        }
        for a in &t.actions {
            prop_assert_eq!(stage[a.binding.as_str()], a.stage);
        }
    }

    #[test]
    fn dependencies_precede_dependents_on_each_chain(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let out = run(&s);
        for leaf in out.tree.leaves() {
            let mut seen = BTreeSet::new();
            for id in out.tree.chain_to(&leaf.id).unwrap() {
                let Some(p) = out.tree.block(&id).and_then(|b| b.payload.as_ref()) else { continue };
                for d in &p.deps {
                    prop_assert!(seen.contains(d), "{} published before {}", p.binding, d);
                }
                prop_assert!(seen.insert(p.binding.clone()), "{} published twice", p.binding);
            }
        }
    }

    #[test]
    fn frugal_one_runs_stay_on_one_chain(seed in any::<u64>()) {
        let mut s = random_scenario(seed);
        s.oracle = OracleConfig::Frugal(1);
        let out = run(&s);
        prop_assert!(out.tree.is_single_chain());
        prop_assert_eq!(out.trace.leaves.len(), 1);
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), run_seed in 0u64..8) {
        let mut s = random_scenario(seed);
        s.seed = run_seed;
        prop_assert_eq!(run(&s).trace.to_json(), run(&s).trace.to_json());
    }
}

#[test]
fn typed_formulas_mostly_evaluate() {
    let c = parse_contract(TYPED_DEFS).unwrap();
    let model = Model::default().with_balance("A", 3).with_balance("B", 7);
    let ok = (0..200)
        .filter(|&seed| {
            let f = typed_formula(&mut ChaCha8Rng::seed_from_u64(seed), 5, &mut Vec::new(), &mut Vec::new());
            evaluate(&f, &model, &c.definitions).is_ok()
        })
        .count();
    assert!(ok > 190, "only {ok} of 200 evaluate");
}
