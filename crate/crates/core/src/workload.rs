//! Seeded random workloads: token-oracle append campaigns and random
//! scenarios with conflicting oracle claims.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocktree::{BlockTree, Grant, OracleConfig, Token, TreeError};
use crate::lang::{parse_scenario, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CampaignReport {
    pub blocks: usize,
    pub tokens: usize,
    pub max_children: usize,
    pub single_chain: bool,
    /// Second commits of a consumed token, all refused.
    pub double_spends_refused: usize,
    pub frugal_refusals: usize,
}

/// A random interleaving of token grants, commits (possibly on stale heads),
/// re-commits of spent tokens and refined appends. Errors describe the first
/// violated token-oracle property.
pub fn append_campaign(seed: u64, oracle: OracleConfig, ops: usize) -> Result<CampaignReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree: BlockTree<String> = BlockTree::new(oracle, format!("campaign-{seed}").as_bytes());
    let mut outstanding: Vec<(Token, String)> = Vec::new();
    let mut spent: Vec<(Token, String)> = Vec::new();
    let mut report = CampaignReport::default();
    for op in 0..ops {
        let payload = format!("op{op}");
        match rng.gen_range(0..10) {
            0..=3 => {
                let head = tree.head();
                match tree.get_token(head, &payload, |_, _, _| Ok::<(), ()>(())) {
                    Ok(Grant::Token(t)) => outstanding.push((t, payload)),
                    other => return Err(format!("grant on the selected head failed: {other:?}")),
                }
            }
            4..=7 if !outstanding.is_empty() => {
                let (t, p) = outstanding.swap_remove(rng.gen_range(0..outstanding.len()));
                match tree.commit(&t, p.clone()) {
                    Ok(_) => spent.push((t, p)),
                    Err(TreeError::FrugalLimitReached(_)) => report.frugal_refusals += 1,
                    Err(e) => return Err(format!("commit failed: {e}")),
                }
            }
            8 if !spent.is_empty() => {
                let (t, p) = spent.choose(&mut rng).expect("non-empty").clone();
                match tree.commit(&t, p) {
                    Err(TreeError::AlreadyConsumed(_)) => report.double_spends_refused += 1,
                    other => return Err(format!("token {} consumed twice: {other:?}", t.id)),
                }
            }
            _ => {
                tree.append(payload, |_, _, _| Ok::<(), ()>(()))
                    .map_err(|e| format!("append failed: {e:?}"))?;
            }
        }
    }
    tree.check_invariants()?;
    report.blocks = tree.len();
    report.tokens = tree.tokens_issued();
    report.max_children = tree.max_children();
    report.single_chain = tree.is_single_chain();
    if let Some(k) = oracle.bound() {
        if report.max_children > k {
            return Err(format!("a block has {} children under frugal:{k}", report.max_children));
        }
        if k == 1 && !report.single_chain {
            return Err("frugal:1 tree is not a chain".into());
        }
    }
    Ok(report)
}

/// A random scenario: a handful of wallets, transfers with dependencies,
/// closed and claimed guards, and oracles that endorse statements which
/// may contradict each other under the integrity constraints.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    writeln!(s, "scenario random_{seed};").unwrap();
    match rng.gen_range(0..4) {
        0 => s.push_str("policy prodigal;\n"),
        k => writeln!(s, "policy frugal {k};").unwrap(),
    }
    writeln!(s, "seed {};", rng.gen_range(0..4)).unwrap();
    let wallets = rng.gen_range(2..=5);
    for w in 0..wallets {
        writeln!(s, "agent P{w} balance {};", rng.gen_range(0..=30)).unwrap();
    }
    s.push_str(
        "oracle O0;\noracle O1;\n\
         domain D = {d0, d1, d2};\n\
         declare pred p/1;\n\
         declare fn level/1;\n\
         constraint forall x in D: forall y in D: p(x) & p(y) -> x = y;\n\
         constraint forall x in D: level(x) = 0 | level(x) = 1;\n\
         constraint forall x in D: p(x) -> level(x) = 1;\n",
    );
    let statement = |rng: &mut ChaCha8Rng| {
        let d = rng.gen_range(0..3);
        match rng.gen_range(0..3) {
            0 => format!("p(d{d})"),
            1 => format!("!p(d{d})"),
            _ => format!("level(d{d}) = {}", rng.gen_range(0..2)),
        }
    };
    let mut claims = Vec::new();
    let actions = rng.gen_range(1..=8);
    for i in 0..actions {
        let src = rng.gen_range(0..wallets);
        let dst = (src + rng.gen_range(1..wallets)) % wallets;
        let guard = match rng.gen_range(0..4) {
            0 => "true".to_owned(),
            1 => format!("|P{}| > {}", rng.gen_range(0..wallets), rng.gen_range(0..20)),
            _ => {
                let claim = format!("claim O{}: {}", rng.gen_range(0..2), statement(&mut rng));
                claims.push(claim.clone());
                claim
            }
        };
        let deps: Vec<String> = (0..i)
            .filter(|_| rng.gen_bool(0.25))
            .take(2)
            .map(|d| format!("a{d}"))
            .collect();
        if !deps.is_empty() {
            write!(s, "after [{}] ", deps.join(", ")).unwrap();
        }
        writeln!(s, "issue a{i} = tx P{src} -({})[{guard}]-> P{dst};", rng.gen_range(1..=10)).unwrap();
    }
    for claim in claims {
        if rng.gen_bool(0.8) {
            writeln!(s, "at {}: {claim};", rng.gen_range(0..4)).unwrap();
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        writeln!(s, "at {}: claim O{}: {};", rng.gen_range(0..4), rng.gen_range(0..2), statement(&mut rng)).unwrap();
    }
    parse_scenario(&s).unwrap_or_else(|e| panic!("generated scenario does not parse: {e}\n{s}"))
}
