//! The validation mechanism: append conditions, closed-guard evaluation and
//! proof-of-discord for claimed guards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blocktree::{BlockId, BlockTree, Payload, TreeError};
use crate::lang::{Action, Contract, Guard, Transaction, TOKEN_ORACLE};
use crate::logic::{
    evaluate, minimize_conflict, refute, AgentId, Claim, ClaimOrigin, DefinitionSet,
    DiscordCertificate, Formula, GroundAtom, LogicError, Model, RefuteConfig, Term, Value,
};

/// `[Theta] valid(guard) -> [source] updates(source, q, sink)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountForm {
    /// The guard the token oracle vouches for.
    pub guard: Guard,
    /// `[source] updates(source, q, sink)`.
    pub transfer: Claim,
}

impl fmt::Display for AccountForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let guard = match &self.guard {
            Guard::Closed(g) => g.to_string(),
            Guard::Claimed(c) => c.to_string(),
        };
        write!(f, "[{TOKEN_ORACLE}] valid({guard}) -> {}", self.transfer)
    }
}

pub fn updates_atom(t: &Transaction) -> Formula {
    Formula::atom(
        "updates",
        vec![
            Term::Agent(t.source.clone()),
            Term::Int(t.amount),
            Term::Agent(t.sink.clone()),
        ],
    )
}

/// The logical form of a transaction.
pub fn account(t: &Transaction) -> AccountForm {
    AccountForm {
        guard: t.guard.clone(),
        transfer: Claim::new(t.source.as_str(), updates_atom(t)),
    }
}

/// A submitted action as it travels through validation and into a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionFormula {
    pub binding: String,
    pub deps: Vec<String>,
    pub transaction: Transaction,
    pub account: AccountForm,
}

impl TransactionFormula {
    pub fn new(action: &Action) -> Self {
        TransactionFormula {
            binding: action.binding().to_owned(),
            deps: action.deps().to_vec(),
            transaction: action.tx().clone(),
            account: account(action.tx()),
        }
    }

    /// Claims this transaction adds to the claim store once published in
    /// `block`: the guard endorsement (if any), then the transfer claim.
    pub fn claims(&self, block: BlockId) -> Vec<Claim> {
        let origin = ClaimOrigin::Block(block.to_hex());
        let mut out = Vec::new();
        if let Guard::Claimed(c) = &self.transaction.guard {
            out.push(c.clone().with_origin(origin.clone()));
        }
        out.push(self.account.transfer.clone().with_origin(origin));
        out
    }
}

impl Payload for TransactionFormula {
    fn canonical_bytes(&self) -> Vec<u8> {
        format!(
            "{}\u{0}{:?}\u{0}{:?}",
            self.binding, self.deps, self.transaction
        )
        .into_bytes()
    }
}

pub type Tree = BlockTree<TransactionFormula>;

/// State of one chain: balances, published bindings and atoms, claim store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub balances: BTreeMap<AgentId, i64>,
    pub published: BTreeSet<String>,
    pub atoms: BTreeSet<GroundAtom>,
    pub claims: Vec<Claim>,
    pub clock: u64,
}

impl ChainState {
    pub fn model(&self) -> Model {
        Model {
            balances: self.balances.clone(),
            atoms: self.atoms.clone(),
            claims: self.claims.clone(),
            clock: self.clock,
        }
    }

    pub fn balance(&self, agent: &str) -> i64 {
        self.balances.get(&AgentId::new(agent)).copied().unwrap_or(0)
    }
}

/// Folds initial balances through every transfer on the chain ending at
/// `head`.
pub fn compute_state(tree: &Tree, head: &BlockId, contract: &Contract, clock: u64) -> Result<ChainState, TreeError> {
    let mut state = ChainState {
        balances: contract
            .wallets()
            .map(|a| (a.id.clone(), a.balance))
            .collect(),
        published: BTreeSet::new(),
        atoms: BTreeSet::new(),
        claims: Vec::new(),
        clock,
    };
    for id in tree.chain_to(head)? {
        let Some(p) = tree.block(&id).and_then(|b| b.payload.as_ref()) else {
            continue;
        };
        let t = &p.transaction;
        *state.balances.entry(t.source.clone()).or_default() -= t.amount;
        *state.balances.entry(t.sink.clone()).or_default() += t.amount;
        state.published.insert(p.binding.clone());
        state.atoms.insert(GroundAtom::new(
            "updates",
            vec![
                Value::sym(t.source.as_str()),
                Value::Int(t.amount),
                Value::sym(t.sink.as_str()),
            ],
        ));
        state
            .atoms
            .insert(GroundAtom::new("published", vec![Value::sym(p.binding.as_str())]));
        state.claims.extend(p.claims(id));
    }
    Ok(state)
}

/// Why an action did not reach the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    DuplicateBinding,
    MissingDependency { dep: String },
    InsufficientBalance { available: i64, required: i64 },
    NonPositiveAmount,
    GuardFalse,
    /// A discord certificate was delivered to the conflict sink.
    Discord,
    EvaluationError { message: String },
    WrongSubmitter { submitter: String },
    RetryExhausted,
    TokenConsumed,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::DuplicateBinding => f.write_str("binding already published"),
            Rejection::MissingDependency { dep } => write!(f, "dependency {dep} not published"),
            Rejection::InsufficientBalance {
                available,
                required,
            } => write!(f, "insufficient balance: {available} < {required}"),
            Rejection::NonPositiveAmount => f.write_str("amount must be positive"),
            Rejection::GuardFalse => f.write_str("guard is false"),
            Rejection::Discord => f.write_str("claim is in discord with the chain"),
            Rejection::EvaluationError { message } => write!(f, "evaluation error: {message}"),
            Rejection::WrongSubmitter { submitter } => {
                write!(f, "submitted by {submitter}, who is not the source")
            }
            Rejection::RetryExhausted => f.write_str("no token after repeated retries"),
            Rejection::TokenConsumed => f.write_str("token already consumed"),
        }
    }
}

/// Individually switchable append conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppChecks {
    pub unused_binding: bool,
    pub deps_published: bool,
    pub sufficient_balance: bool,
    pub positive_amount: bool,
}

impl Default for AppChecks {
    fn default() -> Self {
        AppChecks {
            unused_binding: true,
            deps_published: true,
            sufficient_balance: true,
            positive_amount: true,
        }
    }
}

/// Append conditions of the host chain.
pub fn p_app(b_l: &TransactionFormula, state: &ChainState, checks: &AppChecks) -> Result<(), Rejection> {
    if checks.unused_binding && state.published.contains(&b_l.binding) {
        return Err(Rejection::DuplicateBinding);
    }
    if checks.deps_published {
        if let Some(dep) = b_l.deps.iter().find(|d| !state.published.contains(*d)) {
            return Err(Rejection::MissingDependency { dep: dep.clone() });
        }
    }
    let t = &b_l.transaction;
    if checks.positive_amount && t.amount <= 0 {
        return Err(Rejection::NonPositiveAmount);
    }
    let available = state.balance(t.source.as_str());
    if checks.sufficient_balance && available < t.amount {
        return Err(Rejection::InsufficientBalance {
            available,
            required: t.amount,
        });
    }
    Ok(())
}

/// Closed-guard check: evaluates `gd` in the chain's model (closed world).
pub fn p_gd(gd: &Formula, state: &ChainState, defs: &DefinitionSet) -> Result<bool, LogicError> {
    evaluate(gd, &state.model(), defs)
}

/// Claim store of the chain ending at `b_h` plus the contract's integrity
/// constraints.
pub fn make_context(b_h: &BlockId, tree: &Tree, defs: &DefinitionSet) -> Result<(Vec<Claim>, Vec<Formula>), TreeError> {
    let mut claims = Vec::new();
    for id in tree.chain_to(b_h)? {
        if let Some(p) = tree.block(&id).and_then(|b| b.payload.as_ref()) {
            claims.extend(p.claims(id));
        }
    }
    Ok((claims, defs.constraints.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum PodOutcome {
    Valid,
    Discord(DiscordCertificate),
}

fn discord(gamma: &[Claim], constraints: &[Formula], candidate: &Claim, defs: &DefinitionSet, config: &RefuteConfig) -> Result<PodOutcome, LogicError> {
    Ok(match refute(gamma, constraints, candidate, defs, config)? {
        None => PodOutcome::Valid,
        Some(_) => PodOutcome::Discord(minimize_conflict(gamma, constraints, candidate, defs, config)?),
    })
}

/// Proof-of-discord for a claimed guard against the claim store at `b_h`.
pub fn pod(b_l: &TransactionFormula, b_h: &BlockId, tree: &Tree, defs: &DefinitionSet, config: &RefuteConfig) -> Result<PodOutcome, PodError> {
    let Guard::Claimed(claim) = &b_l.transaction.guard else {
        return Err(PodError::NotClaimed);
    };
    let (gamma, constraints) = make_context(b_h, tree, defs)?;
    Ok(discord(&gamma, &constraints, claim, defs, config)?)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PodError {
    #[error("guard is not a claim")]
    NotClaimed,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// The conflict manager hook.
pub trait ConflictSink {
    fn deliver(&mut self, certificate: DiscordCertificate);
}

impl ConflictSink for Vec<DiscordCertificate> {
    fn deliver(&mut self, certificate: DiscordCertificate) {
        self.push(certificate);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validator {
    pub checks: AppChecks,
    pub refute: RefuteConfig,
    /// Also check the transfer claim `[source] updates(..)` for discord, so
    /// everything a block adds to the claim store is consistent with it.
    pub transfer_claims: bool,
}

impl Default for Validator {
    fn default() -> Self {
        Validator {
            checks: AppChecks::default(),
            refute: RefuteConfig::default(),
            transfer_claims: true,
        }
    }
}

impl Validator {
    /// Append conditions first, then the guard: closed guards are evaluated,
    /// claimed guards go through proof-of-discord. A discord certificate is
    /// handed to `sink` and the block is refused.
    pub fn validate(
        &self,
        b_l: &TransactionFormula,
        b_h: &BlockId,
        tree: &Tree,
        contract: &Contract,
        clock: u64,
        sink: &mut dyn ConflictSink,
    ) -> Result<(), Rejection> {
        let defs = &contract.definitions;
        let err = |e: &dyn fmt::Display| Rejection::EvaluationError {
            message: e.to_string(),
        };
        let state = compute_state(tree, b_h, contract, clock).map_err(|e| err(&e))?;
        p_app(b_l, &state, &self.checks)?;
        let (gamma, constraints) = make_context(b_h, tree, defs).map_err(|e| err(&e))?;
        let mut store = gamma;
        match &b_l.transaction.guard {
            Guard::Closed(g) => {
                if !p_gd(g, &state, defs).map_err(|e| err(&e))? {
                    return Err(Rejection::GuardFalse);
                }
            }
            Guard::Claimed(claim) => {
                match discord(&store, &constraints, claim, defs, &self.refute).map_err(|e| err(&e))? {
                    PodOutcome::Valid => {}
                    PodOutcome::Discord(cert) => {
                        sink.deliver(cert);
                        return Err(Rejection::Discord);
                    }
                }
                store.push(claim.clone());
            }
        }
        if self.transfer_claims {
            let transfer = &b_l.account.transfer;
            match discord(&store, &constraints, transfer, defs, &self.refute).map_err(|e| err(&e))? {
                PodOutcome::Valid => {}
                PodOutcome::Discord(cert) => {
                    sink.deliver(cert);
                    return Err(Rejection::Discord);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocktree::{Grant, OracleConfig};
    use crate::lang::parse_contract;

    const COMPETITIVE_V2: &str = "
        agent F balance 50; agent W; agent A; agent B; oracle OmegaS;
        declare fn rank/2; domain Students = {A, B};
        constraint forall x in Students: forall y in Students:
            rank(C, x) = 1 & rank(C, y) = 1 -> x = y;
        issue x = tx F -(50)[true]-> W;
        after [x] issue a = tx W -(20)[claim OmegaS: rank(C, A) = 1]-> A;
        after [x] issue b = tx W -(20)[claim OmegaS: rank(C, B) = 1]-> B;
    ";

    fn publish(tree: &mut Tree, contract: &Contract, binding: &str) -> Result<BlockId, Rejection> {
        let b_l = TransactionFormula::new(contract.action(binding).unwrap());
        let v = Validator::default();
        let mut sink = Vec::new();
        let head = tree.head();
        let grant = tree
            .get_token(head, &b_l, |b, h, t| v.validate(b, &h, t, contract, 0, &mut sink))
            .unwrap();
        match grant {
            Grant::Token(tok) => Ok(tree.commit(&tok, b_l).unwrap()),
            Grant::Refused(r) => Err(r),
        }
    }

    #[test]
    fn account_form_text() {
        let c = parse_contract("agent A balance 9; agent B; issue x = tx A -(5)[|B| < 2]-> B;").unwrap();
        let form = account(c.actions[0].tx());
        assert_eq!(form.to_string(), "[Theta] valid(|B| < 2) -> [A] updates(A, 5, B)");
        let c = parse_contract("agent A balance 9; agent B; issue x = tx A -(5)[true]-> B;").unwrap();
        assert_eq!(account(c.actions[0].tx()).to_string(), "[Theta] valid(true) -> [A] updates(A, 5, B)");
    }

    #[test]
    fn fair_state_fold() {
        let c = parse_contract(
            "agent F balance 50; agent W; agent A; agent B;
             issue x = tx F -(50)[true]-> W;
             after [x] issue y = tx W -(20)[true]-> A;
             after [x] issue z = tx W -(20)[true]-> B;",
        )
        .unwrap();
        let mut tree = Tree::new(OracleConfig::default(), b"fair");
        let genesis = compute_state(&tree, &tree.genesis(), &c, 0).unwrap();
        assert_eq!([genesis.balance("F"), genesis.balance("W")], [50, 0]);
        for b in ["x", "y", "z"] {
            publish(&mut tree, &c, b).unwrap();
        }
        let s = compute_state(&tree, &tree.head(), &c, 0).unwrap();
        // 50-50 | 0+50-20-20 | 0+20 | 0+20
        assert_eq!(
            ["F", "W", "A", "B"].map(|a| s.balance(a)),
            [0, 10, 20, 20]
        );
    }

    #[test]
    fn append_conditions() {
        let c = parse_contract(
            "agent W balance 10; agent A; agent F balance 50;
             issue x = tx F -(50)[true]-> W;
             after [x] issue y = tx W -(20)[true]-> A;",
        )
        .unwrap();
        let tree = Tree::new(OracleConfig::default(), b"app");
        let state = compute_state(&tree, &tree.genesis(), &c, 0).unwrap();
        let y = TransactionFormula::new(c.action("y").unwrap());
        let mut checks = AppChecks::default();
        assert_eq!(
            p_app(&y, &state, &checks),
            Err(Rejection::MissingDependency { dep: "x".into() })
        );
        checks.deps_published = false;
        assert_eq!(
            p_app(&y, &state, &checks),
            Err(Rejection::InsufficientBalance {
                available: 10,
                required: 20
            })
        );
        let mut published = state.clone();
        published.published.insert("y".into());
        assert_eq!(p_app(&y, &published, &checks), Err(Rejection::DuplicateBinding));
    }

    #[test]
    fn competitive_v2_second_rank_claim_is_discordant() {
        let c = parse_contract(COMPETITIVE_V2).unwrap();
        let mut tree = Tree::new(OracleConfig::default(), b"comp");
        publish(&mut tree, &c, "x").unwrap();
        let a = publish(&mut tree, &c, "a").unwrap();
        let (gamma, _) = make_context(&a, &tree, &c.definitions).unwrap();
        assert!(gamma.iter().any(|g| g.authority.as_str() == "OmegaS"));
        let b = TransactionFormula::new(c.action("b").unwrap());
        let out = pod(&b, &a, &tree, &c.definitions, &RefuteConfig::default()).unwrap();
        let PodOutcome::Discord(cert) = out else { panic!("expected discord") };
        assert_eq!(cert.conflict.len(), 1);
        assert_eq!(cert.conflict[0].origin, ClaimOrigin::Block(a.to_hex()));
        assert_eq!(cert.accountable(), vec!["OmegaS"]);
        assert_eq!(cert.refutation.used_constraints, c.definitions.constraints);
        assert_eq!(publish(&mut tree, &c, "b"), Err(Rejection::Discord));
    }

    #[test]
    fn sibling_branches_do_not_share_claims() {
        let c = parse_contract(COMPETITIVE_V2).unwrap();
        let mut tree = Tree::new(OracleConfig::Prodigal, b"fork");
        let x = publish(&mut tree, &c, "x").unwrap();
        let v = Validator::default();
        let mut grants = Vec::new();
        for binding in ["a", "b"] {
            let b_l = TransactionFormula::new(c.action(binding).unwrap());
            let mut sink = Vec::new();
            match tree
                .get_token(x, &b_l, |b, h, t| v.validate(b, &h, t, &c, 0, &mut sink))
                .unwrap()
            {
                Grant::Token(tok) => grants.push((tok, b_l)),
                Grant::Refused(r) => panic!("{r}"),
            }
        }
        let ids: Vec<BlockId> = grants
            .into_iter()
            .map(|(tok, b_l)| tree.commit(&tok, b_l).unwrap())
            .collect();
        let (ga, _) = make_context(&ids[0], &tree, &c.definitions).unwrap();
        assert!(ga.iter().all(|cl| !cl.body.to_string().contains("rank(C, B)")));
        let (genesis_ctx, constraints) = make_context(&tree.genesis(), &tree, &c.definitions).unwrap();
        assert!(genesis_ctx.is_empty());
        assert_eq!(constraints.len(), 1);
    }

    #[test]
    fn closed_guards() {
        let c = parse_contract(
            "agent S_A balance 12; agent W balance 50; agent A;
             def fn as_grate(g) = g;
             issue y = tx W -(20)[as_grate(|S_A|) > 10]-> A;
             issue z = tx W -(10)[as_grate(|S_A|) =< 10]-> A;",
        )
        .unwrap();
        let tree = Tree::new(OracleConfig::default(), b"gd");
        let s = compute_state(&tree, &tree.genesis(), &c, 0).unwrap();
        let guard = |b: &str| match &c.action(b).unwrap().tx().guard {
            Guard::Closed(g) => g.clone(),
            Guard::Claimed(_) => unreachable!(),
        };
        assert_eq!(p_gd(&guard("y"), &s, &c.definitions), Ok(true));
        assert_eq!(p_gd(&guard("z"), &s, &c.definitions), Ok(false));
        assert_eq!(p_gd(&Formula::True, &s, &c.definitions), Ok(true));
    }

    #[test]
    fn failed_append_condition_skips_the_guard() {
        // the guard would raise an evaluation error if it were reached
        let c = parse_contract(
            "agent A; agent B; declare pred p/0; def fn f(1) = 1;
             issue x = tx A -(5)[f(2) = 1]-> B;",
        )
        .unwrap();
        let mut tree = Tree::new(OracleConfig::default(), b"order");
        assert_eq!(
            publish(&mut tree, &c, "x"),
            Err(Rejection::InsufficientBalance {
                available: 0,
                required: 5
            })
        );
    }

    #[test]
    fn valid_claim_never_reaches_the_sink() {
        let c = parse_contract(
            "agent F balance 50; agent W; agent A; oracle OmegaX; declare pred license/1;
             issue x = tx F -(50)[true]-> W;
             after [x] issue a = tx W -(20)[claim OmegaX: license(A)]-> A;",
        )
        .unwrap();
        let mut tree = Tree::new(OracleConfig::default(), b"ev");
        publish(&mut tree, &c, "x").unwrap();
        let b_l = TransactionFormula::new(c.action("a").unwrap());
        let mut sink: Vec<DiscordCertificate> = Vec::new();
        let head = tree.head();
        assert_eq!(
            Validator::default().validate(&b_l, &head, &tree, &c, 0, &mut sink),
            Ok(())
        );
        assert!(sink.is_empty());
    }
}
