//! Deterministic simulation of a scenario. Each action is a defunctionalized
//! continuation that the engine advances Pending -> Submitted -> Validated ->
//! Published, or into Rejected.
//!
//! One tick runs: clock, scripted events, then the ready actions in three
//! phases. Every ready action is submitted, then validated against the same
//! head, then committed in order; a commit refused by a frugal oracle is
//! validated again on the new head within the tick. Actions released by a
//! publication become ready on the next tick.

mod trace;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocktree::{BlockId, Grant, OracleConfig, Token, TreeError, APPEND_RETRIES};
use crate::certificate::CertificateDoc;
use crate::lang::{EventKind, Guard, Scenario, TOKEN_ORACLE};
use crate::logic::{refute, AgentId, Claim, DiscordCertificate, Formula};
use crate::validator::{compute_state, make_context, Rejection, TransactionFormula, Tree, Validator};

pub use trace::{ActionReport, BlockInfo, Event, EventBody, LeafReport, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Stage {
    Pending,
    Submitted,
    Validated,
    Published,
    Rejected,
}

/// What remains to be done for one action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Continuation {
    Pending,
    Submitted(TransactionFormula),
    Validated(TransactionFormula, Token),
    Published(BlockId),
    Rejected(Rejection),
}

impl Continuation {
    pub fn stage(&self) -> Stage {
        match self {
            Continuation::Pending => Stage::Pending,
            Continuation::Submitted(_) => Stage::Submitted,
            Continuation::Validated(..) => Stage::Validated,
            Continuation::Published(_) => Stage::Published,
            Continuation::Rejected(_) => Stage::Rejected,
        }
    }
}

/// Whether `from -> to` is a legal step. Stages only move forward; a
/// validated action may be validated again after a token retry, and anything
/// short of Published may be rejected.
pub fn legal_transition(from: Stage, to: Stage) -> bool {
    use Stage::*;
    matches!(
        (from, to),
        (Pending, Submitted)
            | (Submitted, Validated)
            | (Validated, Validated)
            | (Validated, Published)
            | (Pending | Submitted | Validated, Rejected)
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub oracle: OracleConfig,
    pub seed: u64,
    /// Last tick the engine may run.
    pub horizon: u64,
    pub validator: Validator,
    /// After every commit, check that the new chain's claim store is
    /// consistent with the integrity constraints.
    pub check_consistency: bool,
}

impl RunOptions {
    pub fn for_scenario(s: &Scenario) -> Self {
        RunOptions {
            oracle: s.oracle,
            seed: s.seed,
            horizon: s.horizon.unwrap_or_else(|| {
                s.last_scripted_tick().unwrap_or(0) + s.contract.actions.len() as u64 + 1
            }),
            validator: Validator::default(),
            check_consistency: false,
        }
    }
}

struct ActionState {
    formula: TransactionFormula,
    continuation: Continuation,
    /// False while the action waits for a scripted submit.
    released: bool,
    submitter: AgentId,
}

pub struct RunOutput {
    pub trace: Trace,
    pub tree: Tree,
    pub certificates: Vec<(String, DiscordCertificate)>,
    /// Chains whose claim store was refutable; empty unless checking.
    pub consistency_violations: Vec<String>,
}

pub struct Engine<'s> {
    scenario: &'s Scenario,
    options: RunOptions,
    tree: Tree,
    actions: Vec<ActionState>,
    endorsements: Vec<Claim>,
    halted: BTreeSet<AgentId>,
    rng: Option<ChaCha8Rng>,
    clock: u64,
    events: Vec<Event>,
    certificates: Vec<(String, DiscordCertificate)>,
    violations: Vec<String>,
}

impl<'s> Engine<'s> {
    pub fn new(scenario: &'s Scenario, options: RunOptions) -> Self {
        let scripted: BTreeSet<&str> = scenario
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Submit { binding, .. } => Some(binding.as_str()),
                _ => None,
            })
            .collect();
        let actions = scenario
            .contract
            .actions
            .iter()
            .map(|a| ActionState {
                formula: TransactionFormula::new(a),
                continuation: Continuation::Pending,
                released: !scripted.contains(a.binding()),
                submitter: a.tx().source.clone(),
            })
            .collect();
        let tag = scenario.name.as_deref().unwrap_or("plurality");
        Engine {
            scenario,
            tree: Tree::new(options.oracle, tag.as_bytes()),
            rng: (options.seed != 0).then(|| ChaCha8Rng::seed_from_u64(options.seed)),
            options,
            actions,
            endorsements: Vec::new(),
            halted: BTreeSet::new(),
            clock: 0,
            events: Vec::new(),
            certificates: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn emit(&mut self, body: EventBody) {
        self.events.push(Event {
            seq: self.events.len() as u64,
            tick: self.clock,
            body,
        });
    }

    fn advance(&mut self, i: usize, next: Continuation) {
        let from = self.actions[i].continuation.stage();
        assert!(
            legal_transition(from, next.stage()),
            "illegal transition {from:?} -> {:?} for {}",
            next.stage(),
            self.actions[i].formula.binding
        );
        self.actions[i].continuation = next;
    }

    fn binding(&self, i: usize) -> String {
        self.actions[i].formula.binding.clone()
    }

    fn reject(&mut self, i: usize, reason: Rejection) {
        self.advance(i, Continuation::Rejected(reason.clone()));
        let binding = self.binding(i);
        self.emit(EventBody::Rejection { binding, reason });
    }

    /// Submission by `submitter`.
    fn kappa_sub(&mut self, i: usize) {
        let submitter = self.actions[i].submitter.clone();
        if submitter != self.actions[i].formula.transaction.source {
            return self.reject(
                i,
                Rejection::WrongSubmitter {
                    submitter: submitter.to_string(),
                },
            );
        }
        let formula = self.actions[i].formula.clone();
        self.advance(i, Continuation::Submitted(formula));
        let binding = self.binding(i);
        self.emit(EventBody::SubmitAction {
            binding,
            submitter: submitter.to_string(),
        });
    }

    /// Validation against the current selected head; a refusal goes to
    /// Rejected, a discord certificate goes to the conflict sink first.
    fn kappa_v(&mut self, i: usize) {
        let formula = match &self.actions[i].continuation {
            Continuation::Submitted(f) | Continuation::Validated(f, _) => f.clone(),
            other => panic!("validating an action in stage {:?}", other.stage()),
        };
        let head = self.tree.head();
        let mut sink: Vec<DiscordCertificate> = Vec::new();
        let (validator, contract, clock) = (self.options.validator, &self.scenario.contract, self.clock);
        let grant = self
            .tree
            .get_token(head, &formula, |b, h, t| validator.validate(b, &h, t, contract, clock, &mut sink))
            .expect("validating against the selected head");
        for cert in sink {
            self.kappa_c(i, cert);
        }
        match grant {
            Grant::Token(token) => {
                self.advance(i, Continuation::Validated(formula, token));
                let binding = self.binding(i);
                self.emit(EventBody::Validated { binding, head });
            }
            Grant::Refused(reason) => self.reject(i, reason),
        }
    }

    /// The conflict sink.
    fn kappa_c(&mut self, i: usize, cert: DiscordCertificate) {
        let binding = self.binding(i);
        let certificate = CertificateDoc::new(&cert, &self.scenario.contract);
        self.emit(EventBody::DiscordEmitted {
            binding: binding.clone(),
            certificate,
        });
        self.certificates.push((binding, cert));
    }

    /// Commit; while the oracle has no room on the token's target the action
    /// is validated again on the new head.
    fn kappa_pub(&mut self, i: usize) -> bool {
        for attempt in 1..=APPEND_RETRIES {
            let Continuation::Validated(formula, token) = &self.actions[i].continuation else {
                return false;
            };
            let (formula, token) = (formula.clone(), token.clone());
            match self.tree.commit(&token, formula) {
                Ok(block) => {
                    self.advance(i, Continuation::Published(block));
                    let height = self.tree.block(&block).map_or(0, |b| b.height);
                    let binding = self.binding(i);
                    self.emit(EventBody::AppendCommitted {
                        binding,
                        block,
                        parent: token.target,
                        height,
                    });
                    if self.options.check_consistency {
                        self.check_consistency(block);
                    }
                    return true;
                }
                Err(TreeError::FrugalLimitReached(target)) => {
                    let binding = self.binding(i);
                    self.emit(EventBody::TokenRetry {
                        binding,
                        attempt: attempt as u32,
                        target,
                    });
                    self.kappa_v(i);
                }
                Err(TreeError::AlreadyConsumed(_)) => {
                    self.reject(i, Rejection::TokenConsumed);
                    return false;
                }
                Err(e) => panic!("commit failed: {e}"),
            }
        }
        if self.actions[i].continuation.stage() == Stage::Validated {
            self.reject(i, Rejection::RetryExhausted);
        }
        false
    }

    fn check_consistency(&mut self, block: BlockId) {
        let defs = &self.scenario.contract.definitions;
        let (gamma, constraints) = make_context(&block, &self.tree, defs).expect("block is in the tree");
        let probe = Claim::new(TOKEN_ORACLE, Formula::True);
        match refute(&gamma, &constraints, &probe, defs, &self.options.validator.refute) {
            Ok(None) => {}
            Ok(Some(_)) => self
                .violations
                .push(format!("claim store of {} is inconsistent", block.short())),
            Err(e) => self
                .violations
                .push(format!("claim store of {} not checked: {e}", block.short())),
        }
    }

    fn endorsed(&self, guard: &Guard) -> bool {
        match guard {
            Guard::Closed(_) => true,
            Guard::Claimed(c) => self.endorsements.iter().any(|e| e.same_statement(c)),
        }
    }

    fn scripted(&mut self, tick: u64) {
        let events: Vec<EventKind> = self
            .scenario
            .events
            .iter()
            .filter(|e| e.tick == tick)
            .map(|e| e.kind.clone())
            .collect();
        for kind in events {
            match kind {
                EventKind::Claim(c) => {
                    let statement = crate::lang::print_formula(&c.body, &self.scenario.contract);
                    self.emit(EventBody::OracleClaim {
                        authority: c.authority.to_string(),
                        statement,
                    });
                    self.endorsements.push(c);
                }
                EventKind::Submit { binding, by } => {
                    let Some(i) = self.actions.iter().position(|a| a.formula.binding == binding) else {
                        continue;
                    };
                    if self.actions[i].continuation.stage() != Stage::Pending {
                        continue;
                    }
                    let source = self.actions[i].formula.transaction.source.clone();
                    let submitter = by.unwrap_or(source.clone());
                    if submitter != source {
                        self.actions[i].submitter = submitter;
                        self.kappa_sub(i);
                    } else {
                        self.actions[i].released = true;
                    }
                }
                EventKind::Halt(agent) => {
                    self.emit(EventBody::Halt {
                        agent: agent.to_string(),
                    });
                    self.halted.insert(agent);
                }
                EventKind::Tick => {}
            }
        }
    }

    fn ready(&mut self) -> Vec<usize> {
        let head = self.tree.head();
        let state = compute_state(&self.tree, &head, &self.scenario.contract, self.clock)
            .expect("selected head is in the tree");
        let mut ready: Vec<usize> = (0..self.actions.len())
            .filter(|&i| {
                let a = &self.actions[i];
                a.continuation == Continuation::Pending
                    && a.released
                    && !self.halted.contains(&a.formula.transaction.source)
                    && a.formula.deps.iter().all(|d| state.published.contains(d))
                    && self.endorsed(&a.formula.transaction.guard)
            })
            .collect();
        if let Some(rng) = &mut self.rng {
            ready.shuffle(rng);
        }
        ready
    }

    /// Runs one tick; returns whether anything was appended.
    fn tick(&mut self, tick: u64) -> bool {
        self.clock = tick;
        self.emit(EventBody::ClockTick);
        self.scripted(tick);
        let ready = self.ready();
        for &i in &ready {
            self.kappa_sub(i);
        }
        for &i in &ready {
            if self.actions[i].continuation.stage() == Stage::Submitted {
                self.kappa_v(i);
            }
        }
        let mut appended = false;
        for &i in &ready {
            appended |= self.kappa_pub(i);
        }
        appended
    }

    pub fn run(mut self) -> RunOutput {
        let last_scripted = self.scenario.last_scripted_tick().unwrap_or(0);
        let mut tick = 0;
        loop {
            let appended = self.tick(tick);
            if tick >= self.options.horizon || (tick >= last_scripted && !appended) {
                break;
            }
            tick += 1;
        }
        let trace = self.build_trace(tick);
        RunOutput {
            trace,
            tree: self.tree,
            certificates: self.certificates,
            consistency_violations: self.violations,
        }
    }

    fn build_trace(&self, final_tick: u64) -> Trace {
        let contract = &self.scenario.contract;
        let head = self.tree.head();
        let selected = compute_state(&self.tree, &head, contract, final_tick).expect("head is in the tree");
        let actions = self
            .actions
            .iter()
            .map(|a| ActionReport {
                binding: a.formula.binding.clone(),
                stage: a.continuation.stage(),
                block: match &a.continuation {
                    Continuation::Published(b) => Some(*b),
                    _ => None,
                },
                reason: match &a.continuation {
                    Continuation::Rejected(r) => Some(r.clone()),
                    _ => None,
                },
                unmet: a
                    .formula
                    .deps
                    .iter()
                    .filter(|d| !selected.published.contains(*d))
                    .cloned()
                    .collect(),
            })
            .collect();
        let leaves = self
            .tree
            .leaves()
            .map(|leaf| {
                let state = compute_state(&self.tree, &leaf.id, contract, final_tick).expect("leaf is in the tree");
                LeafReport {
                    head: leaf.id,
                    height: leaf.height,
                    selected: leaf.id == head,
                    balances: state
                        .balances
                        .into_iter()
                        .map(|(a, v)| (a.to_string(), v))
                        .collect::<BTreeMap<_, _>>(),
                }
            })
            .collect();
        Trace {
            scenario: self.scenario.name.clone(),
            oracle: self.options.oracle.to_string(),
            seed: self.options.seed,
            final_tick,
            events: self.events.clone(),
            actions,
            tree: self.tree.snapshot(|p| BlockInfo {
                binding: p.binding.clone(),
                transaction: p.transaction.to_string(),
                account: p.account.to_string(),
            }),
            selected_chain: self.tree.chain_to(&head).expect("head is in the tree"),
            leaves,
        }
    }
}

/// Runs `scenario` with its own policy, seed and horizon.
pub fn run(scenario: &Scenario) -> RunOutput {
    Engine::new(scenario, RunOptions::for_scenario(scenario)).run()
}

/// Runs with the given options.
pub fn run_with(scenario: &Scenario, options: RunOptions) -> RunOutput {
    Engine::new(scenario, options).run()
}
