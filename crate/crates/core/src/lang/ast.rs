use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blocktree::OracleConfig;
use crate::logic::{AgentId, Claim, DefinitionSet, Formula};

/// Authority of every token grant.
pub const TOKEN_ORACLE: &str = "Theta";
/// The time oracle.
pub const TIME_ORACLE: &str = "Kt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Wallet,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub kind: AgentKind,
    /// Initial balance in τ; always 0 for oracles.
    pub balance: i64,
}

impl Agent {
    pub fn wallet(id: &str, balance: i64) -> Self {
        Agent {
            id: AgentId::new(id),
            kind: AgentKind::Wallet,
            balance,
        }
    }

    pub fn oracle(id: &str) -> Self {
        Agent {
            id: AgentId::new(id),
            kind: AgentKind::Oracle,
            balance: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    /// Decided on-chain.
    Closed(Formula),
    /// Endorsed by an oracle or agent.
    Claimed(Claim),
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Closed(g) => write!(f, "{g}"),
            Guard::Claimed(c) => write!(f, "claim {}: {}", c.authority, c.body),
        }
    }
}

/// `source -(amount)[guard]-> sink`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub source: AgentId,
    pub amount: i64,
    pub guard: Guard,
    pub sink: AgentId,
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tx {} -({})[{}]-> {}",
            self.source, self.amount, self.guard, self.sink
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Issue {
        binding: String,
        tx: Transaction,
    },
    /// Submitted only once every dependency is published.
    IssueAfter {
        deps: Vec<String>,
        binding: String,
        tx: Transaction,
    },
}

impl Action {
    pub fn binding(&self) -> &str {
        match self {
            Action::Issue { binding, .. } | Action::IssueAfter { binding, .. } => binding,
        }
    }

    pub fn tx(&self) -> &Transaction {
        match self {
            Action::Issue { tx, .. } | Action::IssueAfter { tx, .. } => tx,
        }
    }

    pub fn deps(&self) -> &[String] {
        match self {
            Action::Issue { .. } => &[],
            Action::IssueAfter { deps, .. } => deps,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Contract {
    pub agents: Vec<Agent>,
    pub definitions: DefinitionSet,
    pub actions: Vec<Action>,
}

impl Contract {
    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id.as_str() == id)
    }

    pub fn action(&self, binding: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.binding() == binding)
    }

    pub fn wallets(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.kind == AgentKind::Wallet)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// An authority endorses a statement; gates claimed guards.
    Claim(Claim),
    /// Releases an action for submission, optionally naming the submitter.
    Submit {
        binding: String,
        by: Option<AgentId>,
    },
    /// The agent stops acting from this tick on.
    Halt(AgentId),
    /// A bare clock tick; keeps the run going until this tick.
    Tick,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedEvent {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: Option<String>,
    pub contract: Contract,
    pub events: Vec<ScriptedEvent>,
    pub oracle: OracleConfig,
    pub seed: u64,
    /// Last tick the run may reach.
    pub horizon: Option<u64>,
}

impl Scenario {
    pub fn new(contract: Contract) -> Self {
        Scenario {
            name: None,
            contract,
            events: Vec::new(),
            oracle: OracleConfig::default(),
            seed: 0,
            horizon: None,
        }
    }

    pub fn last_scripted_tick(&self) -> Option<u64> {
        self.events.iter().map(|e| e.tick).max()
    }
}
