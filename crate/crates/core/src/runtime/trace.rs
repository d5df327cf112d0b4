use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::blocktree::{BlockId, TreeSnapshot};
use crate::certificate::CertificateDoc;
use crate::validator::Rejection;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum EventBody {
    ClockTick,
    OracleClaim { authority: String, statement: String },
    Halt { agent: String },
    SubmitAction { binding: String, submitter: String },
    Validated { binding: String, head: BlockId },
    TokenRetry { binding: String, attempt: u32, target: BlockId },
    AppendCommitted { binding: String, block: BlockId, parent: BlockId, height: u64 },
    Rejection { binding: String, reason: Rejection },
    DiscordEmitted { binding: String, certificate: CertificateDoc },
}

impl EventBody {
    pub fn binding(&self) -> Option<&str> {
        match self {
            EventBody::SubmitAction { binding, .. }
            | EventBody::Validated { binding, .. }
            | EventBody::TokenRetry { binding, .. }
            | EventBody::AppendCommitted { binding, .. }
            | EventBody::Rejection { binding, .. }
            | EventBody::DiscordEmitted { binding, .. } => Some(binding),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventBody::ClockTick => "ClockTick",
            EventBody::OracleClaim { .. } => "OracleClaim",
            EventBody::Halt { .. } => "Halt",
            EventBody::SubmitAction { .. } => "SubmitAction",
            EventBody::Validated { .. } => "Validated",
            EventBody::TokenRetry { .. } => "TokenRetry",
            EventBody::AppendCommitted { .. } => "AppendCommitted",
            EventBody::Rejection { .. } => "Rejection",
            EventBody::DiscordEmitted { .. } => "DiscordEmitted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionReport {
    pub binding: String,
    pub stage: Stage,
    pub block: Option<BlockId>,
    pub reason: Option<Rejection>,
    /// Dependencies not published on the selected chain.
    pub unmet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub binding: String,
    pub transaction: String,
    pub account: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafReport {
    pub head: BlockId,
    pub height: u64,
    pub selected: bool,
    pub balances: BTreeMap<String, i64>,
}

/// Everything a run did, in a form that serializes to stable JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub scenario: Option<String>,
    pub oracle: String,
    pub seed: u64,
    pub final_tick: u64,
    pub events: Vec<Event>,
    pub actions: Vec<ActionReport>,
    pub tree: TreeSnapshot<BlockInfo>,
    pub selected_chain: Vec<BlockId>,
    pub leaves: Vec<LeafReport>,
}

impl Trace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn action(&self, binding: &str) -> Option<&ActionReport> {
        self.actions.iter().find(|a| a.binding == binding)
    }

    pub fn stage(&self, binding: &str) -> Option<Stage> {
        self.action(binding).map(|a| a.stage)
    }

    pub fn certificates(&self) -> impl Iterator<Item = (&str, &CertificateDoc)> {
        self.events.iter().filter_map(|e| match &e.body {
            EventBody::DiscordEmitted {
                binding,
                certificate,
            } => Some((binding.as_str(), certificate)),
            _ => None,
        })
    }

    pub fn discord_count(&self) -> usize {
        self.certificates().count()
    }

    pub fn selected_leaf(&self) -> Option<&LeafReport> {
        self.leaves.iter().find(|l| l.selected)
    }

    /// Balance on the selected chain.
    pub fn balance(&self, agent: &str) -> i64 {
        self.selected_leaf()
            .and_then(|l| l.balances.get(agent).copied())
            .unwrap_or(0)
    }

    /// Bindings published on the selected chain, in chain order.
    pub fn published(&self) -> Vec<&str> {
        self.selected_chain
            .iter()
            .filter_map(|id| {
                self.tree
                    .blocks
                    .iter()
                    .find(|b| b.id == *id)
                    .and_then(|b| b.payload.as_ref())
                    .map(|p| p.binding.as_str())
            })
            .collect()
    }

    /// Human-readable history of one action.
    pub fn explain(&self, binding: &str) -> Option<String> {
        let report = self.action(binding)?;
        let mut out = String::new();
        writeln!(out, "{binding}: {:?}", report.stage).unwrap();
        for e in self.events.iter().filter(|e| e.body.binding() == Some(binding)) {
            write!(out, "  tick {:>3}  {:<15}", e.tick, e.body.name()).unwrap();
            match &e.body {
                EventBody::SubmitAction { submitter, .. } => write!(out, " by {submitter}"),
                EventBody::Validated { head, .. } => write!(out, " against {}", head.short()),
                EventBody::TokenRetry { attempt, target, .. } => {
                    write!(out, " attempt {attempt}, {} has no room", target.short())
                }
                EventBody::AppendCommitted {
                    block,
                    parent,
                    height,
                    ..
                } => write!(out, " {} on {} at height {height}", block.short(), parent.short()),
                EventBody::Rejection { reason, .. } => write!(out, " {reason}"),
                EventBody::DiscordEmitted { certificate, .. } => {
                    let pad = " ".repeat(30);
                    let c = &certificate.candidate;
                    write!(out, " conflict set:").unwrap();
                    for claim in &certificate.conflict {
                        write!(out, "\n{pad}[{}] {}  from block {}", claim.authority, claim.body, short(&claim.origin)).unwrap();
                    }
                    write!(out, "\n{pad}[{}] {}  submitted with {binding}", c.authority, c.body).unwrap();
                    for constraint in &certificate.refutation.used_constraints {
                        write!(out, "\n{pad}constraint {constraint}").unwrap();
                    }
                    write!(out, "\n{pad}accountable: {}", certificate.accountable.join(", "))
                }
                _ => Ok(()),
            }
            .unwrap();
            out.push('\n');
        }
        if report.stage == Stage::Pending && !report.unmet.is_empty() {
            writeln!(out, "  waiting on {}", report.unmet.join(", ")).unwrap();
        }
        Some(out)
    }
}

fn short(origin: &str) -> &str {
    origin.get(..8).unwrap_or(origin)
}
