//! Ground refutation: decides whether claim bodies, integrity constraints and
//! a candidate are jointly unsatisfiable, and records a case-split proof tree
//! that `replay` can check without re-running the search.

use std::collections::BTreeMap;

use super::defs::DefinitionSet;
use super::error::{LogicError, Result};
use super::formula::{Claim, Formula};
use super::prop::{compile, AtomId, AtomTable, Prop};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefuteConfig {
    /// Maximum number of distinct unknown atoms in one problem.
    pub max_atoms: usize,
    /// Maximum number of search nodes before giving up.
    pub max_nodes: usize,
}

impl Default for RefuteConfig {
    fn default() -> Self {
        RefuteConfig {
            max_atoms: 64,
            max_nodes: 1 << 18,
        }
    }
}

/// A hypothesis or an earlier step cited by a proof step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PremiseRef {
    /// Index into `Refutation::used_claims`.
    Claim(usize),
    /// Index into `Refutation::used_constraints`.
    Constraint(usize),
    Candidate,
    Step(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// The cited hypothesis is false under the step's assignment.
    Close,
    /// Both extensions of the assignment by `atom` are contradictory.
    Split,
    /// Contradiction under the empty assignment refutes the candidate.
    NegationIntro,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Close => "close",
            Rule::Split => "split",
            Rule::NegationIntro => "negation-intro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub rule: Rule,
    pub premises: Vec<PremiseRef>,
    /// Atom split on; only for `Rule::Split`.
    pub atom: Option<String>,
    /// Partial assignment under which the step derives a contradiction.
    pub assignment: BTreeMap<String, bool>,
    /// `False` for close/split steps, the negated candidate for the last step.
    pub conclusion: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refutation {
    pub conclusion: Formula,
    pub used_claims: Vec<Claim>,
    pub used_constraints: Vec<Formula>,
    pub steps: Vec<Step>,
}

#[derive(Debug)]
enum Node {
    Close {
        premise: usize,
        assignment: Vec<(AtomId, bool)>,
    },
    Split {
        atom: AtomId,
        on_true: Box<Node>,
        on_false: Box<Node>,
        assignment: Vec<(AtomId, bool)>,
    },
}

struct Search<'a> {
    premises: &'a [Prop],
    atoms_of: Vec<Vec<AtomId>>,
    assignment: Vec<Option<bool>>,
    trail: Vec<(AtomId, bool)>,
    nodes: usize,
    max_nodes: usize,
}

impl Search<'_> {
    /// `Ok(None)` means a satisfying extension of the current assignment exists.
    fn run(&mut self) -> Result<Option<Node>> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(LogicError::ResourceLimit {
                what: "refutation search nodes",
                limit: self.max_nodes,
            });
        }
        let mut branch: Option<(usize, AtomId)> = None;
        // the candidate is looked at first so that proofs lean on it
        let last = self.premises.len() - 1;
        for i in std::iter::once(last).chain(0..last) {
            match self.premises[i].eval3(&self.assignment) {
                Some(false) => {
                    return Ok(Some(Node::Close {
                        premise: i,
                        assignment: self.trail.clone(),
                    }))
                }
                Some(true) => {}
                None => {
                    let open: Vec<AtomId> = self.atoms_of[i]
                        .iter()
                        .copied()
                        .filter(|a| self.assignment[*a].is_none())
                        .collect();
                    let better = match branch {
                        None => true,
                        Some((count, _)) => open.len() < count,
                    };
                    if better {
                        branch = Some((open.len(), open[0]));
                    }
                }
            }
        }
        let Some((_, atom)) = branch else {
            return Ok(None);
        };
        let on_true = match self.assume(atom, true)? {
            Some(n) => n,
            None => return Ok(None),
        };
        let on_false = match self.assume(atom, false)? {
            Some(n) => n,
            None => return Ok(None),
        };
        Ok(Some(Node::Split {
            atom,
            on_true: Box::new(on_true),
            on_false: Box::new(on_false),
            assignment: self.trail.clone(),
        }))
    }

    fn assume(&mut self, atom: AtomId, value: bool) -> Result<Option<Node>> {
        self.assignment[atom] = Some(value);
        self.trail.push((atom, value));
        let out = self.run();
        self.trail.pop();
        self.assignment[atom] = None;
        out
    }
}

pub(crate) enum Source {
    Claim(usize),
    Constraint(usize),
    Candidate,
}

/// Compiles the hypotheses in the fixed order claims, constraints, candidate.
pub(crate) fn compile_premises(
    claims: &[Claim],
    constraints: &[Formula],
    candidate: &Claim,
    defs: &DefinitionSet,
    table: &mut AtomTable,
) -> Result<(Vec<Prop>, Vec<Source>)> {
    let mut props = Vec::new();
    let mut sources = Vec::new();
    for (i, c) in claims.iter().enumerate() {
        props.push(compile(&c.body, defs, table)?);
        sources.push(Source::Claim(i));
    }
    for (i, c) in constraints.iter().enumerate() {
        props.push(compile(c, defs, table)?);
        sources.push(Source::Constraint(i));
    }
    props.push(compile(&candidate.body, defs, table)?);
    sources.push(Source::Candidate);
    Ok((props, sources))
}

/// Returns a refutation iff the bodies of `gamma`, the `constraints` and the
/// candidate's body have no common model over their ground atoms.
pub fn refute(
    gamma: &[Claim],
    constraints: &[Formula],
    candidate: &Claim,
    defs: &DefinitionSet,
    config: &RefuteConfig,
) -> Result<Option<Refutation>> {
    let mut table = AtomTable::new();
    let (props, sources) = compile_premises(gamma, constraints, candidate, defs, &mut table)?;
    if table.len() > config.max_atoms {
        return Err(LogicError::ResourceLimit {
            what: "ground atoms",
            limit: config.max_atoms,
        });
    }
    let atoms_of = props
        .iter()
        .map(|p| {
            let mut v = Vec::new();
            p.atoms(&mut v);
            v.sort_unstable();
            v
        })
        .collect();
    let mut search = Search {
        premises: &props,
        atoms_of,
        assignment: vec![None; table.len()],
        trail: Vec::new(),
        nodes: 0,
        max_nodes: config.max_nodes,
    };
    let Some(root) = search.run()? else {
        return Ok(None);
    };

    // Renumber cited hypotheses into the used lists, keeping input order.
    let mut cited = vec![false; props.len()];
    mark_cited(&root, &mut cited);
    let mut claim_index = BTreeMap::new();
    let mut constraint_index = BTreeMap::new();
    let mut used_claims = Vec::new();
    let mut used_constraints = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        if !cited[i] {
            continue;
        }
        match src {
            Source::Claim(k) => {
                claim_index.insert(i, used_claims.len());
                used_claims.push(gamma[*k].clone());
            }
            Source::Constraint(k) => {
                constraint_index.insert(i, used_constraints.len());
                used_constraints.push(constraints[*k].clone());
            }
            Source::Candidate => {}
        }
    }
    let premise_ref = |i: usize| match sources[i] {
        Source::Claim(_) => PremiseRef::Claim(claim_index[&i]),
        Source::Constraint(_) => PremiseRef::Constraint(constraint_index[&i]),
        Source::Candidate => PremiseRef::Candidate,
    };

    let mut steps = Vec::new();
    let root_index = emit(&root, &table, &premise_ref, &mut steps);
    let conclusion = Formula::not(candidate.body.clone());
    steps.push(Step {
        rule: Rule::NegationIntro,
        premises: vec![PremiseRef::Step(root_index)],
        atom: None,
        assignment: BTreeMap::new(),
        conclusion: conclusion.clone(),
    });
    Ok(Some(Refutation {
        conclusion,
        used_claims,
        used_constraints,
        steps,
    }))
}

fn mark_cited(node: &Node, cited: &mut [bool]) {
    match node {
        Node::Close { premise, .. } => cited[*premise] = true,
        Node::Split {
            on_true, on_false, ..
        } => {
            mark_cited(on_true, cited);
            mark_cited(on_false, cited);
        }
    }
}

fn named(assignment: &[(AtomId, bool)], table: &AtomTable) -> BTreeMap<String, bool> {
    assignment
        .iter()
        .map(|(a, v)| (table.name(*a).to_owned(), *v))
        .collect()
}

/// Post-order emission; returns the index of `node`'s step.
fn emit(
    node: &Node,
    table: &AtomTable,
    premise_ref: &dyn Fn(usize) -> PremiseRef,
    steps: &mut Vec<Step>,
) -> usize {
    let step = match node {
        Node::Close {
            premise,
            assignment,
        } => Step {
            rule: Rule::Close,
            premises: vec![premise_ref(*premise)],
            atom: None,
            assignment: named(assignment, table),
            conclusion: Formula::False,
        },
        Node::Split {
            atom,
            on_true,
            on_false,
            assignment,
        } => {
            let t = emit(on_true, table, premise_ref, steps);
            let f = emit(on_false, table, premise_ref, steps);
            Step {
                rule: Rule::Split,
                premises: vec![PremiseRef::Step(t), PremiseRef::Step(f)],
                atom: Some(table.name(*atom).to_owned()),
                assignment: named(assignment, table),
                conclusion: Formula::False,
            }
        }
    };
    steps.push(step);
    steps.len() - 1
}
