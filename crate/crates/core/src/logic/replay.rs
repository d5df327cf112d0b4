//! Independent certificate checking.
//!
//! Shares only grounding and three-valued evaluation with the search; the
//! proof is re-checked step by step and minimality is confirmed by truth-table
//! enumeration.

use std::collections::BTreeMap;

use thiserror::Error;

use super::defs::DefinitionSet;
use super::error::LogicError;
use super::formula::{Claim, Formula};
use super::minimize::DiscordCertificate;
use super::prop::{compile, AtomTable, Prop};
use super::refute::{compile_premises, PremiseRef, Refutation, Rule, Source};

/// Largest conflict set whose minimality is confirmed by brute force.
pub const MINIMALITY_CHECK_LIMIT: usize = 8;
/// Largest atom universe the truth-table check will enumerate.
pub const ENUMERATION_ATOM_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("replay failed at step {step}: {reason}")]
    ReplayFailed { step: usize, reason: String },
    #[error("certificate is malformed: {0}")]
    Malformed(String),
    #[error("conflict set is not minimal: dropping {0} still leaves a contradiction")]
    NotMinimal(String),
    #[error("constraint is not part of the contract: {0}")]
    ForeignConstraint(String),
    #[error("too many atoms ({0}) for exhaustive enumeration")]
    CheckLimit(usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

fn fail(step: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError::ReplayFailed {
        step,
        reason: reason.into(),
    }
}

/// Re-derives the refutation's conclusion from its used claims, used
/// constraints and the candidate.
pub fn replay(refutation: &Refutation, candidate: &Claim, defs: &DefinitionSet) -> Result<(), ReplayError> {
    let mut table = AtomTable::new();
    let (props, sources) = compile_premises(
        &refutation.used_claims,
        &refutation.used_constraints,
        candidate,
        defs,
        &mut table,
    )?;
    let hypothesis = |r: &PremiseRef| -> Option<&Prop> {
        sources
            .iter()
            .position(|s| match (s, r) {
                (Source::Claim(a), PremiseRef::Claim(b)) => a == b,
                (Source::Constraint(a), PremiseRef::Constraint(b)) => a == b,
                (Source::Candidate, PremiseRef::Candidate) => true,
                _ => false,
            })
            .map(|i| &props[i])
    };

    let steps = &refutation.steps;
    if steps.is_empty() {
        return Err(ReplayError::Malformed("no steps".into()));
    }
    let mut used_as_child = vec![false; steps.len()];
    for (k, step) in steps.iter().enumerate() {
        let last = k + 1 == steps.len();
        match step.rule {
            Rule::Close => {
                let [premise] = step.premises.as_slice() else {
                    return Err(fail(k, "close cites exactly one hypothesis"));
                };
                let prop = hypothesis(premise).ok_or_else(|| fail(k, "unknown hypothesis"))?;
                let mut assignment = vec![None; table.len()];
                for (name, value) in &step.assignment {
                    if let Some(id) = table.get(name) {
                        assignment[id] = Some(*value);
                    }
                }
                if prop.eval3(&assignment) != Some(false) {
                    return Err(fail(k, "cited hypothesis is not false under the assignment"));
                }
                if step.conclusion != Formula::False {
                    return Err(fail(k, "close concludes false"));
                }
            }
            Rule::Split => {
                let atom = step.atom.as_ref().ok_or_else(|| fail(k, "split without atom"))?;
                let [PremiseRef::Step(t), PremiseRef::Step(f)] = step.premises.as_slice() else {
                    return Err(fail(k, "split cites two earlier steps"));
                };
                for &child in [t, f] {
                    if child >= k || used_as_child[child] {
                        return Err(fail(k, "split premises must be distinct earlier steps"));
                    }
                    used_as_child[child] = true;
                }
                if step.assignment.contains_key(atom) {
                    return Err(fail(k, "split atom already assigned"));
                }
                for (&child, value) in [(t, true), (f, false)] {
                    let mut expected: BTreeMap<String, bool> = step.assignment.clone();
                    expected.insert(atom.clone(), value);
                    if steps[child].assignment != expected
                        || steps[child].conclusion != Formula::False
                    {
                        return Err(fail(k, "branch does not extend the split assignment"));
                    }
                }
                if step.conclusion != Formula::False {
                    return Err(fail(k, "split concludes false"));
                }
            }
            Rule::NegationIntro => {
                if !last {
                    return Err(fail(k, "negation-intro must be the final step"));
                }
                let [PremiseRef::Step(root)] = step.premises.as_slice() else {
                    return Err(fail(k, "negation-intro cites one step"));
                };
                if *root >= k
                    || !steps[*root].assignment.is_empty()
                    || steps[*root].conclusion != Formula::False
                {
                    return Err(fail(k, "negation-intro needs an unconditional contradiction"));
                }
                let expected = Formula::not(candidate.body.clone());
                if step.conclusion != expected || refutation.conclusion != expected {
                    return Err(fail(k, "conclusion is not the negated candidate"));
                }
            }
        }
        if last && step.rule != Rule::NegationIntro {
            return Err(fail(k, "proof does not end with negation-intro"));
        }
    }
    Ok(())
}

/// Exhaustive truth-table satisfiability of the conjunction of `formulas`.
pub fn satisfiable_by_enumeration(formulas: &[Formula], defs: &DefinitionSet) -> Result<bool, ReplayError> {
    let mut table = AtomTable::new();
    let props = formulas
        .iter()
        .map(|f| compile(f, defs, &mut table))
        .collect::<Result<Vec<_>, _>>()?;
    let n = table.len();
    if n > ENUMERATION_ATOM_LIMIT {
        return Err(ReplayError::CheckLimit(n));
    }
    let mut assignment = vec![None; n];
    for bits in 0u64..(1u64 << n) {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = Some(bits >> i & 1 == 1);
        }
        if props.iter().all(|p| p.eval3(&assignment) == Some(true)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Full certificate check: the refutation replays, cites only the
/// certificate's conflict set and contract constraints, and (for conflict
/// sets of at most `MINIMALITY_CHECK_LIMIT` claims) every proper subset of
/// conflict set plus candidate is satisfiable under the constraints.
pub fn check_certificate(cert: &DiscordCertificate, defs: &DefinitionSet) -> Result<(), ReplayError> {
    if cert.refutation.used_claims != cert.conflict {
        return Err(ReplayError::ReplayFailed {
            step: 0,
            reason: "refutation claims differ from the conflict set".into(),
        });
    }
    for c in &cert.refutation.used_constraints {
        if !defs.constraints.contains(c) {
            return Err(ReplayError::ForeignConstraint(c.to_string()));
        }
    }
    replay(&cert.refutation, &cert.candidate, defs)?;
    if cert.conflict.len() <= MINIMALITY_CHECK_LIMIT {
        let members: Vec<&Claim> = cert
            .conflict
            .iter()
            .chain(std::iter::once(&cert.candidate))
            .collect();
        // proper subsets are satisfiable iff every drop-one subset is
        for skip in 0..members.len() {
            let mut formulas: Vec<Formula> = defs.constraints.clone();
            formulas.extend(
                members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, c)| c.body.clone()),
            );
            if !satisfiable_by_enumeration(&formulas, defs)? {
                return Err(ReplayError::NotMinimal(members[skip].to_string()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::minimize::minimize_conflict;
    use crate::logic::refute::RefuteConfig;

    fn p(n: &str) -> Formula {
        Formula::atom(n, vec![])
    }

    fn defs() -> DefinitionSet {
        ["a", "b", "c"]
            .iter()
            .fold(DefinitionSet::new(), |d, n| d.with_opaque_predicate(n, 0))
    }

    fn cert() -> DiscordCertificate {
        let gamma = vec![Claim::new("X", p("a")), Claim::new("Y", Formula::implies(p("a"), p("b")))];
        let cand = Claim::new("Z", Formula::not(p("b")));
        minimize_conflict(&gamma, &[], &cand, &defs(), &RefuteConfig::default()).unwrap()
    }

    #[test]
    fn engine_certificate_checks() {
        assert_eq!(check_certificate(&cert(), &defs()), Ok(()));
    }

    #[test]
    fn deleted_claim_fails_replay() {
        let mut c = cert();
        c.conflict.remove(0);
        c.refutation.used_claims.remove(0);
        assert!(matches!(check_certificate(&c, &defs()), Err(ReplayError::ReplayFailed { .. })));
    }

    #[test]
    fn padded_claim_is_not_minimal() {
        let mut c = cert();
        let pad = Claim::new("X", p("a"));
        c.conflict.push(pad.clone());
        c.refutation.used_claims.push(pad);
        assert!(matches!(check_certificate(&c, &defs()), Err(ReplayError::NotMinimal(_))));
    }

    #[test]
    fn tampered_assignment_fails() {
        let mut c = cert();
        let close = c
            .refutation
            .steps
            .iter_mut()
            .find(|s| s.rule == Rule::Close && !s.assignment.is_empty())
            .unwrap();
        for v in close.assignment.values_mut() {
            *v = !*v;
        }
        assert!(matches!(replay(&c.refutation, &c.candidate, &defs()), Err(ReplayError::ReplayFailed { .. })));
    }

    #[test]
    fn foreign_constraint_is_rejected() {
        let mut c = cert();
        c.refutation.used_constraints.push(p("c"));
        assert!(matches!(check_certificate(&c, &defs()), Err(ReplayError::ForeignConstraint(_))));
    }
}
