//! Text form of discord certificates. Formulas are stored in concrete syntax
//! and re-parsed against the contract's agents, so a certificate file can be
//! checked without the run that produced it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lang::{parse_formula, print_formula, Contract};
use crate::logic::{Claim, ClaimOrigin, DiscordCertificate, Formula, PremiseRef, Refutation, Rule, Step};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimDoc {
    pub authority: String,
    pub body: String,
    /// `submitted`, or the hex id of the block that published the claim.
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDoc {
    pub rule: String,
    /// `claim:i`, `constraint:j`, `candidate` or `step:k`.
    pub premises: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<String>,
    pub assignment: BTreeMap<String, bool>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefutationDoc {
    pub conclusion: String,
    pub used_claims: Vec<ClaimDoc>,
    pub used_constraints: Vec<String>,
    pub steps: Vec<StepDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub candidate: ClaimDoc,
    pub conflict: Vec<ClaimDoc>,
    pub accountable: Vec<String>,
    pub refutation: RefutationDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed certificate: {0}")]
pub struct DocError(pub String);

struct Ctx<'a> {
    contract: &'a Contract,
    agents: Vec<&'a str>,
}

impl<'a> Ctx<'a> {
    fn new(contract: &'a Contract) -> Self {
        Ctx {
            contract,
            agents: contract.agents.iter().map(|a| a.id.as_str()).collect(),
        }
    }

    fn print(&self, f: &Formula) -> String {
        print_formula(f, self.contract)
    }

    fn parse(&self, s: &str) -> Result<Formula, DocError> {
        parse_formula(s, &self.agents).map_err(|e| DocError(format!("{s:?}: {e}")))
    }

    fn claim_doc(&self, c: &Claim) -> ClaimDoc {
        ClaimDoc {
            authority: c.authority.to_string(),
            body: self.print(&c.body),
            origin: match &c.origin {
                ClaimOrigin::Submitted => "submitted".into(),
                ClaimOrigin::Block(id) => id.clone(),
            },
        }
    }

    fn claim(&self, d: &ClaimDoc) -> Result<Claim, DocError> {
        let origin = match d.origin.as_str() {
            "submitted" => ClaimOrigin::Submitted,
            id => ClaimOrigin::Block(id.to_owned()),
        };
        Ok(Claim::new(d.authority.as_str(), self.parse(&d.body)?).with_origin(origin))
    }
}

fn premise_text(p: &PremiseRef) -> String {
    match p {
        PremiseRef::Claim(i) => format!("claim:{i}"),
        PremiseRef::Constraint(j) => format!("constraint:{j}"),
        PremiseRef::Candidate => "candidate".into(),
        PremiseRef::Step(k) => format!("step:{k}"),
    }
}

fn parse_premise(s: &str) -> Result<PremiseRef, DocError> {
    if s == "candidate" {
        return Ok(PremiseRef::Candidate);
    }
    let bad = || DocError(format!("bad premise reference {s:?}"));
    let (kind, index) = s.split_once(':').ok_or_else(bad)?;
    let index: usize = index.parse().map_err(|_| bad())?;
    match kind {
        "claim" => Ok(PremiseRef::Claim(index)),
        "constraint" => Ok(PremiseRef::Constraint(index)),
        "step" => Ok(PremiseRef::Step(index)),
        _ => Err(bad()),
    }
}

fn parse_rule(s: &str) -> Result<Rule, DocError> {
    [Rule::Close, Rule::Split, Rule::NegationIntro]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| DocError(format!("unknown rule {s:?}")))
}

impl CertificateDoc {
    pub fn new(cert: &DiscordCertificate, contract: &Contract) -> Self {
        let ctx = Ctx::new(contract);
        let r = &cert.refutation;
        CertificateDoc {
            candidate: ctx.claim_doc(&cert.candidate),
            conflict: cert.conflict.iter().map(|c| ctx.claim_doc(c)).collect(),
            accountable: cert.accountable().into_iter().map(str::to_owned).collect(),
            refutation: RefutationDoc {
                conclusion: ctx.print(&r.conclusion),
                used_claims: r.used_claims.iter().map(|c| ctx.claim_doc(c)).collect(),
                used_constraints: r.used_constraints.iter().map(|f| ctx.print(f)).collect(),
                steps: r
                    .steps
                    .iter()
                    .map(|s| StepDoc {
                        rule: s.rule.name().into(),
                        premises: s.premises.iter().map(premise_text).collect(),
                        atom: s.atom.clone(),
                        assignment: s.assignment.clone(),
                        conclusion: ctx.print(&s.conclusion),
                    })
                    .collect(),
            },
        }
    }

    /// Rebuilds the certificate; formulas are parsed against `contract`.
    pub fn to_certificate(&self, contract: &Contract) -> Result<DiscordCertificate, DocError> {
        let ctx = Ctx::new(contract);
        let r = &self.refutation;
        let steps = r
            .steps
            .iter()
            .map(|s| {
                Ok(Step {
                    rule: parse_rule(&s.rule)?,
                    premises: s.premises.iter().map(|p| parse_premise(p)).collect::<Result<_, _>>()?,
                    atom: s.atom.clone(),
                    assignment: s.assignment.clone(),
                    conclusion: ctx.parse(&s.conclusion)?,
                })
            })
            .collect::<Result<_, DocError>>()?;
        Ok(DiscordCertificate {
            candidate: ctx.claim(&self.candidate)?,
            conflict: self.conflict.iter().map(|c| ctx.claim(c)).collect::<Result<_, _>>()?,
            refutation: Refutation {
                conclusion: ctx.parse(&r.conclusion)?,
                used_claims: r.used_claims.iter().map(|c| ctx.claim(c)).collect::<Result<_, _>>()?,
                used_constraints: r
                    .used_constraints
                    .iter()
                    .map(|f| ctx.parse(f))
                    .collect::<Result<_, _>>()?,
                steps,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_contract;
    use crate::logic::{check_certificate, minimize_conflict, RefuteConfig};

    #[test]
    fn round_trip_preserves_a_checkable_certificate() {
        let c = parse_contract(
            "agent A; agent B; oracle O; declare fn rank/2; domain S = {A, B};
             constraint forall x in S: forall y in S: rank(C, x) = 1 & rank(C, y) = 1 -> x = y;",
        )
        .unwrap();
        let f = |s: &str| parse_formula(s, &["A", "B", "O"]).unwrap();
        let gamma = vec![Claim::new("O", f("rank(C, A) = 1")).with_origin(ClaimOrigin::Block("ab".into()))];
        let cand = Claim::new("O", f("rank(C, B) = 1"));
        let cert = minimize_conflict(&gamma, &c.definitions.constraints, &cand, &c.definitions, &RefuteConfig::default()).unwrap();
        let doc = CertificateDoc::new(&cert, &c);
        let json = serde_json::to_string(&doc).unwrap();
        let back: CertificateDoc = serde_json::from_str(&json).unwrap();
        let rebuilt = back.to_certificate(&c).unwrap();
        assert_eq!(rebuilt, cert);
        assert_eq!(check_certificate(&rebuilt, &c.definitions), Ok(()));
        assert_eq!(doc.accountable, vec!["O"]);
    }

    #[test]
    fn premise_references() {
        for p in [PremiseRef::Claim(3), PremiseRef::Constraint(0), PremiseRef::Candidate, PremiseRef::Step(12)] {
            assert_eq!(parse_premise(&premise_text(&p)), Ok(p));
        }
        assert!(parse_premise("claim").is_err());
        assert!(parse_rule("modus-ponens").is_err());
    }
}
