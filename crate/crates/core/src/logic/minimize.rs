use super::defs::DefinitionSet;
use super::error::{LogicError, Result};
use super::formula::{Claim, Formula};
use super::refute::{refute, RefuteConfig, Refutation};

/// A subset-minimal set of stored claims that, together with the integrity
/// constraints, contradicts the candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscordCertificate {
    pub candidate: Claim,
    pub conflict: Vec<Claim>,
    pub refutation: Refutation,
}

impl DiscordCertificate {
    /// Every authority accountable for the conflict: the conflict set's
    /// authorities followed by the candidate's, without repeats.
    pub fn accountable(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.conflict.iter().chain(std::iter::once(&self.candidate)) {
            if !out.contains(&c.authority.as_str()) {
                out.push(c.authority.as_str());
            }
        }
        out
    }
}

/// Deletion-based shrinking: starting from the claims the first refutation
/// cites, drop one claim at a time and keep it out whenever the rest still
/// refutes the candidate.
pub fn minimize_conflict(
    gamma: &[Claim],
    constraints: &[Formula],
    candidate: &Claim,
    defs: &DefinitionSet,
    config: &RefuteConfig,
) -> Result<DiscordCertificate> {
    let mut proof =
        refute(gamma, constraints, candidate, defs, config)?.ok_or(LogicError::NotInConflict)?;
    let mut current = proof.used_claims.clone();
    let mut i = 0;
    while i < current.len() {
        let mut trial = current.clone();
        trial.remove(i);
        match refute(&trial, constraints, candidate, defs, config)? {
            Some(r) => {
                current = trial;
                proof = r;
            }
            None => i += 1,
        }
    }
    // the candidate must be necessary, otherwise the store itself is broken
    let vacuous = Claim::new(candidate.authority.as_str(), Formula::True);
    if refute(&current, constraints, &vacuous, defs, config)?.is_some() {
        return Err(LogicError::InconsistentContext);
    }
    Ok(DiscordCertificate {
        candidate: candidate.clone(),
        conflict: current,
        refutation: proof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> Formula {
        Formula::atom(name, vec![])
    }

    fn defs() -> DefinitionSet {
        ["a", "b", "c", "sunny"]
            .iter()
            .fold(DefinitionSet::new(), |d, n| d.with_opaque_predicate(n, 0))
    }

    #[test]
    fn drops_unrelated_claims() {
        let gamma = vec![
            Claim::new("W", p("sunny")),
            Claim::new("X", p("a")),
            Claim::new("Y", Formula::implies(p("a"), p("b"))),
        ];
        let cand = Claim::new("Z", Formula::not(p("b")));
        let cert = minimize_conflict(&gamma, &[], &cand, &defs(), &RefuteConfig::default()).unwrap();
        assert_eq!(cert.conflict, gamma[1..].to_vec());
        assert_eq!(cert.accountable(), vec!["X", "Y", "Z"]);
    }

    #[test]
    fn picks_one_of_two_redundant_supports() {
        let gamma = vec![Claim::new("X", p("a")), Claim::new("Y", p("a"))];
        let cand = Claim::new("Z", Formula::not(p("a")));
        let cert = minimize_conflict(&gamma, &[], &cand, &defs(), &RefuteConfig::default()).unwrap();
        assert_eq!(cert.conflict, vec![gamma[0].clone()]);
    }

    #[test]
    fn errors() {
        let cand = Claim::new("Z", p("a"));
        assert_eq!(
            minimize_conflict(&[], &[], &cand, &defs(), &RefuteConfig::default()),
            Err(LogicError::NotInConflict)
        );
        let broken = vec![Claim::new("X", p("c")), Claim::new("Y", Formula::not(p("c")))];
        assert_eq!(
            minimize_conflict(&broken, &[], &cand, &defs(), &RefuteConfig::default()),
            Err(LogicError::InconsistentContext)
        );
    }
}
