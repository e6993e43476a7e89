//! Plain role extraction: project a narration onto each agent.
//!
//! Line `S -> R : M` contributes `!msg(R,M)` to the strand of `S` and
//! `?msg(S,M)` to the strand of `R`. Initial knowledge becomes a prefix of
//! receptions, preceded by receptions of the role's nonces.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::narration::Narration;
use crate::term::{Name, Polarity, PositiveStrand, Step, Strand, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleSpec {
    pub name: Name,
    /// Constants of the initial knowledge; metadata only.
    pub params: Vec<Name>,
    pub nonces: Vec<Name>,
    pub strand: Strand,
}

impl fmt::Display for RoleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<&str> = self.params.iter().map(|p| p.as_ref()).collect();
        let nonces: Vec<&str> = self.nonces.iter().map(|p| p.as_ref()).collect();
        write!(f, "{}({}): \u{3bd} {}.{}", self.name, params.join(", "), nonces.join(", "), self.strand)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoleError {
    #[error("shared nonce {nonce}: originated by roles {first} and {second}")]
    SharedNonce { nonce: String, first: String, second: String },
}

fn wrap(partner: &Name, m: &Term) -> Term {
    Term::app("msg", vec![Term::Const(partner.clone()), m.clone()])
}

/// `?K, S^A` for one agent: knowledge receptions followed by the projection.
fn projection(n: &Narration, agent: &Name) -> (Vec<Step>, Vec<Step>) {
    let knowledge = n.knowledge.get(agent).map(Vec::as_slice).unwrap_or(&[]);
    let known = knowledge.iter().map(|k| Step { polarity: Polarity::Receive, message: k.clone() }).collect();
    let mut steps = Vec::new();
    for l in &n.lines {
        if &l.sender == agent {
            steps.push(Step { polarity: Polarity::Send, message: wrap(&l.receiver, &l.message) });
        } else if &l.receiver == agent {
            steps.push(Step { polarity: Polarity::Receive, message: wrap(&l.sender, &l.message) });
        }
    }
    (known, steps)
}

/// Constants first occurring inside the payload of a sent message. The
/// partner name in the `msg` wrapper is never a nonce.
fn originated(steps: &[Step]) -> Vec<Name> {
    let mut seen: BTreeSet<Name> = BTreeSet::new();
    let mut out = Vec::new();
    for s in steps {
        let cs = s.message.constants();
        if s.polarity == Polarity::Send {
            let payload = match &s.message {
                Term::App(f, args) if &**f == "msg" && args.len() == 2 => args[1].constants(),
                _ => cs.clone(),
            };
            for c in &payload {
                if !seen.contains(c) && !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        seen.extend(cs);
    }
    out
}

pub(crate) fn nonces_by_agent(n: &Narration) -> IndexMap<Name, Vec<Name>> {
    n.agents()
        .map(|a| {
            let (mut steps, rest) = projection(n, a);
            steps.extend(rest);
            (a.clone(), originated(&steps))
        })
        .collect()
}

pub fn extract_role(n: &Narration, agent: &Name) -> RoleSpec {
    let (known, projected) = projection(n, agent);
    let mut all = known.clone();
    all.extend(projected.iter().cloned());
    let nonces = originated(&all);
    let mut params = Vec::new();
    for k in n.knowledge.get(agent).into_iter().flatten() {
        for c in k.constants() {
            if !params.contains(&c) {
                params.push(c);
            }
        }
    }
    let mut steps: Vec<Step> =
        nonces.iter().map(|c| Step { polarity: Polarity::Receive, message: Term::Const(c.clone()) }).collect();
    steps.extend(known);
    steps.extend(projected);
    RoleSpec { name: agent.clone(), params, nonces, strand: Strand::new(steps) }
}

/// One role per agent, in knowledge-declaration order.
pub fn extract_roles(n: &Narration) -> Result<Vec<RoleSpec>, RoleError> {
    let roles: Vec<RoleSpec> = n.agents().map(|a| extract_role(n, a)).collect();
    for (i, r) in roles.iter().enumerate() {
        for other in &roles[i + 1..] {
            if let Some(shared) = r.nonces.iter().find(|c| other.nonces.contains(c)) {
                return Err(RoleError::SharedNonce {
                    nonce: shared.to_string(),
                    first: r.name.to_string(),
                    second: other.name.to_string(),
                });
            }
        }
    }
    Ok(roles)
}

/// Received messages of the role, as a positive strand.
pub fn role_input(r: &RoleSpec) -> PositiveStrand {
    PositiveStrand::new(
        r.strand
            .steps()
            .iter()
            .filter(|s| s.polarity == Polarity::Receive)
            .map(|s| s.message.clone())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narration::parse_narration;
    use crate::rewrite::{DeductionSystem, TheoryStore};
    use crate::term::parse_term;

    const NSPK: &str = "protocol NSPK\ntheory dolev_yao\nA -> B : enc(pair(A,Na),KB)\nB -> A : enc(pair(Na,Nb),KA)\nA -> B : enc(Nb,KB)\nA knows A, B, KA, KB, inv(KA)\nB knows A, B, KA, KB, inv(KB)\nend\n";

    fn t(s: &str) -> Term {
        parse_term(s, &DeductionSystem::dolev_yao().sig).unwrap()
    }

    fn step(s: &str) -> Step {
        let (p, m) = s.split_at(1);
        let polarity = if p == "!" { Polarity::Send } else { Polarity::Receive };
        Step { polarity, message: t(m) }
    }

    fn roles(src: &str) -> Vec<RoleSpec> {
        extract_roles(&parse_narration(src, &TheoryStore::with_builtins()).unwrap()).unwrap()
    }

    #[test]
    fn nspk_initiator_matches_golden_role() {
        let rs = roles(NSPK);
        let a = &rs[0];
        assert_eq!(a.name.as_ref(), "A");
        assert_eq!(a.nonces, vec![Name::from("Na")]);
        let expected: Vec<Step> = [
            "?Na",
            "?A",
            "?B",
            "?KA",
            "?KB",
            "?inv(KA)",
            "!msg(B,enc(pair(A,Na),KB))",
            "?msg(B,enc(pair(Na,Nb),KA))",
            "!msg(B,enc(Nb,KB))",
        ]
        .iter()
        .map(|s| step(s))
        .collect();
        assert_eq!(a.strand.steps(), expected.as_slice());
        let params: Vec<&str> = a.params.iter().map(|p| p.as_ref()).collect();
        assert_eq!(params, ["A", "B", "KA", "KB"]);
    }

    #[test]
    fn nspk_responder() {
        let rs = roles(NSPK);
        let b = &rs[1];
        assert_eq!(b.nonces, vec![Name::from("Nb")]);
        let tail: Vec<Step> =
            ["?msg(A,enc(pair(A,Na),KB))", "!msg(A,enc(pair(Na,Nb),KA))", "?msg(A,enc(Nb,KB))"].iter().map(|s| step(s)).collect();
        assert_eq!(&b.strand.steps()[6..], tail.as_slice());
        assert_eq!(b.strand.steps()[0], step("?Nb"));
    }

    #[test]
    fn knowledge_is_not_a_nonce() {
        let rs = roles("protocol P\ntheory dolev_yao\nA -> B : K\nA knows K\nB knows\nend\n");
        assert!(rs[0].nonces.is_empty());
        assert!(rs[1].nonces.is_empty());
    }

    #[test]
    fn nspk_input_matches_golden() {
        let rs = roles(NSPK);
        let input = role_input(&rs[0]);
        let expected: Vec<Term> =
            ["Na", "A", "B", "KA", "KB", "inv(KA)", "msg(B,enc(pair(Na,Nb),KA))"].iter().map(|s| t(s)).collect();
        assert_eq!(input.messages(), expected.as_slice());
    }

    #[test]
    fn input_of_send_only_and_receive_only_roles() {
        let send_only = RoleSpec {
            name: "A".into(),
            params: vec![],
            nonces: vec![],
            strand: Strand::new(vec![step("!a"), step("!b")]),
        };
        assert!(role_input(&send_only).is_empty());
        let recv_only = RoleSpec {
            name: "A".into(),
            params: vec![],
            nonces: vec![],
            strand: Strand::new(vec![step("?a"), step("?pair(a,b)")]),
        };
        assert_eq!(role_input(&recv_only).messages(), &[t("a"), t("pair(a,b)")]);
    }

    #[test]
    fn shared_nonce_rejected() {
        let n = parse_narration(
            "protocol P\ntheory dolev_yao\nA -> C : N\nB -> C : N\nA knows A\nB knows B\nC knows C\nend\n",
            &TheoryStore::with_builtins(),
        )
        .unwrap();
        assert!(matches!(extract_roles(&n), Err(RoleError::SharedNonce { .. })));
    }
}
