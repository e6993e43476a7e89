//! Empirical prudence audit: compare a compiled frame against the
//! brute-force equalities of its role input.
//!
//! Every oracle pair must hold on every input the frame accepts. Pairs that
//! appear verbatim among the frame's checks are entailed directly; the rest
//! are tested on randomly mutated inputs that the frame accepts.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use prudent_core::basis::{equation_of, ContextPair};
use prudent_core::compiler::ActiveFrame;
use prudent_core::oracle::{brute_pairs, EnumerationBudget};
use prudent_core::rewrite::DeductionSystem;
use prudent_core::role::{role_input, RoleSpec};
use prudent_core::runtime::accepts;
use prudent_core::term::{subterms, Name, Polarity, PositiveStrand, Term};

/// Constant used by mutations that need a value nobody knows.
pub const FRESH: &str = "Zfresh";

fn constants_of(s: &PositiveStrand) -> Vec<Name> {
    let mut out: Vec<Name> = Vec::new();
    for m in s.messages() {
        for c in m.constants() {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out.push(FRESH.into());
    out
}

/// Change message `i` of `s` by one random edit: swap in another message,
/// rename one constant, or replace one subterm.
pub fn mutate_at(s: &PositiveStrand, i: usize, rng: &mut ChaCha8Rng) -> PositiveStrand {
    let mut msgs = s.messages().to_vec();
    let m = &msgs[i];
    let consts = constants_of(s);
    let mutated = match rng.gen_range(0..3) {
        0 if s.len() > 1 => {
            let j = (i + rng.gen_range(1..s.len())) % s.len();
            msgs[j].clone()
        }
        1 => {
            let own = m.constants();
            match own.choose(rng) {
                Some(c) => {
                    let others: Vec<&Name> = consts.iter().filter(|d| *d != c).collect();
                    let to = others.choose(rng).expect("fresh constant is always available");
                    m.replace(&Term::Const(c.clone()), &Term::Const((*to).clone()))
                }
                None => Term::Const(FRESH.into()),
            }
        }
        _ => {
            let subs: Vec<Term> = subterms(m).into_iter().collect();
            let pool: Vec<Term> =
                s.messages().iter().flat_map(|x| subterms(x).into_iter()).chain([Term::Const(FRESH.into())]).collect();
            let from = subs.choose(rng).expect("a term has subterms");
            let to = pool.choose(rng).expect("pool is not empty");
            m.replace(from, to)
        }
    };
    msgs[i] = mutated;
    PositiveStrand::new(msgs)
}

/// A random single-position mutation differing from `s`, if one is found.
pub fn random_mutant(s: &PositiveStrand, rng: &mut ChaCha8Rng) -> Option<PositiveStrand> {
    if s.is_empty() {
        return None;
    }
    for _ in 0..16 {
        let i = rng.gen_range(0..s.len());
        let m = mutate_at(s, i, rng);
        if &m != s {
            return Some(m);
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct RoleAudit {
    pub role: Name,
    pub oracle_pairs: usize,
    pub included: usize,
    pub sampled: usize,
    pub accepted_mutants: usize,
    /// Oracle pairs broken by an accepted input, with that input.
    pub violations: Vec<(ContextPair, PositiveStrand)>,
}

/// Map an input position to the frame variable it binds.
fn input_vars(f: &ActiveFrame) -> Vec<usize> {
    f.steps.iter().filter(|s| s.polarity() == Polarity::Receive).map(|s| s.var).collect()
}

pub fn audit_role(
    r: &RoleSpec,
    f: &ActiveFrame,
    d: &DeductionSystem,
    depth: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> RoleAudit {
    let input = role_input(r);
    let pairs = brute_pairs(&input, EnumerationBudget::depth(depth), d);
    let vars = input_vars(f);
    let frame_eqs: Vec<_> = f.equations().collect();
    let included = pairs
        .iter()
        .filter(|p| {
            let e = equation_of(&p.rename_holes(|i| vars[i - 1]));
            frame_eqs.contains(&&e)
        })
        .count();
    let mut audit = RoleAudit {
        role: r.name.clone(),
        oracle_pairs: pairs.len(),
        included,
        sampled: 0,
        accepted_mutants: 0,
        violations: Vec::new(),
    };
    for _ in 0..samples {
        let Some(m) = random_mutant(&input, rng) else { break };
        audit.sampled += 1;
        if !accepts(f, &m, d).map(|a| a.accepted).unwrap_or(false) {
            continue;
        }
        audit.accepted_mutants += 1;
        for p in &pairs {
            if !p.holds_on(&m, d).unwrap_or(false) && !audit.violations.iter().any(|(q, _)| q == p) {
                audit.violations.push((p.clone(), m.clone()));
            }
        }
    }
    audit
}
