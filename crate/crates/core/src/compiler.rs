//! Compile a role specification into an active frame.
//!
//! Frame variables `v_i` are indexed by strand position. A send at position
//! `i` gets the recipe `reach(s^{i-1}, M_i)`; a reception at position `i`
//! gets the unification system of `Eq(s^i)`, where `s^i` is the positive
//! strand of the first `i` messages (sent ones included, since the agent
//! knows what it sent).

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::basis::{equality_basis, unification_system, ContextPair, Equation, UnificationSystem};
use crate::deduction;
use crate::rewrite::DeductionSystem;
use crate::role::RoleSpec;
use crate::term::{Context, Name, Polarity, PositiveStrand, Strand, Term};
use crate::xor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EmitMode {
    /// Each reception carries only equations not emitted before.
    #[default]
    Delta,
    /// Each reception carries the whole system of its prefix.
    Full,
    /// No checks at all. Produces imprudent frames, for auditing.
    None,
}

impl EmitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmitMode::Delta => "delta",
            EmitMode::Full => "full",
            EmitMode::None => "none",
        }
    }
}

impl std::str::FromStr for EmitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delta" => Ok(EmitMode::Delta),
            "full" => Ok(EmitMode::Full),
            "none" => Ok(EmitMode::None),
            other => Err(format!("unknown emit mode `{other}` (expected delta, full or none)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Saturation bound; the theory default when absent.
    pub bound: Option<usize>,
    pub emit: EmitMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// `!v_i` with `v_i ≟ recipe`, the recipe over holes `x_1..x_{i-1}`.
    Send { recipe: Context },
    /// `?v_i` guarded by `checks` over `v_1..v_i`.
    Receive { checks: UnificationSystem },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameStep {
    pub var: usize,
    pub kind: StepKind,
    /// The message the role expects at this step. Display and diagnostics only.
    pub ideal: Term,
    /// Human-readable variable name such as `v_Na` or `v_r`.
    pub alias: String,
}

impl FrameStep {
    pub fn polarity(&self) -> Polarity {
        match self.kind {
            StepKind::Send { .. } => Polarity::Send,
            StepKind::Receive { .. } => Polarity::Receive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveFrame {
    pub role: Name,
    pub steps: Vec<FrameStep>,
}

impl ActiveFrame {
    pub fn receive_count(&self) -> usize {
        self.steps.iter().filter(|s| s.polarity() == Polarity::Receive).count()
    }

    /// All reception equations, in step order.
    pub fn equations(&self) -> impl Iterator<Item = &Equation> {
        self.steps.iter().flat_map(|s| match &s.kind {
            StepKind::Receive { checks } => checks.equations.as_slice(),
            StepKind::Send { .. } => &[],
        })
    }

    /// Alias of `v_i` for display.
    pub fn alias(&self, i: usize) -> Option<&str> {
        self.steps.get(i.checked_sub(1)?).map(|s| s.alias.as_str())
    }

    /// Render a term over `v_i`/`x_i` using aliases.
    pub fn render(&self, t: &Term) -> String {
        let mut t = crate::basis::from_frame_vars(t);
        for (i, s) in self.steps.iter().enumerate().rev() {
            t = t.replace(&Term::hole(i + 1), &Term::var(&s.alias));
        }
        t.to_string()
    }
}

impl fmt::Display for ActiveFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            match &s.kind {
                StepKind::Send { recipe } => {
                    writeln!(f, "!{} with {} \u{225f} {}", s.alias, s.alias, self.render(recipe.body()))?
                }
                StepKind::Receive { checks } => {
                    let eqs: Vec<String> = checks
                        .equations
                        .iter()
                        .map(|e| format!("{} \u{225f} {}", self.render(&e.lhs), self.render(&e.rhs)))
                        .collect();
                    if eqs.is_empty() {
                        writeln!(f, "?{}", s.alias)?
                    } else {
                        writeln!(f, "?{} with {}", s.alias, eqs.join(", "))?
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("role {role} is not executable: step {step} cannot build {message}")]
    NotExecutable { role: String, step: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Executability {
    pub executable: bool,
    /// Recipes of the sends that could be built, in order.
    pub witnesses: Vec<Context>,
    /// First send that could not be built: (step, message).
    pub failure: Option<(usize, Term)>,
}

fn reach_in(s: &PositiveStrand, t: &Term, d: &DeductionSystem, bound: usize) -> Option<Context> {
    if d.is_xor() {
        xor::framed_reach(s, t, d)
    } else {
        deduction::reach(s, t, d, bound)
    }
}

fn aliases(r: &RoleSpec) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let (mut received, mut sent) = (0, 0);
    for step in r.strand.steps() {
        let base = match (&step.message, step.polarity) {
            (Term::Const(c), _) => c.to_string(),
            (Term::App(f, args), _) if args.iter().all(|a| matches!(a, Term::Const(_))) && !args.is_empty() && &**f != "msg" => {
                std::iter::once(f.to_string()).chain(args.iter().map(|a| a.to_string())).collect()
            }
            (_, Polarity::Receive) => {
                received += 1;
                if received == 1 { "r".into() } else { format!("r{received}") }
            }
            (_, Polarity::Send) => {
                sent += 1;
                if sent == 1 { "s".into() } else { format!("s{sent}") }
            }
        };
        let mut alias = format!("v_{base}");
        if out.contains(&alias) {
            alias = format!("{alias}_{}", out.len() + 1);
        }
        out.push(alias);
    }
    out
}

pub fn executability_check(r: &RoleSpec, d: &DeductionSystem, bound: usize) -> Executability {
    let mut witnesses = Vec::new();
    let messages: Vec<Term> = r.strand.steps().iter().map(|s| s.message.clone()).collect();
    for (i, step) in r.strand.steps().iter().enumerate() {
        if step.polarity == Polarity::Send {
            let prefix = PositiveStrand::new(messages[..i].to_vec());
            match reach_in(&prefix, &step.message, d, bound) {
                Some(c) => witnesses.push(c),
                None => {
                    return Executability { executable: false, witnesses, failure: Some((i + 1, step.message.clone())) }
                }
            }
        }
    }
    Executability { executable: true, witnesses, failure: None }
}

pub fn compile_role(r: &RoleSpec, d: &DeductionSystem, opts: CompileOptions) -> Result<ActiveFrame, CompileError> {
    let bound = opts.bound.unwrap_or_else(|| d.default_bound());
    let messages: Vec<Term> = r.strand.steps().iter().map(|s| s.message.clone()).collect();
    let names = aliases(r);
    let mut emitted: BTreeSet<ContextPair> = BTreeSet::new();
    let mut steps = Vec::new();
    for (i, step) in r.strand.steps().iter().enumerate() {
        let kind = match step.polarity {
            Polarity::Send => {
                let prefix = PositiveStrand::new(messages[..i].to_vec());
                let recipe = reach_in(&prefix, &step.message, d, bound).ok_or_else(|| CompileError::NotExecutable {
                    role: r.name.to_string(),
                    step: i + 1,
                    message: step.message.to_string(),
                })?;
                StepKind::Send { recipe }
            }
            Polarity::Receive => {
                let pairs = match opts.emit {
                    EmitMode::None => Vec::new(),
                    EmitMode::Full => equality_basis(&PositiveStrand::new(messages[..=i].to_vec()), d, bound),
                    EmitMode::Delta => {
                        let all = equality_basis(&PositiveStrand::new(messages[..=i].to_vec()), d, bound);
                        let fresh: Vec<ContextPair> = all.into_iter().filter(|p| !emitted.contains(p)).collect();
                        emitted.extend(fresh.iter().cloned());
                        fresh
                    }
                };
                StepKind::Receive { checks: unification_system(&pairs) }
            }
        };
        steps.push(FrameStep { var: i + 1, kind, ideal: step.message.clone(), alias: names[i].clone() });
    }
    Ok(ActiveFrame { role: r.name.clone(), steps })
}

/// The strand a frame is meant to produce, read back from its metadata.
pub fn ideal_strand(f: &ActiveFrame) -> Strand {
    Strand::new(
        f.steps
            .iter()
            .map(|s| crate::term::Step { polarity: s.polarity(), message: s.ideal.clone() })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narration::parse_narration;
    use crate::rewrite::{equal_mod, TheoryStore};
    use crate::role::extract_roles;
    use crate::term::{parse_term_in, VarScope};

    const NSPK: &str = "protocol NSPK\ntheory dolev_yao\nA -> B : enc(pair(A,Na),KB)\nB -> A : enc(pair(Na,Nb),KA)\nA -> B : enc(Nb,KB)\nA knows A, B, KA, KB, inv(KA)\nB knows A, B, KA, KB, inv(KB)\nend\n";

    fn roles(src: &str) -> (Vec<RoleSpec>, DeductionSystem) {
        let n = parse_narration(src, &TheoryStore::with_builtins()).unwrap();
        let d = crate::narration::narration_theory(&n.theory_name, &TheoryStore::with_builtins()).unwrap();
        (extract_roles(&n).unwrap(), d)
    }

    fn ctx(s: &str, d: &DeductionSystem) -> Term {
        parse_term_in(s, &d.sig, VarScope::Holes).unwrap()
    }

    #[test]
    fn nspk_initiator_frame() {
        let (rs, d) = roles(NSPK);
        let f = compile_role(&rs[0], &d, CompileOptions::default()).unwrap();
        assert_eq!(f.steps.len(), 9);
        let StepKind::Send { recipe } = &f.steps[6].kind else { panic!() };
        assert!(equal_mod(recipe.body(), &ctx("msg(x_3, enc(pair(x_2, x_1), x_5))", &d), &d));
        let StepKind::Send { recipe } = &f.steps[8].kind else { panic!() };
        assert!(equal_mod(recipe.body(), &ctx("msg(x_3, enc(proj2(dec(payload(x_8), x_6)), x_5))", &d), &d));
        let pairs: Vec<ContextPair> = f.equations().map(crate::basis::pair_of).collect();
        let wanted = |a: &str, b: &str| ContextPair::new(Context::trusted(ctx(a, &d)), Context::trusted(ctx(b, &d))).unwrap();
        assert!(pairs.contains(&wanted("partner(x_8)", "x_3")));
        assert!(pairs.contains(&wanted("proj1(dec(payload(x_8), x_6))", "x_1")));
        assert_eq!(f.alias(8), Some("v_r"));
        assert_eq!(f.alias(6), Some("v_invKA"));
        assert!(f.to_string().contains("partner(v_r) \u{225f} v_B"));
    }

    #[test]
    fn delta_is_a_partition_of_full() {
        let (rs, d) = roles(NSPK);
        for r in &rs {
            let delta = compile_role(r, &d, CompileOptions { emit: EmitMode::Delta, ..Default::default() }).unwrap();
            let full = compile_role(r, &d, CompileOptions { emit: EmitMode::Full, ..Default::default() }).unwrap();
            let a: BTreeSet<&Equation> = delta.equations().collect();
            let b: BTreeSet<&Equation> = full.equations().collect();
            assert_eq!(a, b);
            assert!(delta.equations().count() <= full.equations().count());
        }
    }

    #[test]
    fn non_executable_role() {
        let (rs, d) = roles("protocol P\ntheory dolev_yao\nA -> B : K\nA knows A, B\nB knows B\nend\n");
        // K is a nonce of A, so A can build it
        assert!(compile_role(&rs[0], &d, CompileOptions::default()).is_ok());
        let (rs, d) = roles("protocol P\ntheory dolev_yao\nA -> B : K\nA knows A\nB knows B\nend\n");
        // but A does not know the name of B
        assert!(compile_role(&rs[0], &d, CompileOptions::default()).is_err());
        let (rs, d) = roles("protocol P\ntheory dolev_yao\nA -> B : enc(N,K)\nB -> A : N\nA knows A, K\nB knows B\nend\n");
        let err = compile_role(&rs[1], &d, CompileOptions::default()).unwrap_err();
        assert!(matches!(err, CompileError::NotExecutable { step: 3, .. }), "{err}");
        let ex = executability_check(&rs[1], &d, 5);
        assert!(!ex.executable);
        assert_eq!(ex.failure.unwrap().0, 3);
    }

    #[test]
    fn receive_only_role_is_executable() {
        let (rs, d) = roles(NSPK);
        let r = RoleSpec {
            name: "C".into(),
            params: vec![],
            nonces: vec![],
            strand: Strand::new(rs[0].strand.steps().iter().filter(|s| s.polarity == Polarity::Receive).cloned().collect()),
        };
        let f = compile_role(&r, &d, CompileOptions::default()).unwrap();
        assert!(f.steps.iter().all(|s| s.polarity() == Polarity::Receive));
        assert!(executability_check(&r, &d, 5).executable);
    }

    #[test]
    fn executability_witnesses() {
        let (rs, d) = roles(NSPK);
        let a = executability_check(&rs[0], &d, 5);
        assert!(a.executable);
        assert_eq!(a.witnesses.len(), 2);
        assert!(executability_check(&rs[1], &d, 5).executable);
    }

    #[test]
    fn compilation_is_deterministic() {
        let (rs, d) = roles(NSPK);
        let a = compile_role(&rs[1], &d, CompileOptions::default()).unwrap();
        let b = compile_role(&rs[1], &d, CompileOptions::default()).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        assert_eq!(a, b);
    }

    #[test]
    fn emit_modes_parse() {
        assert_eq!("full".parse::<EmitMode>(), Ok(EmitMode::Full));
        assert!("bogus".parse::<EmitMode>().is_err());
    }
}
