//! Finite equality basis of a positive strand, the unification systems
//! derived from it, and the refinement check.
//!
//! Pairs come from three sources over the saturated knowledge:
//! repeated knowledge (a message equal to an earlier sat element), public
//! constructors that rebuild a sat element from other sat elements, and
//! rewrite steps at the root of a bounded public context. Pairs that hold
//! in the free theory (both sides normalize to the same open term) are
//! dropped since they hold on every strand.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::deduction::{saturate, KnowledgeBase};
use crate::rewrite::{normalize, substitute, DeductionSystem};
use crate::term::{dag_size, instantiate_context, name, Context, PositiveStrand, Term, TermError, Var};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextPair {
    pub left: Context,
    pub right: Context,
}

impl ContextPair {
    /// Oriented pair: larger DAG size on the left, ties broken by putting the
    /// lexicographically smaller side first. `None` for reflexive pairs.
    pub fn new(a: Context, b: Context) -> Option<Self> {
        if a == b {
            return None;
        }
        let (sa, sb) = (a.dag_size(), b.dag_size());
        let a_first = sa > sb || (sa == sb && a < b);
        Some(if a_first { ContextPair { left: a, right: b } } else { ContextPair { left: b, right: a } })
    }

    pub fn max_hole(&self) -> usize {
        self.left.max_hole().max(self.right.max_hole())
    }

    /// Rename hole `x_i` to `x_{map(i)}`. `map` must be injective.
    pub fn rename_holes(&self, map: impl Fn(usize) -> usize) -> ContextPair {
        let l = Context::trusted(rename(self.left.body(), &map));
        let r = Context::trusted(rename(self.right.body(), &map));
        ContextPair::new(l, r).expect("injective renaming keeps sides distinct")
    }

    pub fn holds_on(&self, s: &PositiveStrand, d: &DeductionSystem) -> Result<bool, TermError> {
        let l = instantiate_context(&self.left, s)?;
        let r = instantiate_context(&self.right, s)?;
        Ok(normalize(&l, d) == normalize(&r, d))
    }
}

impl fmt::Display for ContextPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.left, self.right)
    }
}

fn rename(t: &Term, map: &impl Fn(usize) -> usize) -> Term {
    match t {
        Term::Var(Var::Hole(i)) => Term::hole(map(*i)),
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| rename(a, map)).collect()),
    }
}

/// `lhs ≟ rhs` over frame variables `v_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} =? {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnificationSystem {
    pub equations: Vec<Equation>,
}

impl UnificationSystem {
    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }
}

impl fmt::Display for UnificationSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eqs: Vec<String> = self.equations.iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", eqs.join("; "))
    }
}

pub fn frame_var(i: usize) -> Term {
    Term::Var(Var::Named(name(&format!("v_{i}"))))
}

/// Parse `v_i` back to its index.
pub fn frame_index(v: &Var) -> Option<usize> {
    match v {
        Var::Named(n) => n.strip_prefix("v_")?.parse().ok().filter(|i| *i >= 1),
        Var::Hole(_) => None,
    }
}

/// Rename holes `x_i` to frame variables `v_i`.
pub fn to_frame_vars(t: &Term) -> Term {
    match t {
        Term::Var(Var::Hole(i)) => frame_var(*i),
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(to_frame_vars).collect()),
    }
}

/// Rename frame variables `v_i` back to holes `x_i`.
pub fn from_frame_vars(t: &Term) -> Term {
    match t {
        Term::Var(v) => frame_index(v).map(Term::hole).unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(from_frame_vars).collect()),
    }
}

pub fn equation_of(p: &ContextPair) -> Equation {
    Equation { lhs: to_frame_vars(p.left.body()), rhs: to_frame_vars(p.right.body()) }
}

pub fn pair_of(e: &Equation) -> ContextPair {
    ContextPair { left: Context::trusted(from_frame_vars(&e.lhs)), right: Context::trusted(from_frame_vars(&e.rhs)) }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BasisError {
    #[error("basis refers to position {needed} but the candidate has {len} messages")]
    LengthMismatch { needed: usize, len: usize },
}

fn push_pair(out: &mut BTreeSet<ContextPair>, a: Term, b: Term, d: &DeductionSystem) {
    if normalize(&a, d) == normalize(&b, d) {
        return;
    }
    if let Some(p) = ContextPair::new(Context::trusted(a), Context::trusted(b)) {
        out.insert(p);
    }
}

/// Basis pairs relative to an already saturated knowledge base.
pub fn basis_of(kb: &KnowledgeBase, d: &DeductionSystem) -> Vec<ContextPair> {
    let mut out = BTreeSet::new();
    let sat: Vec<(&Term, &Context)> = kb.entries().collect();

    // repeated knowledge
    for (i, m) in kb.source().messages().iter().enumerate() {
        if let Some(c) = kb.entries().find(|(t, _)| *t == m).map(|(_, c)| c) {
            push_pair(&mut out, Term::hole(i + 1), c.body().clone(), d);
        }
    }

    // public constructors rebuilding a known term
    for (m, c) in &sat {
        if let Term::App(f, args) = m {
            if !d.sig.is_public(f) {
                continue;
            }
            let Some(recipes) =
                args.iter().map(|a| sat.iter().find(|(t, _)| *t == a).map(|(_, c)| c.body().clone())).collect::<Option<Vec<_>>>()
            else {
                continue;
            };
            push_pair(&mut out, Term::App(f.clone(), recipes), c.body().clone(), d);
        }
    }

    // rewrite steps
    for rule in &d.rules {
        for cover in kb.root_covers(&rule.lhs, d) {
            let result = normalize(&substitute(&rule.rhs, &cover.bindings), d);
            if let Some(r) = kb.reach(&result, d) {
                push_pair(&mut out, cover.recipe, r.into_body(), d);
            }
        }
    }
    out.into_iter().collect()
}

/// `Eq(s)`: sorted, oriented, deduplicated.
pub fn equality_basis(s: &PositiveStrand, d: &DeductionSystem, bound: usize) -> Vec<ContextPair> {
    if d.is_xor() {
        return crate::xor::framed_basis(s, d).unwrap_or_default();
    }
    basis_of(&saturate(s, d, bound), d)
}

pub fn unification_system(pairs: &[ContextPair]) -> UnificationSystem {
    UnificationSystem { equations: pairs.iter().map(equation_of).collect() }
}

pub fn unification_system_of(s: &PositiveStrand, d: &DeductionSystem, bound: usize) -> UnificationSystem {
    unification_system(&equality_basis(s, d, bound))
}

/// True iff every pair of `basis` holds on `candidate`.
pub fn refines(candidate: &PositiveStrand, basis: &[ContextPair], d: &DeductionSystem) -> Result<bool, BasisError> {
    let needed = basis.iter().map(ContextPair::max_hole).max().unwrap_or(0);
    if needed > candidate.len() {
        return Err(BasisError::LengthMismatch { needed, len: candidate.len() });
    }
    for p in basis {
        if !p.holds_on(candidate, d).expect("holes checked") {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Size of the larger side, used when reporting.
pub fn pair_size(p: &ContextPair) -> usize {
    dag_size(p.left.body()).max(dag_size(p.right.body()))
}
