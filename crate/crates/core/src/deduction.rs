//! Saturation of a positive strand and the reachability algorithm for
//! subterm convergent deduction systems.
//!
//! `sat(s)` is the least set holding the (normalized) strand messages, closed
//! under public constructors that stay inside `st(s)`, and closed under
//! rewrite steps `C[N_1..N_k] -> M` where `C` is a small public context and
//! `M` lands in `st(s)`. Each element carries
//! one recipe: a context over the strand positions evaluating to it.
//!
//! Rewrite steps are found by matching rule left sides against the knowledge
//! (see [`KnowledgeBase::root_covers`]): the top of the left side is built by
//! public symbols and the remaining subpatterns are sat elements. Only such
//! root steps can turn sat elements into new normal forms, so this covers
//! every bounded context whose instance rewrites.

use std::collections::BTreeSet;

use indexmap::IndexMap;

use crate::rewrite::{match_term, normalize, substitute, Bindings, DeductionSystem};
use crate::term::{collect_subterms, dag_size, Context, PositiveStrand, Term};

#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    source: PositiveStrand,
    sat: IndexMap<Term, Context>,
    subterms: BTreeSet<Term>,
    ground_rhs: BTreeSet<Term>,
    bound: usize,
}

/// A way to build an instance of a rule left side from the knowledge.
#[derive(Clone, Debug)]
pub struct Cover {
    pub bindings: Bindings,
    /// Context over strand positions evaluating to the instance.
    pub recipe: Term,
    /// The public part of the cover, sat elements abstracted to holes.
    pub skeleton: Term,
}

pub(crate) fn recipe_key(c: &Term) -> (usize, Term) {
    (dag_size(c), c.clone())
}

impl KnowledgeBase {
    pub fn source(&self) -> &PositiveStrand {
        &self.source
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Sat elements in insertion order with their recipes.
    pub fn entries(&self) -> impl Iterator<Item = (&Term, &Context)> {
        self.sat.iter()
    }

    pub fn len(&self) -> usize {
        self.sat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sat.is_empty()
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.sat.contains_key(t)
    }

    pub(crate) fn recipe(&self, t: &Term) -> Option<&Context> {
        self.sat.get(t)
    }

    /// `st(s)` of the normalized strand.
    pub fn strand_subterms(&self) -> &BTreeSet<Term> {
        &self.subterms
    }

    /// `st(s)` or a ground right-hand side of the theory.
    pub fn admits(&self, t: &Term) -> bool {
        self.subterms.contains(t) || self.ground_rhs.contains(t)
    }

    fn sat_hole(&self, idx: usize) -> Term {
        Term::hole(idx + 1)
    }

    fn cover_pattern(&self, pattern: &Term, binds: Bindings, d: &DeductionSystem, out: &mut Vec<Cover>) {
        match pattern {
            Term::Var(v) => match binds.get(v) {
                Some(val) => {
                    if let Some((idx, _, recipe)) = self.sat.get_full(val) {
                        out.push(Cover { recipe: recipe.body().clone(), skeleton: self.sat_hole(idx), bindings: binds });
                    }
                }
                None => {
                    for (idx, (n, recipe)) in self.sat.iter().enumerate() {
                        let mut b = binds.clone();
                        b.insert(v.clone(), n.clone());
                        out.push(Cover { recipe: recipe.body().clone(), skeleton: self.sat_hole(idx), bindings: b });
                    }
                }
            },
            Term::Const(_) => {
                if let Some((idx, _, recipe)) = self.sat.get_full(pattern) {
                    out.push(Cover { recipe: recipe.body().clone(), skeleton: self.sat_hole(idx), bindings: binds });
                }
            }
            Term::App(..) => {
                for (idx, (n, recipe)) in self.sat.iter().enumerate() {
                    let mut b = binds.clone();
                    if match_term(pattern, n, &mut b) {
                        out.push(Cover { recipe: recipe.body().clone(), skeleton: self.sat_hole(idx), bindings: b });
                    }
                }
                self.cover_public(pattern, binds, d, out);
            }
        }
    }

    fn cover_public(&self, pattern: &Term, binds: Bindings, d: &DeductionSystem, out: &mut Vec<Cover>) {
        let Term::App(f, args) = pattern else { return };
        if !d.sig.is_public(f) {
            return;
        }
        let mut partial: Vec<(Bindings, Vec<Term>, Vec<Term>)> = vec![(binds, Vec::new(), Vec::new())];
        for a in args {
            let mut next = Vec::new();
            for (b, recipes, skels) in partial {
                let mut covers = Vec::new();
                self.cover_pattern(a, b, d, &mut covers);
                for c in covers {
                    let mut r = recipes.clone();
                    r.push(c.recipe);
                    let mut s = skels.clone();
                    s.push(c.skeleton);
                    next.push((c.bindings, r, s));
                }
            }
            partial = next;
            if partial.is_empty() {
                return;
            }
        }
        for (b, recipes, skels) in partial {
            out.push(Cover {
                bindings: b,
                recipe: Term::App(f.clone(), recipes),
                skeleton: Term::App(f.clone(), skels),
            });
        }
    }

    /// All ways to build an instance of `lhs` whose root symbol is applied
    /// publicly, with skeleton DAG size within the bound.
    pub fn root_covers(&self, lhs: &Term, d: &DeductionSystem) -> Vec<Cover> {
        let mut out = Vec::new();
        self.cover_public(lhs, Bindings::new(), d, &mut out);
        out.retain(|c| dag_size(&c.skeleton) <= self.bound);
        out
    }

    /// Recipe for a normalized deducible term: its sat recipe if any, else
    /// built top-down through public symbols.
    pub(crate) fn compose(&self, t: &Term, d: &DeductionSystem) -> Option<Term> {
        if let Some(c) = self.sat.get(t) {
            return Some(c.body().clone());
        }
        match t {
            Term::App(f, args) if d.sig.is_public(f) => {
                let args = args.iter().map(|a| self.compose(a, d)).collect::<Option<Vec<_>>>()?;
                Some(Term::App(f.clone(), args))
            }
            _ => None,
        }
    }

    /// Reachability relative to this knowledge base.
    pub fn reach(&self, t: &Term, d: &DeductionSystem) -> Option<Context> {
        self.compose(&normalize(t, d), d).map(Context::trusted)
    }
}

/// Compute `sat(s)` with one recipe per element.
pub fn saturate(s: &PositiveStrand, d: &DeductionSystem, bound: usize) -> KnowledgeBase {
    let normalized: Vec<Term> = s.messages().iter().map(|m| normalize(m, d)).collect();
    let mut subterms = BTreeSet::new();
    for m in &normalized {
        collect_subterms(m, &mut subterms);
    }
    let ground_rhs = d.ground_rhs().into_iter().map(|r| normalize(&r, d)).collect();

    let mut kb = KnowledgeBase {
        source: PositiveStrand::new(normalized.clone()),
        sat: IndexMap::new(),
        subterms,
        ground_rhs,
        bound,
    };
    for (i, m) in normalized.iter().enumerate() {
        kb.sat.entry(m.clone()).or_insert_with(|| Context::hole(i + 1));
    }

    loop {
        let mut candidates: IndexMap<Term, Term> = IndexMap::new();
        let mut offer = |t: Term, recipe: Term| match candidates.get_mut(&t) {
            Some(best) => {
                if recipe_key(&recipe) < recipe_key(best) {
                    *best = recipe;
                }
            }
            None => {
                candidates.insert(t, recipe);
            }
        };

        // public constructors inside st(s)
        for t in &kb.subterms {
            if kb.sat.contains_key(t) {
                continue;
            }
            if let Term::App(f, args) = t {
                if !d.sig.is_public(f) {
                    continue;
                }
                let recipes: Option<Vec<Term>> = args.iter().map(|a| kb.sat.get(a).map(|c| c.body().clone())).collect();
                if let Some(recipes) = recipes {
                    offer(t.clone(), Term::App(f.clone(), recipes));
                }
            }
        }

        // rewrite steps at the root of a bounded public context
        for rule in &d.rules {
            for cover in kb.root_covers(&rule.lhs, d) {
                let result = normalize(&substitute(&rule.rhs, &cover.bindings), d);
                if !kb.sat.contains_key(&result) && kb.subterms.contains(&result) {
                    offer(result, cover.recipe);
                }
            }
        }

        if candidates.is_empty() {
            break;
        }
        let mut fresh: Vec<(Term, Term)> = candidates.into_iter().collect();
        fresh.sort();
        for (t, recipe) in fresh {
            kb.sat.insert(t, Context::trusted(recipe));
        }
    }
    kb
}

pub fn recipe_of(kb: &KnowledgeBase, m: &Term, d: &DeductionSystem) -> Option<Context> {
    kb.recipe(&normalize(m, d)).cloned()
}

/// A context `C` with `C·s =E t`, or `None`.
pub fn reach(s: &PositiveStrand, t: &Term, d: &DeductionSystem, bound: usize) -> Option<Context> {
    saturate(s, d, bound).reach(t, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::equal_mod;
    use crate::term::{instantiate_context, parse_context, parse_term};

    fn dy() -> DeductionSystem {
        DeductionSystem::dolev_yao()
    }

    fn t(s: &str) -> Term {
        parse_term(s, &dy().sig).unwrap()
    }

    fn strand(ms: &[&str]) -> PositiveStrand {
        PositiveStrand::new(ms.iter().map(|m| t(m)).collect())
    }

    fn ctx(s: &str) -> Context {
        parse_context(s, &dy().sig).unwrap()
    }

    fn nspk_a_input() -> PositiveStrand {
        strand(&["Na", "A", "B", "KA", "KB", "inv(KA)", "msg(B,enc(pair(Na,Nb),KA))"])
    }

    #[test]
    fn nspk_initiator_saturation() {
        let d = dy();
        let s = nspk_a_input();
        let kb = saturate(&s, &d, d.default_bound());
        assert_eq!(recipe_of(&kb, &t("Na"), &d), Some(ctx("x_1")));
        assert_eq!(recipe_of(&kb, &t("Nb"), &d), Some(ctx("proj2(dec(payload(x_7), x_6))")));
        assert_eq!(recipe_of(&kb, &t("z"), &d), None);
        for (m, c) in kb.entries() {
            assert!(equal_mod(&instantiate_context(c, &s).unwrap(), m, &d), "{m} via {c}");
            assert!(crate::term::is_context(c.body(), &d.sig));
            assert!(kb.admits(m));
        }
    }

    #[test]
    fn undecryptable_ciphertext_stays_opaque() {
        let d = dy();
        let kb = saturate(&strand(&["enc(a,k)"]), &d, 5);
        let elems: Vec<&Term> = kb.entries().map(|(m, _)| m).collect();
        assert_eq!(elems, vec![&t("enc(a,k)")]);
    }

    #[test]
    fn decryption_with_inverse_key() {
        let d = dy();
        let kb = saturate(&strand(&["enc(a,k)", "inv(k)"]), &d, 5);
        assert_eq!(recipe_of(&kb, &t("a"), &d), Some(ctx("dec(x_1, x_2)")));
    }

    #[test]
    fn bound_limits_rewrite_contexts() {
        let d = dy();
        // dec(enc(x,y),inv(y)) as a cover has skeleton dec(x_1,x_2): size 3
        let kb = saturate(&strand(&["enc(a,k)", "inv(k)"]), &d, 2);
        assert_eq!(recipe_of(&kb, &t("a"), &d), None);
    }

    #[test]
    fn reach_examples() {
        let d = dy();
        let b = d.default_bound();
        let prefix = nspk_a_input().prefix(6);
        assert_eq!(
            reach(&prefix, &t("msg(B, enc(pair(A,Na),KB))"), &d, b),
            Some(ctx("msg(x_3, enc(pair(x_2, x_1), x_5))"))
        );
        assert_eq!(
            reach(&nspk_a_input(), &t("msg(B, enc(Nb, KB))"), &d, b),
            Some(ctx("msg(x_3, enc(proj2(dec(payload(x_7), x_6)), x_5))"))
        );
        assert_eq!(reach(&strand(&["a"]), &t("b"), &d, b), None);
        assert_eq!(reach(&strand(&["a"]), &t("true"), &d, b), Some(ctx("true")));
        // targets are normalized first
        assert_eq!(reach(&strand(&["a", "b"]), &t("proj1(pair(b,a))"), &d, b), Some(ctx("x_2")));
    }

    #[test]
    fn private_symbols_are_not_constructible() {
        let d = dy();
        assert_eq!(reach(&strand(&["k"]), &t("inv(k)"), &d, 5), None);
    }
}
