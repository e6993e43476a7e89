//! Brute-force ground truth: enumerate every small context and evaluate it.
//!
//! Contexts are generated level by level in DAG size. A context of size `n`
//! is `f(C_1..C_k)` with the `C_i` drawn from smaller levels such that their
//! subterm sets cover exactly `n - 1` distinct nodes. Only contexts in normal
//! form are kept, so E-equal duplicates never appear twice. Within a level
//! contexts come out in term order, giving size-then-lexicographic order, and
//! generation stops as soon as the count budget is spent.

use std::collections::HashMap;

use crate::basis::ContextPair;
use crate::rewrite::{normalize, DeductionSystem};
use crate::term::{Context, PositiveStrand, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_dag_size: usize,
    pub max_count: usize,
}

impl EnumerationBudget {
    pub fn new(max_dag_size: usize, max_count: usize) -> Self {
        assert!(max_dag_size > 0 && max_count > 0, "budget limits must be positive");
        EnumerationBudget { max_dag_size, max_count }
    }

    /// Contexts up to DAG size `depth`, with the default count cap.
    pub fn depth(depth: usize) -> Self {
        Self::new(depth, 200_000)
    }
}

struct Node {
    term: Term,
    /// Sorted ids of all subterm nodes, itself included.
    subterms: Vec<u32>,
    /// Normal form of the context applied to the strand, when there is one.
    value: Option<Term>,
}

fn union_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        n += 1;
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    n + (a.len() - i) + (b.len() - j)
}

fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Contexts of earlier levels, indexed for building the next one.
struct Levels {
    nodes: Vec<Node>,
    /// Node ids by DAG size.
    by_size: Vec<Vec<u32>>,
    /// All node ids in term order.
    sorted: Vec<u32>,
}

impl Levels {
    fn subterms(&self, id: u32) -> &[u32] {
        &self.nodes[id as usize].subterms
    }

    /// Feeds `sink` every argument tuple of length `arity` whose subterms
    /// cover exactly `n - 1` nodes, in lexicographic term order. Stops early
    /// when `sink` returns `false`, and reports whether it did.
    fn tuples(
        &self,
        arity: usize,
        n: usize,
        prefix: &mut Vec<u32>,
        cover: &[u32],
        sink: &mut dyn FnMut(&[u32], Vec<u32>) -> bool,
    ) -> bool {
        let target = n - 1;
        if prefix.len() + 1 < arity {
            for &a in &self.sorted {
                if union_len(cover, self.subterms(a)) > target {
                    continue;
                }
                prefix.push(a);
                let more = self.tuples(arity, n, prefix, &union(cover, self.subterms(a)), sink);
                prefix.pop();
                if !more {
                    return false;
                }
            }
            return true;
        }
        let mut last: Vec<u32> = if cover.len() == target {
            // nothing new may be added: the last argument is already a subterm
            cover.to_vec()
        } else {
            let smallest = target - cover.len();
            (smallest..=target)
                .flat_map(|j| self.by_size.get(j).into_iter().flatten())
                .copied()
                .filter(|&b| union_len(cover, self.subterms(b)) == target)
                .collect()
        };
        last.sort_by(|a, b| self.nodes[*a as usize].term.cmp(&self.nodes[*b as usize].term));
        for b in last {
            prefix.push(b);
            let more = sink(prefix, union(cover, self.subterms(b)));
            prefix.pop();
            if !more {
                return false;
            }
        }
        true
    }
}

/// Runs the enumeration, calling `visit` on each context (with its value on
/// `strand` when given) in order until it returns `false` or the budget runs out.
fn generate(
    holes: usize,
    budget: EnumerationBudget,
    d: &DeductionSystem,
    strand: Option<&PositiveStrand>,
    mut visit: impl FnMut(&Term, Option<&Term>) -> bool,
) {
    let mut levels = Levels { nodes: Vec::new(), by_size: vec![Vec::new()], sorted: Vec::new() };
    let mut emitted = 0usize;
    let mut symbols: Vec<(String, usize)> =
        d.sig.public_symbols().map(|s| (s.name.to_string(), s.arity)).collect();
    symbols.sort();

    for n in 1..=budget.max_dag_size {
        let mut fresh: Vec<Node> = Vec::new();
        let mut stopped = false;
        let base = levels.nodes.len() as u32;
        // emit one candidate; false once the enumeration must stop
        let mut offer = |term: Term, cover: Vec<u32>, value: Option<Term>, fresh: &mut Vec<Node>| -> bool {
            if emitted == budget.max_count {
                return false;
            }
            emitted += 1;
            if !visit(&term, value.as_ref()) {
                return false;
            }
            if n < budget.max_dag_size {
                let mut subterms = cover;
                subterms.push(base + fresh.len() as u32);
                fresh.push(Node { term, subterms, value });
            }
            true
        };
        if n == 1 {
            let mut atoms: Vec<Term> = (1..=holes).map(Term::hole).collect();
            atoms.extend(symbols.iter().filter(|(_, a)| *a == 0).map(|(f, _)| Term::app(f, vec![])));
            atoms.sort();
            for t in atoms {
                let value = strand.map(|s| normalize(&crate::term::plug(&t, s.messages()).expect("holes in range"), d));
                if !offer(t, Vec::new(), value, &mut fresh) {
                    stopped = true;
                    break;
                }
            }
        } else {
            for (f, arity) in symbols.iter().filter(|(_, a)| *a > 0) {
                let nodes = &levels.nodes;
                let mut sink = |args: &[u32], cover: Vec<u32>| -> bool {
                    let t = Term::app(f, args.iter().map(|i| nodes[*i as usize].term.clone()).collect());
                    if normalize(&t, d) != t {
                        return true;
                    }
                    let value = strand.map(|_| {
                        let vs = args.iter().map(|i| nodes[*i as usize].value.clone().expect("values are kept")).collect();
                        normalize(&Term::app(f, vs), d)
                    });
                    offer(t, cover, value, &mut fresh)
                };
                if !levels.tuples(*arity, n, &mut Vec::new(), &[], &mut sink) {
                    stopped = true;
                    break;
                }
            }
        }
        if stopped || n == budget.max_dag_size {
            return;
        }
        let ids: Vec<u32> = (base..base + fresh.len() as u32).collect();
        levels.nodes.extend(fresh);
        levels.by_size.push(ids.clone());
        levels.sorted.extend(ids);
        let nodes = &levels.nodes;
        levels.sorted.sort_by(|a, b| nodes[*a as usize].term.cmp(&nodes[*b as usize].term));
    }
}

/// All normal-form contexts over `x_1..x_holes` within the budget.
pub fn enumerate_contexts(holes: usize, budget: EnumerationBudget, d: &DeductionSystem) -> Vec<Context> {
    let mut out = Vec::new();
    generate(holes, budget, d, None, |t, _| {
        out.push(Context::trusted(t.clone()));
        true
    });
    out
}

/// First enumerated context `C` with `C·s =E t`.
pub fn brute_reach(s: &PositiveStrand, t: &Term, budget: EnumerationBudget, d: &DeductionSystem) -> Option<Context> {
    let target = normalize(t, d);
    let mut found = None;
    generate(s.len(), budget, d, Some(s), |c, v| {
        if v == Some(&target) {
            found = Some(Context::trusted(c.clone()));
            false
        } else {
            true
        }
    });
    found
}

/// Equalities among enumerated contexts on `s`: within each group of
/// contexts with equal value, the first one paired with every other.
pub fn brute_pairs(s: &PositiveStrand, budget: EnumerationBudget, d: &DeductionSystem) -> Vec<ContextPair> {
    let mut first: HashMap<Term, Term> = HashMap::new();
    let mut out = Vec::new();
    generate(s.len(), budget, d, Some(s), |c, v| {
        let v = v.expect("strand given").clone();
        match first.get(&v) {
            Some(rep) => out.extend(ContextPair::new(Context::trusted(rep.clone()), Context::trusted(c.clone()))),
            None => {
                first.insert(v, c.clone());
            }
        }
        true
    });
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{parse_term, Signature, Visibility};

    fn dy() -> DeductionSystem {
        DeductionSystem::dolev_yao()
    }

    fn strand(ms: &[&str]) -> PositiveStrand {
        PositiveStrand::new(ms.iter().map(|m| parse_term(m, &dy().sig).unwrap()).collect())
    }

    fn small(public_constant: bool) -> DeductionSystem {
        let mut sig = Signature::new();
        sig.declare("f", 1, Visibility::Public).unwrap();
        if public_constant {
            sig.declare("0", 0, Visibility::Public).unwrap();
        }
        DeductionSystem::new("small", sig, vec![])
    }

    #[test]
    fn enumeration_order() {
        let cs = enumerate_contexts(1, EnumerationBudget::new(2, 100), &small(false));
        let shown: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
        assert_eq!(shown, ["x_1", "f(x_1)"]);
        let cs = enumerate_contexts(0, EnumerationBudget::new(1, 100), &small(true));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].to_string(), "0");
        let cs = enumerate_contexts(3, EnumerationBudget::new(1, 100), &small(false));
        assert_eq!(cs, vec![Context::hole(1), Context::hole(2), Context::hole(3)]);
    }

    #[test]
    fn sharing_counts_once() {
        let d = dy();
        let cs = enumerate_contexts(1, EnumerationBudget::new(2, 1000), &d);
        assert!(cs.iter().any(|c| c.to_string() == "pair(x_1,x_1)"));
        assert!(cs.iter().all(|c| c.dag_size() <= 2));
        // proj1(pair(x_1,x_1)) is not in normal form
        let cs = enumerate_contexts(1, EnumerationBudget::new(3, 100_000), &d);
        assert!(!cs.iter().any(|c| c.to_string() == "proj1(pair(x_1,x_1))"));
        assert!(cs.iter().any(|c| c.to_string() == "pair(x_1,proj1(x_1))"));
    }

    #[test]
    fn count_cap() {
        let cs = enumerate_contexts(2, EnumerationBudget::new(4, 10), &dy());
        assert_eq!(cs.len(), 10);
        let again = enumerate_contexts(2, EnumerationBudget::new(4, 10), &dy());
        assert_eq!(cs, again);
    }

    #[test]
    fn reach_examples() {
        let d = dy();
        let t = |s: &str| parse_term(s, &d.sig).unwrap();
        let b = EnumerationBudget::depth(4);
        assert_eq!(brute_reach(&strand(&["enc(a,k)", "inv(k)"]), &t("a"), b, &d).unwrap().to_string(), "dec(x_1,x_2)");
        assert_eq!(brute_reach(&strand(&["a"]), &t("a"), b, &d), Some(Context::hole(1)));
        assert_eq!(brute_reach(&strand(&["a"]), &t("b"), b, &d), None);
    }

    #[test]
    fn pair_examples() {
        let d = dy();
        let b = EnumerationBudget::depth(3);
        let pairs = brute_pairs(&strand(&["a", "a"]), b, &d);
        assert!(pairs.iter().any(|p| p.to_string() == "(x_1, x_2)"));
        for p in &pairs {
            assert!(p.holds_on(&strand(&["a", "a"]), &d).unwrap());
        }
    }

    #[test]
    fn distinct_atoms_without_tests() {
        let mut d = dy();
        d.rules.retain(|r| !matches!(r.lhs.head(), Some("symtest" | "pairtest")));
        let mut sig = Signature::new();
        for s in d.sig.symbols().filter(|s| !matches!(&*s.name, "symtest" | "pairtest")) {
            sig.declare(&s.name, s.arity, s.visibility).unwrap();
        }
        d.sig = sig;
        assert!(brute_pairs(&strand(&["a", "b"]), EnumerationBudget::depth(2), &d).is_empty());
    }
}
