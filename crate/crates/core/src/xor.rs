//! Exclusive or over free constants, decided by linear algebra over GF(2).
//!
//! A message `a_1 ⊕ … ⊕ a_k` is the bit vector with ones at its atoms. A
//! recipe is a subset of the known messages whose sum is the target, and the
//! equalities observable on a strand are the linear dependencies among its
//! messages (the nullspace of the matrix whose columns are the messages).
//!
//! Narration roles wrap payloads as `msg(A, p)`. [`XorKnowledge`] handles this
//! by splitting each wrapped message into its two projections and treating
//! those as the generators of the vector space.

use std::collections::BTreeSet;
use std::fmt;

use crate::basis::ContextPair;
use crate::rewrite::{build_xor, DeductionSystem, XOR, ZERO};
use crate::term::{Context, Name, PositiveStrand, Term};

/// A sum of atoms, possibly with repetitions until canonicalized.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct XorTerm {
    atoms: Vec<Name>,
}

impl XorTerm {
    pub fn new<I: IntoIterator<Item = Name>>(atoms: I) -> Self {
        XorTerm { atoms: atoms.into_iter().collect() }
    }

    pub fn zero() -> Self {
        XorTerm { atoms: Vec::new() }
    }

    pub fn atom(a: &str) -> Self {
        XorTerm { atoms: vec![a.into()] }
    }

    pub fn atoms(&self) -> &[Name] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        xor_canonicalize(self).atoms.is_empty()
    }

    /// Sum of two terms, canonicalized.
    pub fn add(&self, other: &XorTerm) -> XorTerm {
        xor_canonicalize(&XorTerm::new(self.atoms.iter().chain(&other.atoms).cloned()))
    }

    /// Read a term built from free constants, `0` and `xor`.
    pub fn from_term(t: &Term) -> Option<XorTerm> {
        let mut atoms = Vec::new();
        collect(t, &mut atoms).then_some(XorTerm { atoms })
    }

    /// The canonical term: sorted atoms, right-nested, `0` when empty.
    pub fn to_term(&self) -> Term {
        build_xor(xor_canonicalize(self).atoms.into_iter().map(Term::Const).collect())
    }
}

fn collect(t: &Term, out: &mut Vec<Name>) -> bool {
    match t {
        Term::Const(c) => {
            out.push(c.clone());
            true
        }
        Term::App(f, args) if &**f == ZERO && args.is_empty() => true,
        Term::App(f, args) if &**f == XOR && args.len() == 2 => args.iter().all(|a| collect(a, out)),
        _ => false,
    }
}

impl fmt::Display for XorTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<&str> = self.atoms.iter().map(|a| a.as_ref()).collect();
        f.write_str(&parts.join(" (+) "))
    }
}

/// Keep atoms of odd multiplicity, sorted.
pub fn xor_canonicalize(t: &XorTerm) -> XorTerm {
    let mut odd: BTreeSet<Name> = BTreeSet::new();
    for a in &t.atoms {
        if !odd.remove(a) {
            odd.insert(a.clone());
        }
    }
    XorTerm { atoms: odd.into_iter().collect() }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        let bit = 1u64 << (i % 64);
        if on {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|i| self.get(*i))
    }
}

/// Index of atoms occurring in a problem.
#[derive(Clone, Debug, Default)]
pub struct AtomIndex {
    atoms: Vec<Name>,
}

impl AtomIndex {
    pub fn of<'a, I: IntoIterator<Item = &'a XorTerm>>(terms: I) -> Self {
        let set: BTreeSet<Name> = terms.into_iter().flat_map(|t| t.atoms.iter().cloned()).collect();
        AtomIndex { atoms: set.into_iter().collect() }
    }

    pub fn dim(&self) -> usize {
        self.atoms.len()
    }

    /// `[[t]]`, or `None` if `t` mentions an atom outside the index.
    pub fn vector(&self, t: &XorTerm) -> Option<BitVector> {
        let mut v = BitVector::zeros(self.dim());
        for a in &t.atoms {
            v.flip(self.atoms.binary_search(a).ok()?);
        }
        Some(v)
    }
}

/// Incremental Gaussian elimination over the columns `[[M_1]], …, [[M_n]]`.
/// Each stored row remembers which columns sum to it.
struct Elimination {
    columns: usize,
    rows: Vec<(usize, BitVector, BitVector)>,
    kernel: Vec<BitVector>,
}

impl Elimination {
    fn new(vectors: &[BitVector]) -> Self {
        let mut e = Elimination { columns: vectors.len(), rows: Vec::new(), kernel: Vec::new() };
        for (i, v) in vectors.iter().enumerate() {
            let mut comb = BitVector::zeros(vectors.len());
            comb.set(i, true);
            let (v, comb) = e.reduce(v.clone(), comb);
            match v.first_one() {
                Some(p) => e.rows.push((p, v, comb)),
                None => e.kernel.push(comb),
            }
        }
        e
    }

    fn reduce(&self, mut v: BitVector, mut comb: BitVector) -> (BitVector, BitVector) {
        for (p, row, c) in &self.rows {
            if v.get(*p) {
                v.xor_assign(row);
                comb.xor_assign(c);
            }
        }
        (v, comb)
    }

    /// Columns summing to `target`, if it lies in the span.
    fn solve(&self, target: BitVector) -> Option<BitVector> {
        let (rest, comb) = self.reduce(target, BitVector::zeros(self.columns));
        rest.is_zero().then_some(comb)
    }
}

fn sum_of(recipes: &[Term], comb: &BitVector) -> Term {
    build_xor(comb.ones().map(|i| recipes[i].clone()).collect())
}

fn hole_recipes(n: usize) -> Vec<Term> {
    (1..=n).map(Term::hole).collect()
}

/// A context `⊕{x_i : c_i = 1}` with `Σ c_i [[M_i]] = [[t]]`, or `None`.
pub fn xor_reach(s: &[XorTerm], t: &XorTerm) -> Option<Context> {
    let index = AtomIndex::of(s);
    let target = index.vector(t)?;
    let cols: Vec<BitVector> = s.iter().map(|m| index.vector(m).expect("indexed")).collect();
    let comb = Elimination::new(&cols).solve(target)?;
    Some(Context::trusted(sum_of(&hole_recipes(s.len()), &comb)))
}

/// One pair `(⊕ support, 0)` per nullspace basis vector.
pub fn xor_basis(s: &[XorTerm]) -> Vec<ContextPair> {
    let index = AtomIndex::of(s);
    let cols: Vec<BitVector> = s.iter().map(|m| index.vector(m).expect("indexed")).collect();
    kernel_pairs(&hole_recipes(s.len()), &Elimination::new(&cols))
}

fn kernel_pairs(recipes: &[Term], e: &Elimination) -> Vec<ContextPair> {
    let zero = Context::trusted(Term::app(ZERO, vec![]));
    let mut out: Vec<ContextPair> =
        e.kernel.iter().filter_map(|k| ContextPair::new(Context::trusted(sum_of(recipes, k)), zero.clone())).collect();
    out.sort();
    out.dedup();
    out
}

/// Knowledge of a strand whose messages are xor terms or `msg(A, p)` with
/// `p` an xor term. The generators are the plain messages and the two
/// projections of every wrapped one.
#[derive(Clone, Debug)]
pub struct XorKnowledge {
    len: usize,
    recipes: Vec<Term>,
    values: Vec<XorTerm>,
    wrapped: Vec<usize>,
}

impl XorKnowledge {
    pub fn new(s: &PositiveStrand) -> Option<Self> {
        let mut k = XorKnowledge { len: s.len(), recipes: Vec::new(), values: Vec::new(), wrapped: Vec::new() };
        for (i, m) in s.messages().iter().enumerate() {
            let hole = Term::hole(i + 1);
            match m {
                Term::App(f, args) if &**f == "msg" && args.len() == 2 => {
                    k.recipes.push(Term::app("partner", vec![hole.clone()]));
                    k.values.push(XorTerm::from_term(&args[0])?);
                    k.recipes.push(Term::app("payload", vec![hole]));
                    k.values.push(XorTerm::from_term(&args[1])?);
                    k.wrapped.push(i + 1);
                }
                _ => {
                    k.recipes.push(hole);
                    k.values.push(XorTerm::from_term(m)?);
                }
            }
        }
        Some(k)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn elimination(&self) -> (AtomIndex, Elimination) {
        let index = AtomIndex::of(&self.values);
        let cols: Vec<BitVector> = self.values.iter().map(|m| index.vector(m).expect("indexed")).collect();
        let e = Elimination::new(&cols);
        (index, e)
    }

    fn reach_xor(&self, t: &XorTerm) -> Option<Term> {
        let (index, e) = self.elimination();
        let comb = e.solve(index.vector(&xor_canonicalize(t))?)?;
        Some(sum_of(&self.recipes, &comb))
    }

    pub fn reach(&self, t: &Term) -> Option<Context> {
        let body = match t {
            Term::App(f, args) if &**f == "msg" && args.len() == 2 => {
                let a = self.reach_xor(&XorTerm::from_term(&args[0])?)?;
                let p = self.reach_xor(&XorTerm::from_term(&args[1])?)?;
                Term::app("msg", vec![a, p])
            }
            _ => self.reach_xor(&XorTerm::from_term(t)?)?,
        };
        Some(Context::trusted(body))
    }

    /// Linear dependencies among the generators, plus the shape check
    /// `msg(partner(x_i), payload(x_i)) = x_i` for every wrapped message.
    pub fn basis(&self) -> Vec<ContextPair> {
        let (_, e) = self.elimination();
        let mut out = kernel_pairs(&self.recipes, &e);
        for &i in &self.wrapped {
            let x = Term::hole(i);
            let rebuilt = Term::app(
                "msg",
                vec![Term::app("partner", vec![x.clone()]), Term::app("payload", vec![x.clone()])],
            );
            out.extend(ContextPair::new(Context::trusted(rebuilt), Context::trusted(x)));
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Basis of a strand under the xor theory, `None` if some message falls
/// outside the supported fragment.
pub fn framed_basis(s: &PositiveStrand, d: &DeductionSystem) -> Option<Vec<ContextPair>> {
    debug_assert!(d.is_xor());
    let normalized = PositiveStrand::new(s.messages().iter().map(|m| crate::rewrite::normalize(m, d)).collect());
    Some(XorKnowledge::new(&normalized)?.basis())
}

/// Reachability under the xor theory.
pub fn framed_reach(s: &PositiveStrand, t: &Term, d: &DeductionSystem) -> Option<Context> {
    let normalized = PositiveStrand::new(s.messages().iter().map(|m| crate::rewrite::normalize(m, d)).collect());
    XorKnowledge::new(&normalized)?.reach(&crate::rewrite::normalize(t, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::normalize;
    use crate::term::{instantiate_context, parse_term};

    fn x(s: &str) -> XorTerm {
        let d = DeductionSystem::xor();
        XorTerm::from_term(&parse_term(s, &d.sig).unwrap()).unwrap()
    }

    fn eval(c: &Context, s: &[XorTerm]) -> XorTerm {
        let d = DeductionSystem::xor();
        let strand = PositiveStrand::new(s.iter().map(XorTerm::to_term).collect());
        XorTerm::from_term(&normalize(&instantiate_context(c, &strand).unwrap(), &d)).unwrap()
    }

    #[test]
    fn canonicalization() {
        assert_eq!(xor_canonicalize(&x("a (+) b (+) a")), x("b"));
        assert_eq!(xor_canonicalize(&x("0 (+) a")), x("a"));
        assert_eq!(xor_canonicalize(&x("a (+) b (+) c")), x("a (+) b (+) c"));
        assert!(x("a (+) a").is_zero());
        assert_eq!(x("c (+) a").to_term().to_string(), "xor(a,c)");
    }

    #[test]
    fn reach_examples() {
        let s = [x("a (+) b"), x("b")];
        let c = xor_reach(&s, &x("a")).unwrap();
        assert_eq!(c.to_string(), "xor(x_1,x_2)");
        assert_eq!(eval(&c, &s), x("a"));
        assert_eq!(xor_reach(&[x("a")], &x("0")).unwrap().to_string(), "0");
        assert_eq!(xor_reach(&[x("a")], &x("b")), None);
    }

    #[test]
    fn basis_examples() {
        let shown = |s: &[XorTerm]| xor_basis(s).iter().map(|p| p.to_string()).collect::<Vec<_>>();
        assert_eq!(shown(&[x("a"), x("a")]), ["(xor(x_1,x_2), 0)"]);
        assert_eq!(shown(&[x("a (+) b"), x("a"), x("b")]), ["(xor(x_1,xor(x_2,x_3)), 0)"]);
        assert!(shown(&[x("a"), x("b")]).is_empty());
    }

    #[test]
    fn bit_vectors() {
        let mut v = BitVector::zeros(130);
        v.set(129, true);
        v.set(3, true);
        assert_eq!(v.ones().collect::<Vec<_>>(), [3, 129]);
        assert_eq!(v.first_one(), Some(3));
        v.flip(3);
        assert_eq!(v.first_one(), Some(129));
        let w = v.clone();
        v.xor_assign(&w);
        assert!(v.is_zero());
    }

    #[test]
    fn wrapped_knowledge() {
        let d = DeductionSystem::xor().with_narration_symbols().unwrap();
        let t = |s: &str| parse_term(s, &d.sig).unwrap();
        let s = PositiveStrand::new(vec![t("K"), t("msg(B, xor(Na, K))")]);
        let c = framed_reach(&s, &t("Na"), &d).unwrap();
        assert_eq!(c.to_string(), "xor(x_1,payload(x_2))");
        let basis = framed_basis(&s, &d).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0].to_string(), "(msg(partner(x_2),payload(x_2)), x_2)");
        for p in &basis {
            assert!(p.holds_on(&s, &d).unwrap());
        }
    }
}
