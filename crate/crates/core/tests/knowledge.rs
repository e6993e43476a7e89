mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{dy, message, positive_strand, strand};
use prudent_core::basis::{equality_basis, refines, ContextPair};
use prudent_core::deduction::{reach, saturate};
use prudent_core::oracle::{brute_pairs, brute_reach, enumerate_contexts, EnumerationBudget};
use prudent_core::rewrite::{equal_mod, normalize, DeductionSystem};
use prudent_core::term::{instantiate_context, parse_context, subterms, Context, PositiveStrand, Term};
use prudent_core::xor::{xor_basis, xor_canonicalize, xor_reach, XorTerm};

fn extended(s: &PositiveStrand, m: Term) -> PositiveStrand {
    let mut s = s.clone();
    s.push(m);
    s
}

fn target() -> impl Strategy<Value = (PositiveStrand, Term)> {
    (positive_strand(3, 2), message(2), any::<prop::sample::Index>()).prop_map(|(s, t, pick)| {
        let subs: Vec<Term> = s.messages().iter().flat_map(|m| subterms(m).into_iter()).collect();
        let t = if pick.index(2) == 0 { t } else { pick.get(&subs).clone() };
        (s, t)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reach_is_sound((s, t) in target()) {
        let d = dy();
        if let Some(c) = reach(&s, &t, &d, 5) {
            prop_assert!(equal_mod(&instantiate_context(&c, &s).unwrap(), &t, &d), "{} on {}", c, s);
        }
    }

    #[test]
    fn reach_is_monotone((s, t) in target(), m in message(2)) {
        let d = dy();
        if reach(&s, &t, &d, 5).is_some() {
            prop_assert!(reach(&extended(&s, m), &t, &d, 5).is_some());
        }
    }

    #[test]
    fn brute_force_never_beats_reach((s, t) in target()) {
        let d = dy();
        if let Some(c) = brute_reach(&s, &t, EnumerationBudget::depth(3), &d) {
            prop_assert!(reach(&s, &t, &d, 5).is_some(), "missed {} via {}", t, c);
        }
    }

    #[test]
    fn saturation_stays_within_subterms(s in positive_strand(4, 3)) {
        let d = dy();
        let mut allowed: BTreeSet<Term> = s.messages().iter().flat_map(|m| subterms(&normalize(m, &d))).collect();
        allowed.extend(d.ground_rhs());
        let kb = saturate(&s, &d, 5);
        for (t, c) in kb.entries() {
            prop_assert!(allowed.contains(t), "{} escapes", t);
            prop_assert!(equal_mod(&instantiate_context(c, &s).unwrap(), t, &d));
        }
    }

    #[test]
    fn basis_is_sound_and_reflexive(s in positive_strand(4, 2)) {
        let d = dy();
        let basis = equality_basis(&s, &d, 5);
        for p in &basis {
            prop_assert!(p.holds_on(&s, &d).unwrap(), "{} fails on {}", p, s);
        }
        prop_assert!(refines(&s, &basis, &d).unwrap());
    }

    // a candidate satisfying the basis satisfies every small observable equality
    #[test]
    fn basis_covers_depth_three_oracle(s in positive_strand(4, 2), c in positive_strand(4, 2)) {
        let d = dy();
        let n = s.len().min(c.len());
        let (s, c) = (s.prefix(n), c.prefix(n));
        for candidate in [c.clone(), s.clone()] {
            if refines(&candidate, &equality_basis(&s, &d, 5), &d).unwrap() {
                for p in brute_pairs(&s, EnumerationBudget::depth(3), &d) {
                    prop_assert!(p.holds_on(&candidate, &d).unwrap(), "{} broken by {}", p, candidate);
                }
            }
        }
    }

    #[test]
    fn oracle_pairs_hold_on_their_strand(s in positive_strand(3, 2)) {
        let d = dy();
        for p in brute_pairs(&s, EnumerationBudget::depth(3), &d) {
            prop_assert!(p.holds_on(&s, &d).unwrap());
        }
    }

    #[test]
    fn xor_reach_and_basis_are_sound(rows in proptest::collection::vec(proptest::collection::btree_set(0usize..6, 0..5), 1..=6)) {
        let d = DeductionSystem::xor();
        let s: Vec<XorTerm> = rows.iter().map(|r| XorTerm::new(r.iter().map(|i| format!("a{i}").as_str().into()))).collect();
        let framed = PositiveStrand::new(s.iter().map(XorTerm::to_term).collect());
        for m in &s {
            let c = xor_reach(&s, m).expect("messages are reachable");
            prop_assert!(equal_mod(&instantiate_context(&c, &framed).unwrap(), &m.to_term(), &d));
        }
        for p in xor_basis(&s) {
            prop_assert!(p.holds_on(&framed, &d).unwrap(), "{}", p);
        }
        for m in &s {
            prop_assert_eq!(&xor_canonicalize(m), m);
            prop_assert!(m.add(m).is_zero());
        }
    }
}

#[test]
fn enumeration_is_deterministic() {
    let d = dy();
    let b = EnumerationBudget::new(4, 5000);
    assert_eq!(enumerate_contexts(2, b, &d), enumerate_contexts(2, b, &d));
    let s = strand(&["enc(a,k)", "inv(k)", "a"], &d);
    assert_eq!(brute_pairs(&s, EnumerationBudget::depth(3), &d), brute_pairs(&s, EnumerationBudget::depth(3), &d));
}

#[test]
fn enumeration_respects_size_then_term_order() {
    let d = dy();
    let cs = enumerate_contexts(2, EnumerationBudget::new(4, 100_000), &d);
    for w in cs.windows(2) {
        let key = |c: &Context| (c.dag_size(), c.body().clone());
        assert!(key(&w[0]) < key(&w[1]), "{} before {}", w[0], w[1]);
    }
    // spot check against a direct count: size-2 contexts over two holes
    let size2 = cs.iter().filter(|c| c.dag_size() == 2).count();
    // atoms are x_1, x_2 and true; 5 unary symbols on an atom, 5 binary ones on a repeated atom
    assert_eq!(size2, 5 * 3 + 5 * 3);
}

fn nspk_a(d: &DeductionSystem) -> PositiveStrand {
    strand(&["Na", "A", "B", "KA", "KB", "inv(KA)", "msg(B,enc(pair(Na,Nb),KA))"], d)
}

#[test]
fn oracle_sees_the_partner_check_on_nspk() {
    let d = dy();
    let pairs = brute_pairs(&nspk_a(&d), EnumerationBudget::new(6, 200_000), &d);
    let partner = ContextPair::new(parse_context("partner(x_7)", &d.sig).unwrap(), Context::hole(3)).unwrap();
    assert!(pairs.contains(&partner));
}

#[test]
fn oracle_sees_the_nonce_check_on_the_relevant_messages() {
    // Na, inv(KA) and the received message of the NSPK initiator. The
    // check's left side comes about a million contexts into the stream, past
    // the usual count cap, even with only three holes.
    let d = dy();
    let s = strand(&["Na", "inv(KA)", "msg(B,enc(pair(Na,Nb),KA))"], &d);
    let pairs = brute_pairs(&s, EnumerationBudget::new(5, 1_500_000), &d);
    assert!(pairs.iter().any(|p| p.to_string() == "(proj1(dec(payload(x_3),x_2)), x_1)"));
}

#[test]
fn depth_three_oracle_misses_deeper_equalities() {
    // the basis sees proj1(dec(x_1,x_2)) = x_3, which needs a size-4 context
    let d = dy();
    let s = strand(&["enc(pair(a,b),k)", "inv(k)", "a"], &d);
    let c = strand(&["enc(pair(c,b),k)", "inv(k)", "a"], &d);
    assert!(brute_pairs(&s, EnumerationBudget::depth(3), &d).iter().all(|p| p.holds_on(&c, &d).unwrap()));
    assert!(!refines(&c, &equality_basis(&s, &d, 5), &d).unwrap());
    assert!(!brute_pairs(&s, EnumerationBudget::depth(4), &d).iter().all(|p| p.holds_on(&c, &d).unwrap()));
}

