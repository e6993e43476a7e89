//! Shared generators for the property tests.

#![allow(dead_code)]

use proptest::prelude::*;

use prudent_core::rewrite::{DeductionSystem, TheoryStore};
use prudent_core::term::{parse_term, PositiveStrand, Term};

pub fn dy() -> DeductionSystem {
    TheoryStore::with_builtins().get("dolev_yao").expect("built-in theory").clone()
}

pub fn term(s: &str, d: &DeductionSystem) -> Term {
    parse_term(s, &d.sig).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn strand(ms: &[&str], d: &DeductionSystem) -> PositiveStrand {
    PositiveStrand::new(ms.iter().map(|m| term(m, d)).collect())
}

pub const ATOMS: [&str; 5] = ["a", "b", "c", "k1", "k2"];

fn atom() -> impl Strategy<Value = Term> {
    prop_oneof![
        4 => proptest::sample::select(&ATOMS[..]).prop_map(Term::constant),
        1 => proptest::sample::select(&["k1", "k2"][..]).prop_map(|k| Term::app("inv", vec![Term::constant(k)])),
    ]
}

/// Messages built with pair and enc, at most `depth` levels deep.
pub fn message(depth: u32) -> impl Strategy<Value = Term> {
    atom().prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("pair", vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| Term::app("enc", vec![a, b])),
        ]
    })
}

/// Arbitrary Dolev-Yao terms, destructors and tests included.
pub fn any_term(depth: u32) -> impl Strategy<Value = Term> {
    atom().prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("pair", vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("enc", vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("dec", vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("symtest", vec![a, b])),
            inner.clone().prop_map(|a| Term::app("proj1", vec![a])),
            inner.clone().prop_map(|a| Term::app("proj2", vec![a])),
            inner.clone().prop_map(|a| Term::app("pairtest", vec![a])),
            inner.prop_map(|a| Term::app("inv", vec![a])),
        ]
    })
}

pub fn positive_strand(max_len: usize, depth: u32) -> impl Strategy<Value = PositiveStrand> {
    proptest::collection::vec(message(depth), 1..=max_len).prop_map(PositiveStrand::new)
}
