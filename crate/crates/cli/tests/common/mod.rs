//! Random Dolev-Yao narrations for property tests.
//!
//! Up to four agents with public keys `K<agent>`, each knowing every agent
//! name, every public key and its own private key. Messages are built from
//! what the sender knows, nonces it makes up, and what it has received, so
//! many (not all) of the generated narrations are executable.

#![allow(dead_code)]

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use prudent_cli::{build, Pipeline, PipelineArgs};
use prudent_core::rewrite::TheoryStore;
use prudent_core::term::{subterms, Term};

const AGENTS: [&str; 4] = ["A", "B", "C", "D"];

pub fn height(t: &Term) -> usize {
    t.args().iter().map(|a| height(a) + 1).max().unwrap_or(0)
}

fn key(agent: &str) -> Term {
    Term::constant(&format!("K{agent}"))
}

struct Agent {
    name: &'static str,
    /// Terms usable as leaves of new messages.
    leaves: Vec<Term>,
    fresh: usize,
}

fn message(rng: &mut ChaCha8Rng, a: &mut Agent, keys: &[Term], depth: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.3) {
        if rng.gen_bool(0.25) {
            a.fresh += 1;
            let n = Term::constant(&format!("N{}{}", a.name.to_lowercase(), a.fresh));
            a.leaves.push(n.clone());
            return n;
        }
        return a.leaves.choose(rng).expect("agents know their own name").clone();
    }
    if rng.gen_bool(0.5) {
        Term::app("pair", vec![message(rng, a, keys, depth - 1), message(rng, a, keys, depth - 1)])
    } else {
        let k = if rng.gen_bool(0.85) { keys.choose(rng).unwrap().clone() } else { message(rng, a, keys, depth - 1) };
        Term::app("enc", vec![message(rng, a, keys, depth - 1), k])
    }
}

/// Narration text with 2 to 4 agents, 1 to 5 lines and message depth at most 3.
pub fn random_narration(rng: &mut ChaCha8Rng, id: usize) -> String {
    let n_agents = rng.gen_range(2..=4);
    let names = &AGENTS[..n_agents];
    let keys: Vec<Term> = names.iter().map(|a| key(a)).collect();
    let mut agents: Vec<Agent> = names
        .iter()
        .map(|&name| {
            let mut leaves: Vec<Term> = names.iter().map(|b| Term::constant(b)).collect();
            leaves.extend(keys.iter().cloned());
            if rng.gen_bool(0.2) {
                leaves.push(Term::app("inv", vec![key(name)]));
            }
            Agent { name, leaves, fresh: 0 }
        })
        .collect();
    let mut lines = Vec::new();
    for _ in 0..rng.gen_range(1..=5) {
        let from = rng.gen_range(0..n_agents);
        let to = (from + rng.gen_range(1..n_agents)) % n_agents;
        let m = loop {
            let m = message(rng, &mut agents[from], &keys, 3);
            if height(&m) <= 3 {
                break m;
            }
        };
        for t in subterms(&m) {
            if !agents[to].leaves.contains(&t) {
                agents[to].leaves.push(t);
            }
        }
        lines.push(format!("{} -> {} : {m}", names[from], names[to]));
    }
    let mut text = format!("protocol R{id}\ntheory dolev_yao\n");
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    let used: Vec<&str> = names.iter().copied().filter(|a| lines.iter().any(|l| l.contains(&format!("{a} ->")) || l.contains(&format!("-> {a} ")))).collect();
    for a in used {
        let mut know: Vec<String> = names.iter().map(|b| b.to_string()).collect();
        know.extend(names.iter().map(|b| format!("K{b}")));
        know.push(format!("inv(K{a})"));
        text.push_str(&format!("{a} knows {}\n", know.join(", ")));
    }
    text.push_str("end\n");
    text
}

/// Compile narration text; `None` unless every role is executable.
pub fn compiled(text: &str, args: &PipelineArgs) -> Option<Pipeline> {
    let store = TheoryStore::with_builtins();
    let p = build(text, Path::new("<random>"), &store, args).ok()?;
    (!p.failed).then_some(p)
}

/// The next `count` random narrations whose roles all compile, drawn from `rng`.
pub fn executable_narrations(rng: &mut ChaCha8Rng, count: usize, args: &PipelineArgs) -> (Vec<Pipeline>, usize) {
    let mut out = Vec::new();
    let mut tried = 0;
    while out.len() < count {
        tried += 1;
        if let Some(p) = compiled(&random_narration(rng, tried), args) {
            out.push(p);
        }
    }
    (out, tried)
}
