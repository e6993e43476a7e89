//! Alice&Bob narrations: parsing, printing and validation.
//!
//! ```text
//! protocol NSPK
//! theory dolev_yao
//! A -> B : enc(pair(A,Na),KB)
//! B -> A : enc(pair(Na,Nb),KA)
//! A -> B : enc(Nb,KB)
//! A knows A, B, KA, KB, inv(KA)
//! B knows A, B, KA, KB, inv(KB)
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::rewrite::{validate_subterm_convergent, DeductionSystem, TheoryError, TheoryStore};
use crate::role::nonces_by_agent;
use crate::term::{parse_term, Name, Signature, Term, TermError};
use crate::xor::XorTerm;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MessageLine {
    pub sender: Name,
    pub receiver: Name,
    pub message: Term,
}

#[derive(Clone, Debug)]
pub struct Narration {
    pub name: String,
    pub theory_name: String,
    pub lines: Vec<MessageLine>,
    /// Initial knowledge per agent, in declaration order.
    pub knowledge: IndexMap<Name, Vec<Term>>,
    /// Source line of each message line, and of each `knows` declaration.
    line_numbers: Vec<usize>,
    knows_line_numbers: BTreeMap<Name, usize>,
}

impl PartialEq for Narration {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.theory_name == other.theory_name
            && self.lines == other.lines
            && self.knowledge.len() == other.knowledge.len()
            && self.knowledge.iter().zip(&other.knowledge).all(|(a, b)| a == b)
    }
}

impl Eq for Narration {}

impl Narration {
    /// Builds a narration programmatically. Source line numbers default to
    /// the narration's own line indices.
    pub fn new(
        name: &str,
        theory_name: &str,
        lines: Vec<MessageLine>,
        knowledge: IndexMap<Name, Vec<Term>>,
    ) -> Self {
        let line_numbers = (1..=lines.len()).collect();
        let knows_line_numbers = knowledge.keys().map(|a| (a.clone(), lines.len() + 1)).collect();
        Narration { name: name.into(), theory_name: theory_name.into(), lines, knowledge, line_numbers, knows_line_numbers }
    }

    pub fn agents(&self) -> impl Iterator<Item = &Name> {
        self.knowledge.keys()
    }

    pub fn source_line(&self, index: usize) -> usize {
        self.line_numbers.get(index).copied().unwrap_or(index + 1)
    }

    fn knows_line(&self, agent: &Name) -> usize {
        self.knows_line_numbers.get(agent).copied().unwrap_or(0)
    }
}

impl fmt::Display for Narration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "protocol {}", self.name)?;
        writeln!(f, "theory {}", self.theory_name)?;
        for l in &self.lines {
            writeln!(f, "{} -> {} : {}", l.sender, l.receiver, l.message)?;
        }
        for (agent, terms) in &self.knowledge {
            let terms: Vec<String> = terms.iter().map(Term::to_string).collect();
            if terms.is_empty() {
                writeln!(f, "{agent} knows")?;
            } else {
                writeln!(f, "{agent} knows {}", terms.join(", "))?;
            }
        }
        writeln!(f, "end")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NarrationError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: TermError },
    #[error("unknown theory `{0}`")]
    UnknownTheory(String),
    #[error("theory `{0}` is not subterm convergent")]
    InvalidTheory(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("no message lines")]
    Empty,
    #[error("line {line}: self-communication: {agent} sends to itself")]
    SelfCommunication { line: usize, agent: String },
    #[error("agent {agent} has no knowledge declaration (line {line})")]
    MissingKnowledge { line: usize, agent: String },
    #[error("line {line}: duplicate knowledge declaration for {agent}")]
    DuplicateKnowledge { line: usize, agent: String },
    #[error("line {line}: `{name}` is a function symbol of the theory and cannot name an agent")]
    BadAgent { line: usize, name: String },
    #[error("line {line}: `{term}` mixes exclusive or with other operators")]
    MixedXor { line: usize, term: String },
}

/// Looks up and validates the theory named by a narration, with the
/// narration wrapper symbols added.
pub fn narration_theory(name: &str, theories: &TheoryStore) -> Result<DeductionSystem, NarrationError> {
    let d = theories.get(name).ok_or_else(|| NarrationError::UnknownTheory(name.to_string()))?;
    let d = d.with_narration_symbols()?;
    if !d.is_xor() && !validate_subterm_convergent(&d).accepted {
        return Err(NarrationError::InvalidTheory(name.to_string()));
    }
    Ok(d)
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn is_ident(s: &str) -> bool {
    s.chars().next().map_or(false, |c| c.is_ascii_alphabetic()) && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_narration(text: &str, theories: &TheoryStore) -> Result<Narration, NarrationError> {
    let mut name: Option<String> = None;
    let mut theory: Option<(String, DeductionSystem)> = None;
    let mut lines = Vec::new();
    let mut line_numbers = Vec::new();
    let mut knowledge: IndexMap<Name, Vec<Term>> = IndexMap::new();
    let mut knows_line_numbers = BTreeMap::new();
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: &str| NarrationError::Syntax { line, message: message.to_string() };
        if ended {
            return Err(syntax("content after `end`"));
        }
        if name.is_none() {
            let rest = content.strip_prefix("protocol").ok_or_else(|| syntax("expected `protocol <name>`"))?.trim();
            if !is_ident(rest) {
                return Err(syntax("expected `protocol <name>`"));
            }
            name = Some(rest.to_string());
            continue;
        }
        if theory.is_none() {
            let rest = content.strip_prefix("theory").ok_or_else(|| syntax("expected `theory <name>`"))?.trim();
            if !is_ident(rest) {
                return Err(syntax("expected `theory <name>`"));
            }
            let d = narration_theory(rest, theories)?;
            theory = Some((rest.to_string(), d));
            continue;
        }
        let (_, d) = theory.as_ref().expect("theory parsed");
        if content == "end" {
            ended = true;
            continue;
        }
        let term = |s: &str| -> Result<Term, NarrationError> {
            let t = parse_term(s.trim(), &d.sig).map_err(|source| NarrationError::Term { line, source })?;
            if d.is_xor() && XorTerm::from_term(&t).is_none() {
                return Err(NarrationError::MixedXor { line, term: t.to_string() });
            }
            Ok(t)
        };
        let agent = |s: &str| -> Result<Name, NarrationError> {
            let s = s.trim();
            if !is_ident(s) {
                return Err(syntax(&format!("`{s}` is not an agent name")));
            }
            if d.sig.contains(s) {
                return Err(NarrationError::BadAgent { line, name: s.to_string() });
            }
            match parse_term(s, &d.sig) {
                Ok(Term::Const(c)) => Ok(c),
                Ok(_) => Err(NarrationError::BadAgent { line, name: s.to_string() }),
                Err(source) => Err(NarrationError::Term { line, source }),
            }
        };
        if let Some((lhs, msg)) = content.split_once(':') {
            let (s, r) = lhs.split_once("->").ok_or_else(|| syntax("expected `<S> -> <R> : <message>`"))?;
            let sender = agent(s)?;
            let receiver = agent(r)?;
            if sender == receiver {
                return Err(NarrationError::SelfCommunication { line, agent: sender.to_string() });
            }
            if msg.trim().is_empty() {
                return Err(syntax("missing message"));
            }
            let message = term(msg)?;
            lines.push(MessageLine { sender, receiver, message });
            line_numbers.push(line);
            continue;
        }
        let mut words = content.splitn(3, char::is_whitespace);
        let who = words.next().unwrap_or("");
        if words.next() != Some("knows") {
            return Err(syntax("expected a message line, a `knows` line or `end`"));
        }
        let a = agent(who)?;
        let rest = words.next().unwrap_or("").trim();
        let terms = if rest.is_empty() {
            Vec::new()
        } else {
            split_top_level(rest).into_iter().map(term).collect::<Result<Vec<_>, _>>()?
        };
        if knowledge.contains_key(&a) {
            return Err(NarrationError::DuplicateKnowledge { line, agent: a.to_string() });
        }
        knows_line_numbers.insert(a.clone(), line);
        knowledge.insert(a, terms);
    }

    let name = name.ok_or(NarrationError::Syntax { line: 1, message: "expected `protocol <name>`".into() })?;
    let (theory_name, _) = theory.ok_or(NarrationError::Syntax { line: 1, message: "expected `theory <name>`".into() })?;
    if !ended {
        return Err(NarrationError::Syntax { line: text.lines().count(), message: "missing `end`".into() });
    }
    if lines.is_empty() && knowledge.is_empty() {
        return Err(NarrationError::Empty);
    }
    for (i, l) in lines.iter().enumerate() {
        for a in [&l.sender, &l.receiver] {
            if !knowledge.contains_key(a) {
                return Err(NarrationError::MissingKnowledge { line: line_numbers[i], agent: a.to_string() });
            }
        }
    }
    Ok(Narration { name, theory_name, lines, knowledge, line_numbers, knows_line_numbers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {sev}: {}", self.line, self.message)
    }
}

/// Unique-origination errors and unused-knowledge warnings, sorted by line.
pub fn validate_narration(n: &Narration) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let nonces = nonces_by_agent(n);
    let mut owner: BTreeMap<Name, Name> = BTreeMap::new();
    for (agent, ns) in &nonces {
        for nonce in ns {
            match owner.get(nonce) {
                Some(first) => {
                    let line = first_sent_by(n, agent, nonce).map_or(0, |i| n.source_line(i));
                    out.push(Diagnostic {
                        severity: Severity::Error,
                        line,
                        message: format!("shared nonce {nonce} (originated by both {first} and {agent})"),
                    });
                }
                None => {
                    owner.insert(nonce.clone(), agent.clone());
                }
            }
        }
    }

    // agent names count as used: they appear in the msg wrapper
    let mentioned: Vec<Name> = n
        .lines
        .iter()
        .flat_map(|l| l.message.constants().into_iter().chain([l.sender.clone(), l.receiver.clone()]))
        .collect();
    for (agent, terms) in &n.knowledge {
        for t in terms {
            let used = t.constants().iter().any(|c| mentioned.contains(c));
            if !used {
                out.push(Diagnostic {
                    severity: Severity::Warning,
                    line: n.knows_line(agent),
                    message: format!("knowledge {t} of {agent} is never used"),
                });
            }
        }
    }
    out.sort_by_key(|d| d.line);
    out
}

fn first_sent_by(n: &Narration, agent: &Name, c: &Name) -> Option<usize> {
    n.lines.iter().position(|l| &l.sender == agent && l.message.constants().contains(c))
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Signature used for a narration's messages.
pub fn narration_signature(n: &Narration, theories: &TheoryStore) -> Result<Signature, NarrationError> {
    Ok(narration_theory(&n.theory_name, theories)?.sig)
}
