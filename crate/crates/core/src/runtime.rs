//! Running active frames: evaluation on an input strand, acceptance, the
//! implementation check, and an honest single-session simulator.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::basis::{from_frame_vars, Equation};
use crate::compiler::{ActiveFrame, StepKind};
use crate::narration::Narration;
use crate::rewrite::{equal_mod, normalize, DeductionSystem};
use crate::role::{extract_role, role_input, RoleSpec};
use crate::term::{plug, Name, Polarity, PositiveStrand, Step, Strand, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("frame expects {expected} input messages, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acceptance {
    pub accepted: bool,
    pub failed: Vec<Equation>,
}

/// Values `m_1..m_k` bound to the frame variables.
fn bind(f: &ActiveFrame, s: &PositiveStrand, d: &DeductionSystem) -> Result<Vec<Term>, RuntimeError> {
    let expected = f.receive_count();
    if expected != s.len() {
        return Err(RuntimeError::LengthMismatch { expected, found: s.len() });
    }
    let mut inputs = s.messages().iter();
    let mut values: Vec<Term> = Vec::with_capacity(f.steps.len());
    for step in &f.steps {
        let v = match &step.kind {
            StepKind::Receive { .. } => inputs.next().expect("length checked").clone(),
            StepKind::Send { recipe } => normalize(&plug(recipe.body(), &values).expect("recipe uses earlier variables"), d),
        };
        values.push(v);
    }
    Ok(values)
}

fn failed_checks(eqs: &[Equation], values: &[Term], d: &DeductionSystem) -> Vec<Equation> {
    eqs.iter()
        .filter(|e| {
            let l = plug(&from_frame_vars(&e.lhs), values);
            let r = plug(&from_frame_vars(&e.rhs), values);
            match (l, r) {
                (Ok(l), Ok(r)) => !equal_mod(&l, &r, d),
                _ => true,
            }
        })
        .cloned()
        .collect()
}

/// `φ·s`.
pub fn evaluate(f: &ActiveFrame, s: &PositiveStrand, d: &DeductionSystem) -> Result<Strand, RuntimeError> {
    let values = bind(f, s, d)?;
    Ok(Strand::new(
        f.steps.iter().zip(values).map(|(step, message)| Step { polarity: step.polarity(), message }).collect(),
    ))
}

pub fn accepts(f: &ActiveFrame, s: &PositiveStrand, d: &DeductionSystem) -> Result<Acceptance, RuntimeError> {
    let values = bind(f, s, d)?;
    let eqs: Vec<Equation> = f.equations().cloned().collect();
    let failed = failed_checks(&eqs, &values, d);
    Ok(Acceptance { accepted: failed.is_empty(), failed })
}

/// `φ` accepts `input(r)` and `φ·input(r) =E strand(r)` step by step.
pub fn verify_implementation(f: &ActiveFrame, r: &RoleSpec, d: &DeductionSystem) -> bool {
    let input = role_input(r);
    match (accepts(f, &input, d), evaluate(f, &input, d)) {
        (Ok(a), Ok(out)) => {
            a.accepted
                && out.len() == r.strand.len()
                && out
                    .steps()
                    .iter()
                    .zip(r.strand.steps())
                    .all(|(x, y)| x.polarity == y.polarity && equal_mod(&x.message, &y.message, d))
        }
        _ => false,
    }
}

/// Tamper with the message a sender produces at frame step `step`: the first
/// nonce in its payload becomes the constant `replace`. When several roles
/// send at that step, the first such message in narration order is hit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutation {
    pub step: usize,
    pub replace: Name,
}

impl std::str::FromStr for Mutation {
    type Err = String;

    /// `step=<i> replace=<const>`, fields in any order, separated by spaces
    /// or commas.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut step, mut replace) = (None, None);
        for field in s.split([' ', ',']).filter(|f| !f.is_empty()) {
            match field.split_once('=') {
                Some(("step", v)) => step = Some(v.parse::<usize>().map_err(|e| format!("bad step `{v}`: {e}"))?),
                Some(("replace", v)) if !v.is_empty() => replace = Some(Name::from(v)),
                _ => return Err(format!("unexpected mutation field `{field}`")),
            }
        }
        match (step, replace) {
            (Some(step), Some(replace)) if step >= 1 => Ok(Mutation { step, replace }),
            _ => Err("expected `step=<i> replace=<const>` with i >= 1".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub role: Name,
    /// Frame variable index of the step.
    pub step: usize,
    pub polarity: Polarity,
    /// The role's view: `msg(partner, payload)`.
    pub term: Term,
    pub accepted: bool,
    pub failed: Vec<Equation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub from: Name,
    pub to: Name,
    pub payload: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Rejected { role: Name, step: usize },
    Deadlock { role: Name, line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub wire: Vec<WireMessage>,
    pub outcome: Outcome,
}

impl Transcript {
    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Complete
    }

    pub fn failed_equations(&self) -> impl Iterator<Item = (&Name, &Equation)> {
        self.events.iter().flat_map(|e| e.failed.iter().map(move |q| (&e.role, q)))
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            let status = if e.accepted { "ok" } else { "REJECTED" };
            writeln!(f, "{} {}{} {} [{}]", e.role, e.polarity.sigil(), e.step, e.term, status)?;
            for q in &e.failed {
                writeln!(f, "    failed: {q}")?;
            }
        }
        match &self.outcome {
            Outcome::Complete => writeln!(f, "complete"),
            Outcome::Rejected { role, step } => writeln!(f, "rejected by {role} at step {step}"),
            Outcome::Deadlock { role, line, reason } => writeln!(f, "deadlock at line {line} ({role}): {reason}"),
        }
    }
}

struct RoleState<'a> {
    frame: &'a ActiveFrame,
    values: Vec<Term>,
    stopped: bool,
}

impl RoleState<'_> {
    fn next(&self) -> Option<&crate::compiler::FrameStep> {
        self.frame.steps.get(self.values.len())
    }

    /// Bind the next reception and check its equations.
    fn receive(&mut self, m: Term, d: &DeductionSystem) -> Vec<Equation> {
        self.values.push(m);
        let Some(StepKind::Receive { checks }) = self.frame.steps.get(self.values.len() - 1).map(|s| &s.kind) else {
            unreachable!("caller checked the polarity")
        };
        let failed = failed_checks(&checks.equations, &self.values, d);
        if !failed.is_empty() {
            self.stopped = true;
        }
        failed
    }
}

fn mutate(payload: &Term, nonces: &[Name], replace: &Name) -> Term {
    let target = payload.constants().into_iter().find(|c| nonces.contains(c) && c != replace);
    match target {
        Some(c) => payload.replace(&Term::Const(c), &Term::Const(replace.clone())),
        None => payload.clone(),
    }
}

/// Run one honest session following the narration's line order. Messages
/// travel as `(from, to, payload)`: the sender's `msg(to, M)` is checked for
/// its recipient and re-wrapped as `msg(from, M)` for the receiver.
pub fn simulate(
    n: &Narration,
    frames: &IndexMap<Name, ActiveFrame>,
    d: &DeductionSystem,
    mutation: Option<&Mutation>,
) -> Transcript {
    let mut events = Vec::new();
    let mut wire = Vec::new();
    let roles: IndexMap<Name, RoleSpec> = n.agents().map(|a| (a.clone(), extract_role(n, a))).collect();
    let nonces: Vec<Name> = roles.values().flat_map(|r| r.nonces.iter().cloned()).collect();
    let mut states: IndexMap<Name, RoleState> = IndexMap::new();

    for (agent, frame) in frames {
        let mut st = RoleState { frame, values: Vec::new(), stopped: false };
        let seeds = roles.get(agent).map_or(0, |r| r.nonces.len() + n.knowledge.get(agent).map_or(0, Vec::len));
        for _ in 0..seeds {
            let Some(step) = st.next() else { break };
            if step.polarity() != Polarity::Receive {
                break;
            }
            let ideal = step.ideal.clone();
            let var = step.var;
            let failed = st.receive(ideal.clone(), d);
            if !failed.is_empty() {
                events.push(Event { role: agent.clone(), step: var, polarity: Polarity::Receive, term: ideal, accepted: false, failed });
                return Transcript { events, wire, outcome: Outcome::Rejected { role: agent.clone(), step: var } };
            }
        }
        states.insert(agent.clone(), st);
    }

    // a rejecting role stops; lines between other roles still run
    let mut rejection: Option<Outcome> = None;
    let mut pending = mutation;
    for (j, line) in n.lines.iter().enumerate() {
        let line_no = n.source_line(j);
        if [&line.sender, &line.receiver].iter().any(|a| states.get(*a).is_some_and(|s| s.stopped)) {
            break;
        }
        let deadlock = |role: &Name, reason: String| Outcome::Deadlock { role: role.clone(), line: line_no, reason };
        let Some(sender) = states.get_mut(&line.sender) else {
            return Transcript { events, wire, outcome: deadlock(&line.sender, "no frame for sender".into()) };
        };
        let (var, recipe) = match sender.next() {
            Some(step) => match &step.kind {
                StepKind::Send { recipe } => (step.var, recipe.clone()),
                StepKind::Receive { .. } => {
                    return Transcript { events, wire, outcome: deadlock(&line.sender, format!("step {} is a reception", step.var)) }
                }
            },
            None => return Transcript { events, wire, outcome: deadlock(&line.sender, "frame exhausted".into()) },
        };
        let out = normalize(&plug(recipe.body(), &sender.values).expect("recipe uses earlier variables"), d);
        sender.values.push(out.clone());
        events.push(Event { role: line.sender.clone(), step: var, polarity: Polarity::Send, term: out.clone(), accepted: true, failed: vec![] });

        let payload = match &out {
            Term::App(f, args) if &**f == "msg" && args.len() == 2 && args[0] == Term::Const(line.receiver.clone()) => {
                args[1].clone()
            }
            _ => {
                return Transcript { events, wire, outcome: deadlock(&line.sender, format!("message {out} is not addressed to {}", line.receiver)) }
            }
        };
        let payload = match pending {
            Some(m) if m.step == var => {
                pending = None;
                mutate(&payload, &nonces, &m.replace)
            }
            _ => payload,
        };
        wire.push(WireMessage { from: line.sender.clone(), to: line.receiver.clone(), payload: payload.clone() });

        let Some(receiver) = states.get_mut(&line.receiver) else {
            return Transcript { events, wire, outcome: deadlock(&line.receiver, "no frame for receiver".into()) };
        };
        let var = match receiver.next() {
            Some(step) if step.polarity() == Polarity::Receive => step.var,
            Some(step) => {
                return Transcript { events, wire, outcome: deadlock(&line.receiver, format!("step {} is a send", step.var)) }
            }
            None => return Transcript { events, wire, outcome: deadlock(&line.receiver, "frame exhausted".into()) },
        };
        let delivered = Term::app("msg", vec![Term::Const(line.sender.clone()), payload]);
        let failed = receiver.receive(delivered.clone(), d);
        let accepted = failed.is_empty();
        events.push(Event { role: line.receiver.clone(), step: var, polarity: Polarity::Receive, term: delivered, accepted, failed });
        if !accepted && rejection.is_none() {
            rejection = Some(Outcome::Rejected { role: line.receiver.clone(), step: var });
        }
    }
    Transcript { events, wire, outcome: rejection.unwrap_or(Outcome::Complete) }
}
