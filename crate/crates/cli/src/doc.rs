//! The output document: one JSON tree with sorted keys.
//!
//! A compile document holds the narration text, the roles and their frames.
//! Recipes and equations are written in term syntax over `v_i`, so a
//! document can be loaded back and simulated without recompiling.

use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use prudent_core::basis::{to_frame_vars, Equation, UnificationSystem};
use prudent_core::compiler::{ActiveFrame, FrameStep, StepKind};
use prudent_core::rewrite::DeductionSystem;
use prudent_core::role::RoleSpec;
use prudent_core::runtime::{Outcome, Transcript};
use prudent_core::term::{parse_context, parse_term, Context, Name, Term};

use crate::CliError;

fn v(t: &Term) -> String {
    t.display_holes("v").to_string()
}

fn equation(e: &Equation) -> Value {
    json!({ "lhs": e.lhs.to_string(), "rhs": e.rhs.to_string() })
}

fn step(s: &FrameStep) -> Value {
    let mut m = Map::new();
    m.insert("var".into(), json!(s.var));
    m.insert("alias".into(), json!(s.alias));
    m.insert("ideal".into(), json!(s.ideal.to_string()));
    match &s.kind {
        StepKind::Send { recipe } => {
            m.insert("polarity".into(), json!("!"));
            m.insert("recipe".into(), json!(v(recipe.body())));
        }
        StepKind::Receive { checks } => {
            m.insert("polarity".into(), json!("?"));
            m.insert("checks".into(), Value::Array(checks.equations.iter().map(equation).collect()));
        }
    }
    Value::Object(m)
}

pub fn role(r: &RoleSpec, f: &ActiveFrame) -> Value {
    json!({
        "name": r.name.as_ref(),
        "params": r.params.iter().map(|p| p.as_ref()).collect::<Vec<_>>(),
        "nonces": r.nonces.iter().map(|p| p.as_ref()).collect::<Vec<_>>(),
        "strand": r.strand.steps().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "frame": f.steps.iter().map(step).collect::<Vec<_>>(),
    })
}

pub fn transcript(t: &Transcript) -> Value {
    let outcome = match &t.outcome {
        Outcome::Complete => json!({ "status": "complete" }),
        Outcome::Rejected { role, step } => json!({ "status": "rejected", "role": role.as_ref(), "step": step }),
        Outcome::Deadlock { role, line, reason } => {
            json!({ "status": "deadlock", "role": role.as_ref(), "line": line, "reason": reason })
        }
    };
    json!({
        "outcome": outcome,
        "events": t.events.iter().map(|e| json!({
            "role": e.role.as_ref(),
            "step": e.step,
            "polarity": e.polarity.sigil().to_string(),
            "term": e.term.to_string(),
            "accepted": e.accepted,
            "failed": e.failed.iter().map(equation).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "wire": t.wire.iter().map(|w| json!({
            "from": w.from.as_ref(),
            "to": w.to.as_ref(),
            "payload": w.payload.to_string(),
        })).collect::<Vec<_>>(),
    })
}

pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Document(msg.into())
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, CliError> {
    v.get(key).ok_or_else(|| bad(format!("missing field `{key}`")))
}

fn string<'a>(v: &'a Value, key: &str) -> Result<&'a str, CliError> {
    field(v, key)?.as_str().ok_or_else(|| bad(format!("field `{key}` is not a string")))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a [Value], CliError> {
    field(v, key)?.as_array().map(Vec::as_slice).ok_or_else(|| bad(format!("field `{key}` is not an array")))
}

fn context(text: &str, d: &DeductionSystem) -> Result<Context, CliError> {
    parse_context(text, &d.sig).map_err(|e| bad(format!("`{text}`: {e}")))
}

fn frame_side(text: &str, d: &DeductionSystem) -> Result<Term, CliError> {
    Ok(to_frame_vars(context(text, d)?.body()))
}

/// Frames of a compile document, keyed by role name.
pub fn load_frames(doc: &Value, d: &DeductionSystem) -> Result<IndexMap<Name, ActiveFrame>, CliError> {
    let mut frames = IndexMap::new();
    for r in array(doc, "roles")? {
        let name: Name = string(r, "name")?.into();
        let mut steps = Vec::new();
        for s in array(r, "frame")? {
            let var = field(s, "var")?.as_u64().ok_or_else(|| bad("field `var` is not a number"))? as usize;
            let ideal = parse_term(string(s, "ideal")?, &d.sig).map_err(|e| bad(e.to_string()))?;
            let kind = match string(s, "polarity")? {
                "!" => StepKind::Send { recipe: context(string(s, "recipe")?, d)? },
                "?" => {
                    let mut equations = Vec::new();
                    for e in array(s, "checks")? {
                        equations.push(Equation { lhs: frame_side(string(e, "lhs")?, d)?, rhs: frame_side(string(e, "rhs")?, d)? });
                    }
                    StepKind::Receive { checks: UnificationSystem { equations } }
                }
                other => return Err(bad(format!("unknown polarity `{other}`"))),
            };
            steps.push(FrameStep { var, kind, ideal, alias: string(s, "alias")?.to_string() });
        }
        let numbered = steps.iter().enumerate().all(|(i, s)| s.var == i + 1);
        if !numbered {
            return Err(bad(format!("frame of {name}: variables must be numbered 1, 2, ...")));
        }
        frames.insert(name.clone(), ActiveFrame { role: name, steps });
    }
    Ok(frames)
}

