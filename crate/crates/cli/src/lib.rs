//! Command implementations behind the `prudent` binary.
//!
//! Each command returns a [`Report`] holding its exit code and output so the
//! binary stays a thin wrapper and tests can call the commands directly.

pub mod audit;
pub mod doc;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use prudent_core::compiler::{compile_role, ActiveFrame, CompileOptions, EmitMode};
use prudent_core::narration::{
    has_errors, narration_theory, parse_narration, validate_narration, Narration, NarrationError, Severity,
};
use prudent_core::rewrite::{parse_theory, print_theory, validate_subterm_convergent, DeductionSystem, TheoryError, TheoryStore};
use prudent_core::role::{extract_roles, RoleError, RoleSpec};
use prudent_core::runtime::{simulate, Mutation, Outcome};
use prudent_core::term::{Name, Polarity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Theory { path: PathBuf, source: TheoryError },
    #[error("{path}: {source}")]
    Narration { path: PathBuf, source: NarrationError },
    #[error("malformed document: {0}")]
    Document(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Canonical JSON document with sorted keys.
    #[default]
    Doc,
    /// Human-readable notation.
    Pretty,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Report {
    fn error(e: CliError) -> Self {
        Report { code: EXIT_ERROR, stdout: String::new(), stderr: format!("error: {e}\n") }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PipelineArgs {
    /// Extra theory files, available by their `theory` name.
    pub theories: Vec<PathBuf>,
    pub bound: Option<usize>,
    pub emit: EmitMode,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn load_store(paths: &[PathBuf]) -> Result<TheoryStore, CliError> {
    let mut store = TheoryStore::with_builtins();
    for p in paths {
        let d = parse_theory(&read(p)?).map_err(|source| CliError::Theory { path: p.clone(), source })?;
        store.insert(d);
    }
    Ok(store)
}

/// A parsed, validated narration with its roles and (if all executable) frames.
pub struct Pipeline {
    pub narration: Narration,
    pub theory: DeductionSystem,
    pub roles: Vec<RoleSpec>,
    pub frames: IndexMap<Name, ActiveFrame>,
    pub bound: usize,
    pub emit: EmitMode,
    /// Validation warnings and compile failures, one per line.
    pub diagnostics: Vec<String>,
    pub failed: bool,
}

/// Run the pipeline on narration text; `path` only labels diagnostics.
pub fn build(text: &str, path: &Path, store: &TheoryStore, args: &PipelineArgs) -> Result<Pipeline, CliError> {
    let wrap = |source| CliError::Narration { path: path.to_path_buf(), source };
    let narration = parse_narration(text, store).map_err(wrap)?;
    let theory = narration_theory(&narration.theory_name, store).map_err(wrap)?;
    let bound = args.bound.unwrap_or_else(|| theory.default_bound());
    let mut p = Pipeline {
        narration,
        theory,
        roles: Vec::new(),
        frames: IndexMap::new(),
        bound,
        emit: args.emit,
        diagnostics: Vec::new(),
        failed: false,
    };
    let diags = validate_narration(&p.narration);
    for d in &diags {
        let level = if d.severity == Severity::Error { "error" } else { "warning" };
        p.diagnostics.push(format!("{}:{}: {level}: {}", path.display(), d.line, d.message));
    }
    if has_errors(&diags) {
        p.failed = true;
        return Ok(p);
    }
    p.roles = match extract_roles(&p.narration) {
        Ok(r) => r,
        Err(e @ RoleError::SharedNonce { .. }) => {
            p.diagnostics.push(format!("{}: error: {e}", path.display()));
            p.failed = true;
            return Ok(p);
        }
    };
    let opts = CompileOptions { bound: Some(bound), emit: args.emit };
    for r in &p.roles {
        match compile_role(r, &p.theory, opts) {
            Ok(f) => {
                p.frames.insert(r.name.clone(), f);
            }
            Err(e) => {
                p.diagnostics.push(format!("{}: error: {e}", path.display()));
                p.failed = true;
            }
        }
    }
    Ok(p)
}

pub fn pipeline(path: &Path, args: &PipelineArgs) -> Result<Pipeline, CliError> {
    let store = load_store(&args.theories)?;
    build(&read(path)?, path, &store, args)
}

fn diagnostics(p: &Pipeline) -> String {
    p.diagnostics.iter().map(|d| format!("{d}\n")).collect()
}

pub fn cmd_check(path: &Path) -> Report {
    let text = match read(path) {
        Ok(t) => t,
        Err(e) => return Report::error(e),
    };
    let d = match parse_theory(&text) {
        Ok(d) => d,
        Err(source) => return Report::error(CliError::Theory { path: path.to_path_buf(), source }),
    };
    let report = validate_subterm_convergent(&d);
    let mut stdout = report.to_string();
    if report.accepted {
        let _ = writeln!(stdout, "default bound: {}", d.default_bound());
    }
    Report { code: if report.accepted { EXIT_OK } else { EXIT_REJECTED }, stdout, stderr: String::new() }
}

/// The compile document of a pipeline whose roles all compiled.
pub fn compile_document(p: &Pipeline) -> Value {
    let store = TheoryStore::with_builtins();
    let mut v = json!({
        "protocol": p.narration.name,
        "theory": p.narration.theory_name,
        "bound": p.bound,
        "emit": p.emit.as_str(),
        "narration": p.narration.to_string(),
        "roles": p.roles.iter().map(|r| doc::role(r, &p.frames[&r.name])).collect::<Vec<_>>(),
    });
    if store.get(&p.narration.theory_name).is_none() {
        // custom theories travel with the document
        let base = p.theory.clone();
        v["theory_source"] = json!(print_theory(&base));
    }
    v
}

fn pretty_compile(p: &Pipeline) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "protocol {} (theory {}, bound {}, emit {})",
        p.narration.name,
        p.narration.theory_name,
        p.bound,
        p.emit.as_str()
    );
    for r in &p.roles {
        let _ = writeln!(out, "\nrole {r}");
        for line in p.frames[&r.name].to_string().lines() {
            let _ = writeln!(out, "  {line}");
        }
    }
    out
}

pub fn cmd_compile(path: &Path, args: &PipelineArgs, format: Format) -> Report {
    let p = match pipeline(path, args) {
        Ok(p) => p,
        Err(e) => return Report::error(e),
    };
    if p.failed {
        return Report { code: EXIT_REJECTED, stdout: String::new(), stderr: diagnostics(&p) };
    }
    let stdout = match format {
        Format::Doc => doc::render(&compile_document(&p)),
        Format::Pretty => pretty_compile(&p),
    };
    Report { code: EXIT_OK, stdout, stderr: diagnostics(&p) }
}

/// Reload a compile document: narration, theory and frames.
pub fn load_document(text: &str, path: &Path, args: &PipelineArgs) -> Result<Pipeline, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Document(e.to_string()))?;
    let mut store = load_store(&args.theories)?;
    if let Some(src) = v.get("theory_source").and_then(Value::as_str) {
        let d = parse_theory(src).map_err(|source| CliError::Theory { path: path.to_path_buf(), source })?;
        store.insert(d);
    }
    let narration_text =
        v.get("narration").and_then(Value::as_str).ok_or_else(|| CliError::Document("missing field `narration`".into()))?;
    let wrap = |source| CliError::Narration { path: path.to_path_buf(), source };
    let narration = parse_narration(narration_text, &store).map_err(wrap)?;
    let theory = narration_theory(&narration.theory_name, &store).map_err(wrap)?;
    let roles = extract_roles(&narration).map_err(|e| CliError::Document(e.to_string()))?;
    let frames = doc::load_frames(&v, &theory)?;
    for r in &roles {
        if !frames.contains_key(&r.name) {
            return Err(CliError::Document(format!("no frame for role {}", r.name)));
        }
    }
    let bound = v.get("bound").and_then(Value::as_u64).map_or_else(|| theory.default_bound(), |b| b as usize);
    let emit = v.get("emit").and_then(Value::as_str).and_then(|e| e.parse().ok()).unwrap_or_default();
    Ok(Pipeline { narration, theory, roles, frames, bound, emit, diagnostics: Vec::new(), failed: false })
}

fn is_document(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

pub fn cmd_simulate(path: &Path, args: &PipelineArgs, mutation: Option<&Mutation>, format: Format) -> Report {
    let text = match read(path) {
        Ok(t) => t,
        Err(e) => return Report::error(e),
    };
    let p = if is_document(&text) {
        load_document(&text, path, args)
    } else {
        load_store(&args.theories).and_then(|store| build(&text, path, &store, args))
    };
    let p = match p {
        Ok(p) => p,
        Err(e) => return Report::error(e),
    };
    if p.failed {
        return Report { code: EXIT_REJECTED, stdout: String::new(), stderr: diagnostics(&p) };
    }
    if let Some(m) = mutation {
        let sends = p.frames.values().flat_map(|f| f.steps.iter()).any(|s| s.var == m.step && s.polarity() == Polarity::Send);
        if !sends {
            return Report::error(CliError::Usage(format!("--mutate step={}: no role sends at that frame step", m.step)));
        }
    }
    let t = simulate(&p.narration, &p.frames, &p.theory, mutation);
    let mut stderr = diagnostics(&p);
    for (role, e) in t.failed_equations() {
        let f = &p.frames[role];
        let _ = writeln!(stderr, "{role}: failed check {e}   ({} \u{225f} {})", f.render(&e.lhs), f.render(&e.rhs));
    }
    if let Outcome::Deadlock { role, line, reason } = &t.outcome {
        let _ = writeln!(stderr, "deadlock at line {line} ({role}): {reason}");
    }
    let stdout = match format {
        Format::Doc => {
            let mut v = doc::transcript(&t);
            v["protocol"] = json!(p.narration.name);
            if let Some(m) = mutation {
                v["mutation"] = json!({ "step": m.step, "replace": m.replace.as_ref() });
            }
            doc::render(&v)
        }
        Format::Pretty => t.to_string(),
    };
    Report { code: if t.completed() { EXIT_OK } else { EXIT_REJECTED }, stdout, stderr }
}

#[derive(Clone, Debug)]
pub struct AuditArgs {
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AuditArgs {
    fn default() -> Self {
        AuditArgs { depth: 3, samples: 300, seed: 0 }
    }
}

/// Audit every role of a compiled pipeline.
pub fn audit_pipeline(p: &Pipeline, audit: &AuditArgs) -> Vec<audit::RoleAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(audit.seed);
    p.roles
        .iter()
        .map(|r| audit::audit_role(r, &p.frames[&r.name], &p.theory, audit.depth, audit.samples, &mut rng))
        .collect()
}

pub fn cmd_audit(path: &Path, args: &PipelineArgs, audit: &AuditArgs, format: Format) -> Report {
    let p = match pipeline(path, args) {
        Ok(p) => p,
        Err(e) => return Report::error(e),
    };
    if p.failed {
        return Report { code: EXIT_REJECTED, stdout: String::new(), stderr: diagnostics(&p) };
    }
    let results = audit_pipeline(&p, audit);
    let clean = results.iter().all(|a| a.violations.is_empty());
    let stdout = match format {
        Format::Doc => doc::render(&json!({
            "protocol": p.narration.name,
            "depth": audit.depth,
            "emit": p.emit.as_str(),
            "clean": clean,
            "roles": results.iter().map(|a| json!({
                "role": a.role.as_ref(),
                "oracle_pairs": a.oracle_pairs,
                "included": a.included,
                "sampled": a.sampled,
                "accepted_mutants": a.accepted_mutants,
                "violations": a.violations.iter().map(|(pair, s)| json!({
                    "pair": pair.to_string(),
                    "input": s.messages().iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })),
        Format::Pretty => {
            let mut out = String::new();
            for a in &results {
                let _ = writeln!(
                    out,
                    "role {}: {} oracle pairs (depth {}), {} among the checks, {}/{} mutants accepted, {} violations",
                    a.role,
                    a.oracle_pairs,
                    audit.depth,
                    a.included,
                    a.accepted_mutants,
                    a.sampled,
                    a.violations.len()
                );
                for (pair, s) in &a.violations {
                    let _ = writeln!(out, "  violated {pair} on {s}");
                }
            }
            out
        }
    };
    let mut stderr = diagnostics(&p);
    for a in &results {
        for (pair, _) in &a.violations {
            let _ = writeln!(stderr, "{}: accepted input violates oracle equality {pair}", a.role);
        }
    }
    Report { code: if clean { EXIT_OK } else { EXIT_REJECTED }, stdout, stderr }
}
