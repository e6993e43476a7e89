//! Convergent rewriting modulo a user theory.
//!
//! A [`DeductionSystem`] is a signature with its public subset plus a list of
//! rewrite rules. Rules are required to be subterm convergent: every right
//! side is a proper subterm of its left side or a ground normal form, and all
//! critical pairs are joinable. The built-in `xor` system is the one exception:
//! it has no rules and instead canonicalizes `xor`/`0` terms as an AC theory
//! with unit and nilpotence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::term::{
    apply_substitution, dag_size, name, parse_term_in, Signature, Substitution, Term, TermError, Var, VarScope,
    Visibility,
};

pub const DOLEV_YAO_SOURCE: &str = include_str!("../../../theories/dolev_yao.thy");

pub const XOR: &str = "xor";
pub const ZERO: &str = "0";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RewriteRule {
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

impl RewriteRule {
    fn is_proper_subterm_rhs(&self) -> bool {
        self.lhs != self.rhs && self.lhs.contains(&self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Term { line: usize, source: TermError },
    #[error("theory file has no `theory <name>` header")]
    MissingHeader,
    #[error("theory file is missing its `end` line")]
    MissingEnd,
    #[error("cannot extend theory `{theory}`: {source}")]
    Extend { theory: String, source: TermError },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeductionSystem {
    pub name: String,
    pub sig: Signature,
    pub rules: Vec<RewriteRule>,
    ac_xor: bool,
}

impl DeductionSystem {
    pub fn new(name: &str, sig: Signature, rules: Vec<RewriteRule>) -> Self {
        DeductionSystem { name: name.to_string(), sig, rules, ac_xor: false }
    }

    /// The shipped Dolev-Yao theory (pairs, encryption, tests, narration wrapper).
    pub fn dolev_yao() -> Self {
        parse_theory(DOLEV_YAO_SOURCE).expect("built-in theory parses")
    }

    /// Exclusive or over free constants: public `xor/2` and `0/0`.
    pub fn xor() -> Self {
        let mut sig = Signature::new();
        sig.declare(XOR, 2, Visibility::Public).expect("fresh signature");
        sig.declare(ZERO, 0, Visibility::Public).expect("fresh signature");
        DeductionSystem { name: XOR.into(), sig, rules: Vec::new(), ac_xor: true }
    }

    pub fn is_xor(&self) -> bool {
        self.ac_xor
    }

    /// Adds `msg/2`, `partner/1`, `payload/1` and their two projection rules
    /// unless already present.
    pub fn with_narration_symbols(&self) -> Result<Self, TheoryError> {
        let mut d = self.clone();
        let ext = |e| TheoryError::Extend { theory: self.name.clone(), source: e };
        d.sig.declare("msg", 2, Visibility::Public).map_err(ext)?;
        d.sig.declare("partner", 1, Visibility::Public).map_err(ext)?;
        d.sig.declare("payload", 1, Visibility::Public).map_err(ext)?;
        let wrapped = Term::app("msg", vec![Term::var("X"), Term::var("Y")]);
        for (proj, rhs) in [("partner", "X"), ("payload", "Y")] {
            let rule = RewriteRule { lhs: Term::app(proj, vec![wrapped.clone()]), rhs: Term::var(rhs) };
            let present = d.rules.iter().any(|r| r.lhs.head() == Some(proj));
            if !present {
                d.rules.push(rule);
            }
        }
        Ok(d)
    }

    /// Default saturation bound: the largest DAG size among rule left sides.
    pub fn default_bound(&self) -> usize {
        self.rules.iter().map(|r| dag_size(&r.lhs)).max().unwrap_or(1).max(1)
    }

    /// Ground right-hand sides of the rules.
    pub fn ground_rhs(&self) -> Vec<Term> {
        let mut out: Vec<Term> = self.rules.iter().filter(|r| r.rhs.is_ground()).map(|r| r.rhs.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Named deduction systems available to narrations. Always holds the
/// built-in `dolev_yao` and `xor` systems.
#[derive(Clone, Debug)]
pub struct TheoryStore {
    theories: BTreeMap<String, DeductionSystem>,
}

impl Default for TheoryStore {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl TheoryStore {
    pub fn with_builtins() -> Self {
        let mut theories = BTreeMap::new();
        for d in [DeductionSystem::dolev_yao(), DeductionSystem::xor()] {
            theories.insert(d.name.clone(), d);
        }
        TheoryStore { theories }
    }

    /// Adds or replaces a theory under its own name.
    pub fn insert(&mut self, d: DeductionSystem) {
        self.theories.insert(d.name.clone(), d);
    }

    pub fn get(&self, name: &str) -> Option<&DeductionSystem> {
        self.theories.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.theories.keys().map(String::as_str)
    }
}

/// Parse the line-oriented theory format.
pub fn parse_theory(text: &str) -> Result<DeductionSystem, TheoryError> {
    let mut theory_name: Option<String> = None;
    let mut sig = Signature::new();
    let mut vars: BTreeSet<String> = BTreeSet::new();
    let mut rules = Vec::new();
    let mut ended = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: &str| TheoryError::Parse { line, message: message.to_string() };
        if ended {
            return Err(perr("content after `end`"));
        }
        let (kw, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match kw {
            "theory" => {
                if theory_name.is_some() {
                    return Err(perr("duplicate `theory` header"));
                }
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(perr("expected `theory <name>`"));
                }
                theory_name = Some(rest.to_string());
            }
            _ if theory_name.is_none() => return Err(TheoryError::MissingHeader),
            "public" | "private" => {
                let vis = if kw == "public" { Visibility::Public } else { Visibility::Private };
                for decl in rest.split_whitespace() {
                    let (sym, arity) = decl.split_once('/').ok_or_else(|| perr("expected `name/arity`"))?;
                    let arity: usize = arity.parse().map_err(|_| perr("arity must be a natural number"))?;
                    if !valid_symbol_name(sym) {
                        return Err(perr(&format!("invalid symbol name `{sym}`")));
                    }
                    sig.declare(sym, arity, vis).map_err(|source| TheoryError::Term { line, source })?;
                }
            }
            "vars" => {
                for v in rest.split_whitespace() {
                    if !valid_symbol_name(v) || sig.contains(v) {
                        return Err(perr(&format!("invalid variable name `{v}`")));
                    }
                    vars.insert(v.to_string());
                }
            }
            "rule" => {
                let (l, r) = rest.split_once("->").ok_or_else(|| perr("expected `rule <lhs> -> <rhs>`"))?;
                let scope = VarScope::Named(&vars);
                let lhs = parse_term_in(l.trim(), &sig, scope).map_err(|source| TheoryError::Term { line, source })?;
                let rhs = parse_term_in(r.trim(), &sig, scope).map_err(|source| TheoryError::Term { line, source })?;
                rules.push(RewriteRule { lhs, rhs });
            }
            "end" => {
                if !rest.is_empty() {
                    return Err(perr("unexpected text after `end`"));
                }
                ended = true;
            }
            other => return Err(perr(&format!("unknown keyword `{other}`"))),
        }
    }
    let name = theory_name.ok_or(TheoryError::MissingHeader)?;
    if !ended {
        return Err(TheoryError::MissingEnd);
    }
    Ok(DeductionSystem::new(&name, sig, rules))
}

fn valid_symbol_name(s: &str) -> bool {
    s == ZERO
        || (s.chars().next().map_or(false, |c| c.is_ascii_alphabetic())
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

/// Render a theory back into its file format.
pub fn print_theory(d: &DeductionSystem) -> String {
    let mut out = format!("theory {}\n", d.name);
    for (kw, vis) in [("public", Visibility::Public), ("private", Visibility::Private)] {
        let decls: Vec<String> =
            d.sig.symbols().filter(|s| s.visibility == vis).map(|s| format!("{}/{}", s.name, s.arity)).collect();
        if !decls.is_empty() {
            out.push_str(&format!("{kw} {}\n", decls.join(" ")));
        }
    }
    let vars: BTreeSet<String> = d
        .rules
        .iter()
        .flat_map(|r| r.lhs.vars())
        .filter_map(|v| match v {
            Var::Named(n) => Some(n.to_string()),
            Var::Hole(_) => None,
        })
        .collect();
    if !vars.is_empty() {
        out.push_str(&format!("vars {}\n", vars.into_iter().collect::<Vec<_>>().join(" ")));
    }
    for r in &d.rules {
        out.push_str(&format!("rule {r}\n"));
    }
    out.push_str("end\n");
    out
}

pub type Bindings = BTreeMap<Var, Term>;

/// Syntactic matching of `pattern` against `term`, extending `binds`.
pub fn match_term(pattern: &Term, term: &Term, binds: &mut Bindings) -> bool {
    match pattern {
        Term::Var(v) => match binds.get(v) {
            Some(bound) => bound == term,
            None => {
                binds.insert(v.clone(), term.clone());
                true
            }
        },
        Term::Const(_) => pattern == term,
        Term::App(f, pargs) => match term {
            Term::App(g, targs) if f == g && pargs.len() == targs.len() => {
                pargs.iter().zip(targs).all(|(p, t)| match_term(p, t, binds))
            }
            _ => false,
        },
    }
}

pub fn substitute(t: &Term, binds: &Bindings) -> Term {
    match t {
        Term::Var(v) => binds.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| substitute(a, binds)).collect()),
    }
}

/// Innermost normalization. Variables are treated as opaque constants, so
/// this also normalizes open terms such as contexts.
pub fn normalize(t: &Term, d: &DeductionSystem) -> Term {
    match t {
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => {
            let args: Vec<Term> = args.iter().map(|a| normalize(a, d)).collect();
            let t = Term::App(f.clone(), args);
            let t = if d.ac_xor && &**f == XOR { xor_flatten(&t) } else { t };
            rewrite_root(t, d)
        }
    }
}

fn rewrite_root(t: Term, d: &DeductionSystem) -> Term {
    for rule in &d.rules {
        let mut binds = Bindings::new();
        if match_term(&rule.lhs, &t, &mut binds) {
            // right sides are built from normal forms or ground normal forms,
            // but renormalize for the general (xor-wrapped) case
            return normalize(&substitute(&rule.rhs, &binds), d);
        }
    }
    t
}

/// Canonical xor form: operands flattened, sorted, paired occurrences cancelled,
/// `0` removed, rebuilt right-nested.
fn xor_flatten(t: &Term) -> Term {
    let mut operands = Vec::new();
    collect_xor_operands(t, &mut operands);
    operands.sort();
    let mut kept: Vec<Term> = Vec::new();
    for o in operands {
        if kept.last() == Some(&o) {
            kept.pop();
        } else {
            kept.push(o);
        }
    }
    build_xor(kept)
}

fn collect_xor_operands(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::App(f, args) if &**f == XOR => args.iter().for_each(|a| collect_xor_operands(a, out)),
        Term::App(f, args) if &**f == ZERO && args.is_empty() => {}
        other => out.push(other.clone()),
    }
}

pub(crate) fn build_xor(mut operands: Vec<Term>) -> Term {
    match operands.len() {
        0 => Term::app(ZERO, vec![]),
        1 => operands.pop().expect("one operand"),
        _ => {
            let last = operands.pop().expect("non-empty");
            operands.into_iter().rev().fold(last, |acc, o| Term::app(XOR, vec![o, acc]))
        }
    }
}

pub fn equal_mod(t: &Term, u: &Term, d: &DeductionSystem) -> bool {
    normalize(t, d) == normalize(u, d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleCheck {
    pub index: usize,
    pub rule: String,
    pub lhs_not_variable: bool,
    pub vars_contained: bool,
    pub subterm_or_ground: bool,
    pub ground_rhs_normal: bool,
}

impl RuleCheck {
    pub fn ok(&self) -> bool {
        self.lhs_not_variable && self.vars_contained && self.subterm_or_ground && self.ground_rhs_normal
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalPair {
    pub outer: usize,
    pub inner: usize,
    pub position: Vec<usize>,
    pub left: Term,
    pub right: Term,
    pub joinable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub theory: String,
    pub rules: Vec<RuleCheck>,
    pub critical_pairs: Vec<CriticalPair>,
    pub notes: Vec<String>,
    pub accepted: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory {}", self.theory)?;
        for r in &self.rules {
            let mut problems = Vec::new();
            if !r.lhs_not_variable {
                problems.push("left side is a variable");
            }
            if !r.vars_contained {
                problems.push("right side has variables not in left side");
            }
            if !r.subterm_or_ground {
                problems.push("right side is neither a proper subterm nor ground");
            }
            if !r.ground_rhs_normal {
                problems.push("ground right side is not in normal form");
            }
            if problems.is_empty() {
                writeln!(f, "  rule {}: {}: ok", r.index + 1, r.rule)?;
            } else {
                writeln!(f, "  rule {}: {}: {}", r.index + 1, r.rule, problems.join("; "))?;
            }
        }
        for cp in &self.critical_pairs {
            writeln!(
                f,
                "  critical pair (rule {} into rule {} at {:?}): {} <-> {}: {}",
                cp.inner + 1,
                cp.outer + 1,
                cp.position,
                cp.left,
                cp.right,
                if cp.joinable { "joinable" } else { "NOT joinable" }
            )?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        writeln!(f, "verdict: {}", if self.accepted { "accepted" } else { "rejected" })
    }
}

pub fn validate_subterm_convergent(d: &DeductionSystem) -> ValidationReport {
    let mut notes = Vec::new();
    if d.ac_xor {
        notes.push("built-in AC theory for exclusive or; decided by linear algebra".to_string());
    }
    let rules: Vec<RuleCheck> = d
        .rules
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let lhs_not_variable = !matches!(r.lhs, Term::Var(_));
            let vars_contained = r.rhs.vars().is_subset(&r.lhs.vars());
            let subterm_or_ground = r.is_proper_subterm_rhs() || r.rhs.is_ground();
            // a ground rhs must not be reducible by any rule (no re-ignition)
            let ground_rhs_normal = !r.rhs.is_ground() || is_irreducible(&r.rhs, d);
            RuleCheck { index, rule: r.to_string(), lhs_not_variable, vars_contained, subterm_or_ground, ground_rhs_normal }
        })
        .collect();
    let rules_ok = rules.iter().all(RuleCheck::ok);
    let critical_pairs = if rules_ok {
        critical_pairs(d)
    } else {
        notes.push("critical pairs not computed: some rule is not admissible".into());
        Vec::new()
    };
    let accepted = rules_ok && critical_pairs.iter().all(|c| c.joinable);
    ValidationReport { theory: d.name.clone(), rules, critical_pairs, notes, accepted }
}

fn is_irreducible(t: &Term, d: &DeductionSystem) -> bool {
    let reducible_here = d.rules.iter().any(|r| match_term(&r.lhs, t, &mut Bindings::new()));
    !reducible_here && t.args().iter().all(|a| is_irreducible(a, d))
}

fn rename_apart(t: &Term) -> Term {
    match t {
        Term::Var(Var::Named(n)) => Term::Var(Var::Named(name(&format!("{n}'")))),
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(rename_apart).collect()),
    }
}

fn positions(t: &Term) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if let Term::App(_, args) = t {
            out.push(path.clone());
            for (i, a) in args.iter().enumerate() {
                path.push(i);
                go(a, path, out);
                path.pop();
            }
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

fn at<'a>(t: &'a Term, pos: &[usize]) -> &'a Term {
    pos.iter().fold(t, |t, &i| &t.args()[i])
}

fn replace_at(t: &Term, pos: &[usize], with: &Term) -> Term {
    match pos.split_first() {
        None => with.clone(),
        Some((&i, rest)) => match t {
            Term::App(f, args) => {
                let mut args = args.clone();
                args[i] = replace_at(&args[i], rest, with);
                Term::App(f.clone(), args)
            }
            _ => unreachable!("position outside term"),
        },
    }
}

/// Robinson unification on open terms; returns an idempotent unifier.
pub fn unify(a: &Term, b: &Term) -> Option<Substitution> {
    let mut binds = Bindings::new();
    let mut stack = vec![(a.clone(), b.clone())];
    while let Some((s, t)) = stack.pop() {
        let s = resolve(&s, &binds);
        let t = resolve(&t, &binds);
        if s == t {
            continue;
        }
        match (&s, &t) {
            (Term::Var(v), other) | (other, Term::Var(v)) => {
                if other.vars().contains(v) {
                    return None;
                }
                let single: Bindings = [(v.clone(), other.clone())].into_iter().collect();
                for val in binds.values_mut() {
                    *val = substitute(val, &single);
                }
                binds.insert(v.clone(), other.clone());
            }
            (Term::App(f, xs), Term::App(g, ys)) if f == g && xs.len() == ys.len() => {
                stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
            _ => return None,
        }
    }
    Substitution::new(binds).ok()
}

fn resolve(t: &Term, binds: &Bindings) -> Term {
    substitute(t, binds)
}

fn critical_pairs(d: &DeductionSystem) -> Vec<CriticalPair> {
    let mut out = Vec::new();
    for (i, outer) in d.rules.iter().enumerate() {
        for (j, inner) in d.rules.iter().enumerate() {
            let inner_lhs = rename_apart(&inner.lhs);
            let inner_rhs = rename_apart(&inner.rhs);
            for pos in positions(&outer.lhs) {
                if i == j && pos.is_empty() {
                    continue;
                }
                let Some(mgu) = unify(at(&outer.lhs, &pos), &inner_lhs) else { continue };
                let left = apply_substitution(&outer.rhs, &mgu);
                let right = apply_substitution(&replace_at(&outer.lhs, &pos, &inner_rhs), &mgu);
                let joinable = normalize(&left, d) == normalize(&right, d);
                out.push(CriticalPair { outer: i, inner: j, position: pos, left, right, joinable });
            }
        }
    }
    out
}
