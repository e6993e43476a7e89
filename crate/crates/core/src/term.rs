//! First-order terms, signatures, substitutions, contexts and strands.
//!
//! Terms are plain trees. Three kinds of leaves exist: variables (rule
//! variables or context holes), free constants (names not declared in the
//! signature) and nullary signature symbols such as `true` or `0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    FreeConstant,
    Function,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: Name,
    pub arity: usize,
    pub visibility: Visibility,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn function(name: &str, arity: usize, visibility: Visibility) -> Self {
        Symbol {
            name: self::name(name),
            arity,
            visibility,
            kind: SymbolKind::Function,
        }
    }

    /// Free constants are private by nature: the attacker cannot forge them.
    pub fn free_constant(name: &str) -> Self {
        Symbol {
            name: self::name(name),
            arity: 0,
            visibility: Visibility::Private,
            kind: SymbolKind::FreeConstant,
        }
    }

    pub fn is_public(&self) -> bool {
        self.visibility == Visibility::Public
    }
}

/// The declared function symbols of a deduction system. Free constants are
/// never declared; any undeclared nullary identifier is one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: BTreeMap<Name, Symbol>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, arity: usize, visibility: Visibility) -> Result<(), TermError> {
        if let Some(existing) = self.symbols.get(name) {
            if existing.arity != arity || existing.visibility != visibility {
                return Err(TermError::Redeclared { symbol: name.to_string() });
            }
            return Ok(());
        }
        self.symbols
            .insert(self::name(name), Symbol::function(name, arity, visibility));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn is_public(&self, name: &str) -> bool {
        self.get(name).map_or(false, Symbol::is_public)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn public_symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values().filter(|s| s.is_public())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Context hole `x_i` (1-based). Rendered `v_i` inside active frames.
    Hole(usize),
    /// Rule variable, e.g. `X` in `proj1(pair(X,Y)) -> X`.
    Named(Name),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    Const(Name),
    App(Name, Vec<Term>),
}

impl Term {
    pub fn hole(i: usize) -> Term {
        Term::Var(Var::Hole(i))
    }

    pub fn var(n: &str) -> Term {
        Term::Var(Var::Named(name(n)))
    }

    pub fn constant(n: &str) -> Term {
        Term::Const(name(n))
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(name(f), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App(_, args) => args,
            _ => &[],
        }
    }

    /// Head symbol name of an application, if any.
    pub fn head(&self) -> Option<&str> {
        match self {
            Term::App(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Free constants in left-to-right pre-order, first occurrence only.
    pub fn constants(&self) -> Vec<Name> {
        let mut out = Vec::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut Vec<Name>) {
        match self {
            Term::Const(c) => {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
            Term::Var(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_constants(out)),
        }
    }

    pub fn contains(&self, needle: &Term) -> bool {
        self == needle || self.args().iter().any(|a| a.contains(needle))
    }

    /// Number of nodes of the tree (not the DAG).
    pub fn tree_size(&self) -> usize {
        1 + self.args().iter().map(Term::tree_size).sum::<usize>()
    }

    /// Highest hole index occurring in the term, 0 when there is none.
    pub fn max_hole(&self) -> usize {
        match self {
            Term::Var(Var::Hole(i)) => *i,
            Term::Var(_) | Term::Const(_) => 0,
            Term::App(_, args) => args.iter().map(Term::max_hole).max().unwrap_or(0),
        }
    }

    /// Replace every `Const` leaf equal to `from` (at every position) by `to`.
    pub fn replace(&self, from: &Term, to: &Term) -> Term {
        if self == from {
            return to.clone();
        }
        match self {
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.replace(from, to)).collect()),
            other => other.clone(),
        }
    }

    /// Renders with context holes written `<prefix>_i`.
    pub fn display_holes<'a>(&'a self, prefix: &'a str) -> impl fmt::Display + 'a {
        HoleDisplay { term: self, prefix }
    }
}

struct HoleDisplay<'a> {
    term: &'a Term,
    prefix: &'a str,
}

impl fmt::Display for HoleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self.term, self.prefix, f)
    }
}

fn write_term(t: &Term, prefix: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(Var::Hole(i)) => write!(f, "{prefix}_{i}"),
        Term::Var(Var::Named(n)) => write!(f, "{n}"),
        Term::Const(c) => write!(f, "{c}"),
        Term::App(g, args) if args.is_empty() => write!(f, "{g}"),
        Term::App(g, args) => {
            write!(f, "{g}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write_term(a, prefix, f)?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, "x", f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("arity error: `{symbol}` expects {expected} argument(s), found {found}")]
    Arity { symbol: String, expected: usize, found: usize },
    #[error("unknown function symbol `{symbol}`")]
    UnknownSymbol { symbol: String },
    #[error("symbol `{symbol}` redeclared with a different arity or visibility")]
    Redeclared { symbol: String },
    #[error("`{ident}` is reserved for context holes")]
    Reserved { ident: String },
    #[error("hole x_{index} exceeds strand length {len}")]
    HoleOutOfRange { index: usize, len: usize },
    #[error("substitution is not idempotent: `{var}` occurs in a bound term")]
    NotIdempotent { var: String },
    #[error("`{term}` is not a context")]
    NotAContext { term: String },
}

/// Which identifiers a parse treats as variables.
#[derive(Clone, Copy, Debug)]
pub enum VarScope<'a> {
    /// No variables; the result is ground.
    Ground,
    /// Named rule variables.
    Named(&'a BTreeSet<String>),
    /// `x_i` and `v_i` denote context holes.
    Holes,
}

fn hole_index(ident: &str) -> Option<usize> {
    let rest = ident.strip_prefix("x_").or_else(|| ident.strip_prefix("v_"))?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Parse a ground term; undeclared identifiers become free constants.
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, TermError> {
    parse_term_in(text, sig, VarScope::Ground)
}

pub fn parse_context(text: &str, sig: &Signature) -> Result<Context, TermError> {
    let t = parse_term_in(text, sig, VarScope::Holes)?;
    Context::new(t, sig)
}

pub fn parse_term_in(text: &str, sig: &Signature, scope: VarScope<'_>) -> Result<Term, TermError> {
    let mut p = Parser { src: text, pos: 0, sig, scope };
    let t = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(t)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    sig: &'a Signature,
    scope: VarScope<'a>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> TermError {
        TermError::Syntax {
            column: self.src[..self.pos].chars().count() + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    // expr := atom ( "(+)" atom )*   -- left associative infix xor
    fn expr(&mut self) -> Result<Term, TermError> {
        let mut lhs = self.atom()?;
        while self.eat("(+)") {
            let rhs = self.atom()?;
            match self.sig.get("xor") {
                Some(s) if s.arity == 2 => {}
                _ => return Err(TermError::UnknownSymbol { symbol: "xor".into() }),
            }
            lhs = Term::app("xor", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn ident(&mut self) -> Result<&'a str, TermError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() => {}
            Some((_, '0')) => {
                // the xor unit; a lone digit token
                let len = rest
                    .char_indices()
                    .take_while(|(_, c)| c.is_ascii_alphanumeric() || *c == '_')
                    .count();
                if len == 1 {
                    self.pos += 1;
                    return Ok(&self.src[self.pos - 1..self.pos]);
                }
                return Err(self.err("expected identifier"));
            }
            _ => return Err(self.err("expected identifier")),
        }
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(rest.len(), |(i, _)| i);
        let start = self.pos;
        self.pos += len;
        Ok(&self.src[start..self.pos])
    }

    fn atom(&mut self) -> Result<Term, TermError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        if self.src[self.pos..].starts_with('(') && !self.src[self.pos..].starts_with("(+)") {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        let id = self.ident()?;
        let mut args = Vec::new();
        let has_parens = self.peek() == Some('(') && !self.src[self.pos..].starts_with("(+)");
        if has_parens {
            self.eat("(");
            if self.peek() == Some(')') {
                return Err(self.err("empty argument list"));
            }
            loop {
                args.push(self.expr()?);
                if self.eat(",") {
                    continue;
                }
                if self.eat(")") {
                    break;
                }
                return Err(self.err("expected `,` or `)`"));
            }
        }
        if let Some(sym) = self.sig.get(id) {
            if sym.arity != args.len() {
                return Err(TermError::Arity {
                    symbol: id.to_string(),
                    expected: sym.arity,
                    found: args.len(),
                });
            }
            return Ok(Term::App(sym.name.clone(), args));
        }
        if has_parens {
            return Err(TermError::UnknownSymbol { symbol: id.to_string() });
        }
        let reserved = hole_index(id);
        match self.scope {
            VarScope::Holes => match reserved {
                Some(0) => Err(TermError::Syntax {
                    column: start + 1,
                    message: "hole indices start at 1".into(),
                }),
                Some(i) => Ok(Term::hole(i)),
                None => Ok(Term::constant(id)),
            },
            VarScope::Named(vars) if vars.contains(id) => Ok(Term::var(id)),
            _ if reserved.is_some() => Err(TermError::Reserved { ident: id.to_string() }),
            _ => Ok(Term::constant(id)),
        }
    }
}

/// An idempotent finite map from variables to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new(bindings: BTreeMap<Var, Term>) -> Result<Self, TermError> {
        for t in bindings.values() {
            for v in t.vars() {
                if bindings.contains_key(&v) {
                    let shown = match &v {
                        Var::Hole(i) => format!("x_{i}"),
                        Var::Named(n) => n.to_string(),
                    };
                    return Err(TermError::NotIdempotent { var: shown });
                }
            }
        }
        Ok(Substitution { bindings })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn support(&self) -> impl Iterator<Item = &Var> {
        self.bindings.keys()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

pub fn apply_substitution(t: &Term, sigma: &Substitution) -> Term {
    match t {
        Term::Var(v) => sigma.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| apply_substitution(a, sigma)).collect()),
    }
}

/// A term over public symbols and holes, free of free constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context(Term);

impl Context {
    pub fn new(body: Term, sig: &Signature) -> Result<Self, TermError> {
        if is_context(&body, sig) {
            Ok(Context(body))
        } else {
            Err(TermError::NotAContext { term: body.to_string() })
        }
    }

    /// Caller guarantees `body` only uses public symbols and holes.
    pub(crate) fn trusted(body: Term) -> Self {
        Context(body)
    }

    pub fn hole(i: usize) -> Self {
        Context(Term::hole(i))
    }

    pub fn body(&self) -> &Term {
        &self.0
    }

    pub fn into_body(self) -> Term {
        self.0
    }

    pub fn dag_size(&self) -> usize {
        dag_size(&self.0)
    }

    pub fn max_hole(&self) -> usize {
        self.0.max_hole()
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn is_context(t: &Term, sig: &Signature) -> bool {
    match t {
        Term::Var(_) => true,
        Term::Const(_) => false,
        Term::App(f, args) => sig.is_public(f) && args.iter().all(|a| is_context(a, sig)),
    }
}

/// `C·s`: plug the i-th message of `s` into hole `x_i`. No rewriting.
pub fn instantiate_context(c: &Context, s: &PositiveStrand) -> Result<Term, TermError> {
    plug(c.body(), s.messages())
}

pub(crate) fn plug(t: &Term, msgs: &[Term]) -> Result<Term, TermError> {
    Ok(match t {
        Term::Var(Var::Hole(i)) => {
            if *i == 0 || *i > msgs.len() {
                return Err(TermError::HoleOutOfRange { index: *i, len: msgs.len() });
            }
            msgs[i - 1].clone()
        }
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| plug(a, msgs)).collect::<Result<_, _>>()?),
    })
}

pub fn subterms(t: &Term) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    collect_subterms(t, &mut out);
    out
}

pub(crate) fn collect_subterms(t: &Term, out: &mut BTreeSet<Term>) {
    if out.contains(t) {
        return;
    }
    for a in t.args() {
        collect_subterms(a, out);
    }
    out.insert(t.clone());
}

pub fn dag_size(t: &Term) -> usize {
    subterms(t).len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Send,
    Receive,
}

impl Polarity {
    pub fn sigil(self) -> char {
        match self {
            Polarity::Send => '!',
            Polarity::Receive => '?',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub polarity: Polarity,
    pub message: Term,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.polarity.sigil(), self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Strand {
    steps: Vec<Step>,
}

impl Strand {
    pub fn new(steps: Vec<Step>) -> Self {
        debug_assert!(steps.iter().all(|s| s.message.is_ground()));
        Strand { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.steps.iter().all(|s| s.polarity == Polarity::Send)
    }

    /// All messages with their labels dropped.
    pub fn to_positive(&self) -> PositiveStrand {
        PositiveStrand::new(self.steps.iter().map(|s| s.message.clone()).collect())
    }
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// A strand with only `!` labels, stored as its message list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PositiveStrand {
    messages: Vec<Term>,
}

impl PositiveStrand {
    pub fn new(messages: Vec<Term>) -> Self {
        PositiveStrand { messages }
    }

    pub fn messages(&self) -> &[Term] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn prefix(&self, n: usize) -> PositiveStrand {
        PositiveStrand::new(self.messages[..n].to_vec())
    }

    pub fn push(&mut self, t: Term) {
        self.messages.push(t);
    }

    pub fn to_strand(&self) -> Strand {
        Strand::new(
            self.messages
                .iter()
                .map(|m| Step { polarity: Polarity::Send, message: m.clone() })
                .collect(),
        )
    }
}

impl From<Vec<Term>> for PositiveStrand {
    fn from(messages: Vec<Term>) -> Self {
        PositiveStrand::new(messages)
    }
}

impl fmt::Display for PositiveStrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_strand().fmt(f)
    }
}
