//! Rule-based loop classifier over token-level statements.
//!
//! Rules run in order: reduction detection, non-parallel detection, then
//! private detection. The analysis is intentionally shallow (no alias or
//! inter-procedural reasoning) and errs towards non-parallel.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::clex::{self, Tok};
use super::{DecisionSource, LoopSource, OracleError, PatternDecision};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicConfig {
    /// Treat distinct array bases as possibly overlapping storage when
    /// comparing write and read subscripts.
    pub assume_may_alias: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { assume_may_alias: true }
    }
}

pub fn decide_heuristic(loop_src: &LoopSource) -> Result<PatternDecision, OracleError> {
    decide_heuristic_with(loop_src, &HeuristicConfig::default())
}

pub fn decide_heuristic_with(loop_src: &LoopSource, cfg: &HeuristicConfig) -> Result<PatternDecision, OracleError> {
    let unsupported = OracleError::UnsupportedLoop;
    let toks = clex::lex(&loop_src.code).map_err(|e| unsupported(e.0))?;
    let lp = clex::find_outer_for(&toks).map_err(unsupported)?;
    let iv = induction_variable(&lp.init).ok_or_else(|| unsupported("no induction variable".into()))?;
    if !lp.step.iter().any(|t| t.ident() == Some(iv.as_str())) {
        return Err(unsupported(format!("loop step does not update `{iv}`")));
    }
    let stmts = clex::split_statements(&lp.body).map_err(unsupported)?;
    Ok(Analysis::new(&iv, &stmts).decide(cfg))
}

const TYPE_WORDS: &[&str] = &[
    "int", "long", "short", "char", "float", "double", "unsigned", "signed", "const", "static", "register", "volatile",
    "size_t", "bool", "_Bool", "auto", "struct", "void",
];

const KEYWORDS: &[&str] = &[
    "sizeof", "return", "break", "continue", "goto", "if", "else", "for", "while", "do", "switch", "case", "default",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

fn induction_variable(init: &[Tok]) -> Option<String> {
    let mut rest = init;
    while rest
        .first()
        .is_some_and(|t| t.ident().is_some_and(|w| TYPE_WORDS.contains(&w)))
    {
        rest = &rest[1..];
    }
    match rest {
        [Tok::Ident(v), Tok::Punct("="), ..] => Some(v.clone()),
        _ => None,
    }
}

fn is_type_word(t: &Tok) -> bool {
    t.ident().is_some_and(|w| TYPE_WORDS.contains(&w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Read,
    Write,
}

#[derive(Debug, Clone)]
struct Access {
    stmt: usize,
    /// Scalar name (member paths joined with `.`) or array base.
    name: String,
    /// Normalized subscript texts; empty for scalars.
    subscripts: Vec<Subscript>,
    /// Set for `s.x`-style accesses through a struct that is not indexed.
    member_path: bool,
    mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Subscript {
    text: String,
    idents: BTreeSet<String>,
}

impl Access {
    fn is_array(&self) -> bool {
        !self.subscripts.is_empty()
    }
}

struct Analysis<'a> {
    iv: &'a str,
    stmts: &'a [Vec<Tok>],
    accesses: Vec<Access>,
    locals: HashSet<String>,
    early_exit: bool,
}

impl<'a> Analysis<'a> {
    fn new(iv: &'a str, stmts: &'a [Vec<Tok>]) -> Self {
        let mut a = Analysis {
            iv,
            stmts,
            accesses: Vec::new(),
            locals: HashSet::new(),
            early_exit: false,
        };
        for (k, s) in stmts.iter().enumerate() {
            a.statement(k, s);
        }
        a
    }

    fn statement(&mut self, k: usize, s: &[Tok]) {
        if s.first().is_some_and(|t| t.is_ident("return") || t.is_ident("goto")) {
            self.early_exit = true;
        }
        if s.first().is_some_and(is_type_word) {
            self.declaration(k, s);
            return;
        }
        match s {
            [Tok::Punct("++" | "--"), rest @ ..] | [rest @ .., Tok::Punct("++" | "--")] if !rest.is_empty() => {
                self.lvalue(k, rest, true);
                return;
            }
            _ => {}
        }
        let assign = top_level_position(s, |t| ASSIGN_OPS.iter().any(|op| t.is_punct(op)));
        match assign {
            Some(p) => {
                self.expr(k, &s[p + 1..]);
                self.lvalue(k, &s[..p], !s[p].is_punct("="));
            }
            None => self.expr(k, s),
        }
    }

    fn declaration(&mut self, k: usize, s: &[Tok]) {
        let mut start = 0;
        while s.get(start).is_some_and(is_type_word) {
            start += 1;
        }
        // `struct tag name` skips the tag
        if s.first().is_some_and(|t| t.is_ident("struct")) && s.get(start + 1).is_some_and(|t| t.ident().is_some()) {
            start += 1;
        }
        for decl in clex::split_depth0(&s[start..], ",") {
            let mut d = decl;
            while d.first().is_some_and(|t| t.is_punct("*")) {
                d = &d[1..];
            }
            let Some(name) = d.first().and_then(Tok::ident) else {
                continue;
            };
            self.locals.insert(name.to_string());
            if let Some(eq) = top_level_position(d, |t| t.is_punct("=")) {
                self.expr(k, &d[1..eq]);
                self.expr(k, &d[eq + 1..]);
            } else {
                self.expr(k, &d[1..]);
            }
        }
    }

    /// Records the accesses of an assignment target; compound targets are
    /// read before they are written.
    fn lvalue(&mut self, k: usize, lhs: &[Tok], compound: bool) {
        let mut lhs = lhs;
        let mut deref = false;
        while lhs.first().is_some_and(|t| t.is_punct("*")) {
            lhs = &lhs[1..];
            deref = true;
        }
        if lhs.first().is_some_and(|t| t.is_punct("(")) && clex::matching_close(lhs, 0) == Some(lhs.len() - 1) {
            return self.lvalue(k, &lhs[1..lhs.len() - 1], compound);
        }
        let Some((mut acc, used)) = self.reference(k, lhs, 0) else {
            self.expr(k, lhs);
            return;
        };
        if used != lhs.len() {
            // not a simple reference: treat as an unknown write
            self.expr(k, lhs);
            acc.subscripts.push(Subscript {
                text: String::new(),
                idents: BTreeSet::new(),
            });
        }
        if deref && acc.subscripts.is_empty() {
            acc.subscripts.push(Subscript {
                text: String::new(),
                idents: BTreeSet::new(),
            });
        }
        if compound {
            self.accesses.push(Access {
                mode: Mode::Read,
                ..acc.clone()
            });
        }
        self.accesses.push(Access {
            mode: Mode::Write,
            ..acc
        });
    }

    /// Parses `name([..])*((.|->)member([..])*)*` starting at `i`, recording
    /// reads inside subscripts. Returns the access (as a read) and the index
    /// just past it.
    fn reference(&mut self, k: usize, toks: &[Tok], i: usize) -> Option<(Access, usize)> {
        let base = toks.get(i)?.ident()?;
        if KEYWORDS.contains(&base) || TYPE_WORDS.contains(&base) {
            return None;
        }
        let mut name = base.to_string();
        let mut subscripts = Vec::new();
        let mut member_path = false;
        let mut j = i + 1;
        loop {
            match toks.get(j) {
                Some(Tok::Punct("[")) => {
                    let close = clex::matching_close(toks, j)?;
                    let inner = &toks[j + 1..close];
                    self.expr(k, inner);
                    subscripts.push(Subscript {
                        text: inner.iter().map(Tok::text).collect(),
                        idents: inner.iter().filter_map(Tok::ident).map(str::to_string).collect(),
                    });
                    j = close + 1;
                }
                Some(Tok::Punct("." | "->")) if toks.get(j + 1).is_some_and(|t| t.ident().is_some()) => {
                    if subscripts.is_empty() {
                        name.push('.');
                        name.push_str(toks[j + 1].text());
                        member_path = true;
                    }
                    j += 2;
                }
                _ => break,
            }
        }
        Some((
            Access {
                stmt: k,
                name,
                subscripts,
                member_path,
                mode: Mode::Read,
            },
            j,
        ))
    }

    fn expr(&mut self, k: usize, toks: &[Tok]) {
        let mut i = 0;
        while i < toks.len() {
            let is_call = toks[i].ident().is_some() && toks.get(i + 1).is_some_and(|t| t.is_punct("("));
            let after_member = i > 0 && (toks[i - 1].is_punct(".") || toks[i - 1].is_punct("->"));
            if is_call || after_member {
                i += 1;
                continue;
            }
            match self.reference(k, toks, i) {
                Some((acc, next)) => {
                    // `x++` or `--x` inside an expression also writes x
                    let incdec = toks.get(next).is_some_and(|t| t.is_punct("++") || t.is_punct("--"))
                        || (i > 0 && (toks[i - 1].is_punct("++") || toks[i - 1].is_punct("--")));
                    let w = incdec.then(|| Access {
                        mode: Mode::Write,
                        ..acc.clone()
                    });
                    self.accesses.push(acc);
                    self.accesses.extend(w);
                    i = next;
                }
                None => i += 1,
            }
        }
    }

    fn touches(&self, name: &str) -> impl Iterator<Item = &Access> + '_ {
        let name = name.to_string();
        self.accesses.iter().filter(move |a| a.name == name)
    }

    fn written(&self, name: &str) -> bool {
        self.touches(name).any(|a| a.mode == Mode::Write)
    }

    fn reductions(&self) -> BTreeMap<String, Vec<String>> {
        let mut candidates: Vec<(String, String, usize)> = Vec::new();
        for (k, s) in self.stmts.iter().enumerate() {
            if let Some((v, op)) = reduction_statement(s) {
                candidates.push((v, op, k));
            }
        }
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for (v, op, _) in &candidates {
            if !seen.insert(v.clone()) || v == self.iv || self.locals.contains(v) {
                continue;
            }
            let stmts: HashSet<usize> = candidates.iter().filter(|c| &c.0 == v).map(|c| c.2).collect();
            let same_op = candidates.iter().filter(|c| &c.0 == v).all(|c| &c.1 == op);
            let isolated = self.touches(v).all(|a| stmts.contains(&a.stmt));
            if same_op && isolated {
                out.entry(op.clone()).or_default().push(v.clone());
            }
        }
        out
    }

    fn first_access_modes(&self) -> Vec<(String, Mode)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for a in &self.accesses {
            if !a.is_array() && seen.insert(a.name.clone()) {
                out.push((a.name.clone(), a.mode));
            }
        }
        out
    }

    fn has_carried_dependence(&self, reduced: &HashSet<&str>, cfg: &HeuristicConfig) -> bool {
        if self.early_exit || self.written(self.iv) {
            return true;
        }
        let writes: Vec<&Access> = self
            .accesses
            .iter()
            .filter(|a| a.mode == Mode::Write && a.is_array() && !self.locals.contains(&a.name))
            .collect();
        for w in &writes {
            if !w.subscripts.iter().any(|s| s.idents.contains(self.iv)) {
                return true;
            }
            for other in &self.accesses {
                if !other.is_array()
                    || self.locals.contains(&other.name)
                    || other.subscripts.len() != w.subscripts.len()
                {
                    continue;
                }
                if other.name != w.name && !cfg.assume_may_alias {
                    continue;
                }
                let conflict = w
                    .subscripts
                    .iter()
                    .zip(&other.subscripts)
                    .any(|(a, b)| a.text != b.text && a.idents.contains(self.iv) && b.idents.contains(self.iv));
                if conflict {
                    return true;
                }
            }
        }
        // struct members of a shared object are one location for every iteration
        if self.accesses.iter().any(|a| {
            a.mode == Mode::Write && a.member_path && !self.locals.contains(a.name.split('.').next().unwrap_or(""))
        }) {
            return true;
        }
        self.first_access_modes().into_iter().any(|(name, mode)| {
            mode == Mode::Read
                && name != self.iv
                && !reduced.contains(name.as_str())
                && !self.locals.contains(&name)
                && self.written(&name)
        })
    }

    fn decide(&self, cfg: &HeuristicConfig) -> PatternDecision {
        let reductions = self.reductions();
        let reduced: HashSet<&str> = reductions.values().flatten().map(String::as_str).collect();
        if self.has_carried_dependence(&reduced, cfg) {
            return PatternDecision::non_parallel(DecisionSource::Heuristic);
        }
        let mut private = Vec::new();
        if self.touches(self.iv).next().is_some() {
            private.push(self.iv.to_string());
        }
        for (name, mode) in self.first_access_modes() {
            if mode == Mode::Write
                && name != self.iv
                && !reduced.contains(name.as_str())
                && !self.locals.contains(&name)
            {
                private.push(name);
            }
        }
        PatternDecision::parallel(private, reductions, DecisionSource::Heuristic)
    }
}

fn top_level_position(s: &[Tok], pred: impl Fn(&Tok) -> bool) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in s.iter().enumerate() {
        match t {
            Tok::Punct("(" | "[" | "{") => depth += 1,
            Tok::Punct(")" | "]" | "}") => depth -= 1,
            t if depth == 0 && pred(t) => return Some(i),
            _ => {}
        }
    }
    None
}

/// Binary operator precedence (higher binds tighter); only operators that can
/// appear at the top of a reduction right-hand side matter here.
fn precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

const REDUCTION_OPS: &[&str] = &["+", "-", "*", "&", "|", "^", "&&", "||"];

fn mentions(toks: &[Tok], v: &str) -> bool {
    toks.iter().any(|t| t.is_ident(v))
}

/// Recognizes `v = v op e`, `v = e op v` (commutative op), `v op= e`, `v++`,
/// `v--` where `v` is a plain identifier and `e` does not mention it.
fn reduction_statement(s: &[Tok]) -> Option<(String, String)> {
    match s {
        [Tok::Ident(v), Tok::Punct("++")] | [Tok::Punct("++"), Tok::Ident(v)] => {
            return Some((v.clone(), "+".into()));
        }
        [Tok::Ident(v), Tok::Punct("--")] | [Tok::Punct("--"), Tok::Ident(v)] => {
            return Some((v.clone(), "-".into()));
        }
        _ => {}
    }
    let [Tok::Ident(v), Tok::Punct(assign), rhs @ ..] = s else {
        return None;
    };
    if is_type_word(&s[0]) || KEYWORDS.contains(&v.as_str()) || rhs.is_empty() {
        return None;
    }
    if *assign != "=" {
        let op = assign.strip_suffix('=')?;
        return (REDUCTION_OPS.contains(&op) && !mentions(rhs, v)).then(|| (v.clone(), op.to_string()));
    }
    if rhs
        .iter()
        .any(|t| t.is_punct("?") || ASSIGN_OPS.iter().any(|op| t.is_punct(op)))
    {
        return None;
    }
    // binary operators at paren depth 0
    let mut ops: Vec<(usize, &str, u8)> = Vec::new();
    let mut depth = 0i32;
    for (i, t) in rhs.iter().enumerate() {
        match t {
            Tok::Punct("(" | "[") => depth += 1,
            Tok::Punct(")" | "]") => depth -= 1,
            Tok::Punct(op) if depth == 0 => {
                let binary = i > 0
                    && matches!(
                        &rhs[i - 1],
                        Tok::Ident(_) | Tok::Number(_) | Tok::Literal(_) | Tok::Punct(")" | "]")
                    );
                if let (true, Some(p)) = (binary, precedence(op)) {
                    ops.push((i, op, p));
                }
            }
            _ => {}
        }
    }
    let min = ops.iter().map(|o| o.2).min()?;
    let top: Vec<&(usize, &str, u8)> = ops.iter().filter(|o| o.2 == min).collect();
    let op = top[0].1;
    if !REDUCTION_OPS.contains(&op) || top.iter().any(|o| o.1 != op) {
        return None;
    }
    let mut operands = Vec::new();
    let mut start = 0;
    for o in &top {
        operands.push(&rhs[start..o.0]);
        start = o.0 + 1;
    }
    operands.push(&rhs[start..]);
    let is_v = |x: &[Tok]| matches!(x, [Tok::Ident(n)] if n == v);
    let hits: Vec<usize> = operands
        .iter()
        .enumerate()
        .filter(|(_, x)| is_v(x))
        .map(|(i, _)| i)
        .collect();
    if hits.len() != 1 || operands.iter().filter(|x| mentions(x, v)).count() != 1 {
        return None;
    }
    if op == "-" && hits[0] != 0 {
        return None;
    }
    Some((v.clone(), op.to_string()))
}
