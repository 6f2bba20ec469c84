//! OpenMP pragma lexing, parsing and canonical rendering.
//!
//! The parser covers the part of the OpenMP grammar that shows up in loop
//! parallelization output: a directive kind (`parallel for`, `for simd`, ...)
//! followed by clauses that are either bare words (`nowait`) or
//! `keyword(args)` groups. Clause arguments are split at top-level commas and
//! an optional `modifier:` prefix is separated out, which is enough to
//! normalize `private(k,j,i)` or keep `reduction(+:z)` intact.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ompscore::{Sensitivity, SensitivityRegistry};

/// Clause keywords recognized out of the box.
pub const DEFAULT_CLAUSE_KEYWORDS: &[&str] = &[
    "private",
    "firstprivate",
    "lastprivate",
    "shared",
    "reduction",
    "schedule",
    "collapse",
    "num_threads",
    "default",
    "if",
    "copyin",
    "copyprivate",
    "ordered",
    "nowait",
];

/// Words that may form a directive kind (`parallel for simd`, `target teams`).
const DIRECTIVE_WORDS: &[&str] = &[
    "parallel",
    "for",
    "do",
    "simd",
    "sections",
    "section",
    "single",
    "master",
    "masked",
    "task",
    "taskloop",
    "taskwait",
    "taskyield",
    "taskgroup",
    "barrier",
    "critical",
    "atomic",
    "flush",
    "target",
    "teams",
    "distribute",
    "loop",
    "declare",
    "end",
    "data",
    "enter",
    "exit",
    "update",
    "threadprivate",
    "workshare",
    "scan",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectiveError {
    #[error("malformed directive: {reason}: `{text}`")]
    MalformedDirective { text: String, reason: String },
}

impl DirectiveError {
    fn malformed(text: &str, reason: impl Into<String>) -> Self {
        DirectiveError::MalformedDirective {
            text: text.trim().to_string(),
            reason: reason.into(),
        }
    }
}

/// One clause of a directive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    /// Lowercased clause keyword.
    pub keyword: String,
    /// Text between the parentheses, verbatim. Empty when there are none.
    pub args_raw: String,
    /// Whether the clause had a parenthesized argument group at all.
    pub parenthesized: bool,
    /// Argument items split at top-level commas (after the modifier), trimmed.
    pub items: Vec<String>,
    /// Segment before the first top-level colon, e.g. the reduction operator.
    pub modifier: Option<String>,
    pub sensitivity: Sensitivity,
    /// Byte range of the clause in the directive's `raw` text.
    pub span: Range<usize>,
}

impl Clause {
    /// Canonical text: `keyword(modifier:item,item)`.
    pub fn render(&self) -> String {
        let mut out = self.keyword.clone();
        if self.parenthesized {
            out.push('(');
            out.push_str(&self.render_args());
            out.push(')');
        }
        out
    }

    fn render_args(&self) -> String {
        let mut out = String::new();
        if let Some(m) = &self.modifier {
            out.push_str(m);
            out.push(':');
        }
        out.push_str(&self.items.join(","));
        out
    }

    pub fn structurally_eq(&self, other: &Clause) -> bool {
        self.keyword == other.keyword
            && self.parenthesized == other.parenthesized
            && self.items == other.items
            && self.modifier == other.modifier
            && self.sensitivity == other.sensitivity
    }
}

/// A parsed `#pragma omp` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    /// Directive-kind words joined by single spaces, e.g. `parallel for`.
    pub kind: String,
    pub clauses: Vec<Clause>,
    /// The pragma text as given, starting at `#` and trimmed.
    pub raw: String,
}

impl Directive {
    /// Compares kind and clause structure, ignoring source whitespace and spans.
    pub fn structurally_eq(&self, other: &Directive) -> bool {
        self.kind == other.kind
            && self.clauses.len() == other.clauses.len()
            && self
                .clauses
                .iter()
                .zip(&other.clauses)
                .all(|(a, b)| a.structurally_eq(b))
    }

    pub fn render(&self) -> String {
        let mut out = String::from("#pragma omp");
        if !self.kind.is_empty() {
            out.push(' ');
            out.push_str(&self.kind);
        }
        for clause in &self.clauses {
            out.push(' ');
            out.push_str(&clause.render());
        }
        out
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parser configuration: known clause keywords and the sensitivity registry
/// used to classify parsed clauses.
#[derive(Debug, Clone)]
pub struct DirectiveParser {
    keywords: BTreeSet<String>,
    registry: SensitivityRegistry,
}

impl Default for DirectiveParser {
    fn default() -> Self {
        DirectiveParser {
            keywords: DEFAULT_CLAUSE_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            registry: SensitivityRegistry::default(),
        }
    }
}

fn default_parser() -> &'static DirectiveParser {
    static PARSER: OnceLock<DirectiveParser> = OnceLock::new();
    PARSER.get_or_init(DirectiveParser::default)
}

/// Parses with the default keyword table and registry.
pub fn parse_directive(text: &str) -> Result<Directive, DirectiveError> {
    default_parser().parse(text)
}

/// Canonical single-space rendering.
pub fn render_directive(d: &Directive) -> String {
    d.render()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Group(String),
}

impl DirectiveParser {
    pub fn new(keywords: impl IntoIterator<Item = String>, registry: SensitivityRegistry) -> Self {
        DirectiveParser {
            keywords: keywords.into_iter().map(|k| k.to_ascii_lowercase()).collect(),
            registry,
        }
    }

    pub fn with_registry(mut self, registry: SensitivityRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn registry(&self) -> &SensitivityRegistry {
        &self.registry
    }

    pub fn is_known_clause(&self, keyword: &str) -> bool {
        self.keywords.contains(&keyword.to_ascii_lowercase())
    }

    pub fn parse(&self, text: &str) -> Result<Directive, DirectiveError> {
        let start = find_pragma_omp(text).ok_or_else(|| DirectiveError::malformed(text, "missing `#pragma omp`"))?;
        let raw = text[start.pragma_start..].trim_end().to_string();
        let body_offset = start.body_start - start.pragma_start;
        let tokens = lex_clauses(&raw, body_offset)?;

        let mut kind_words: Vec<String> = Vec::new();
        let mut clauses = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let (tok, range) = &tokens[i];
            let Tok::Word(word) = tok else {
                return Err(DirectiveError::malformed(
                    &raw,
                    "argument group without a clause keyword",
                ));
            };
            let lower = word.to_ascii_lowercase();
            let next_is_group = matches!(tokens.get(i + 1), Some((Tok::Group(_), _)));
            let in_kind = clauses.is_empty()
                && !next_is_group
                && (kind_words.is_empty()
                    || (DIRECTIVE_WORDS.contains(&lower.as_str()) && !self.is_known_clause(&lower)));
            if in_kind {
                kind_words.push(lower);
                i += 1;
                continue;
            }
            if next_is_group {
                let (Tok::Group(args), group_range) = &tokens[i + 1] else {
                    unreachable!()
                };
                clauses.push(self.make_clause(lower, Some(args), range.start..group_range.end));
                i += 2;
            } else {
                clauses.push(self.make_clause(lower, None, range.clone()));
                i += 1;
            }
        }

        Ok(Directive {
            kind: kind_words.join(" "),
            clauses,
            raw,
        })
    }

    fn make_clause(&self, keyword: String, args: Option<&String>, span: Range<usize>) -> Clause {
        let sensitivity = self.registry.sensitivity(&keyword);
        match args {
            None => Clause {
                keyword,
                args_raw: String::new(),
                parenthesized: false,
                items: Vec::new(),
                modifier: None,
                sensitivity,
                span,
            },
            Some(args) => {
                let (modifier, items) = split_args(args);
                Clause {
                    keyword,
                    args_raw: args.clone(),
                    parenthesized: true,
                    items,
                    modifier,
                    sensitivity,
                    span,
                }
            }
        }
    }
}

struct PragmaStart {
    pragma_start: usize,
    body_start: usize,
}

/// Locates `#` `pragma` `omp` (whitespace-tolerant); returns the offset of `#`
/// and of the first byte after `omp`.
fn find_pragma_omp(text: &str) -> Option<PragmaStart> {
    let bytes = text.as_bytes();
    let mut search = 0;
    while let Some(rel) = text[search..].find('#') {
        let hash = search + rel;
        let mut p = skip_ws(bytes, hash + 1);
        if text[p..].starts_with("pragma") {
            p += "pragma".len();
            let q = skip_ws(bytes, p);
            if q > p && text[q..].starts_with("omp") {
                let end = q + 3;
                let boundary = bytes.get(end).is_none_or(|b| !is_ident_byte(*b));
                if boundary {
                    return Some(PragmaStart {
                        pragma_start: hash,
                        body_start: end,
                    });
                }
            }
        }
        search = hash + 1;
    }
    None
}

fn skip_ws(bytes: &[u8], mut p: usize) -> usize {
    while p < bytes.len() && bytes[p].is_ascii_whitespace() {
        p += 1;
    }
    p
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Splits the text after `omp` into words and balanced parenthesized groups.
fn lex_clauses(raw: &str, from: usize) -> Result<Vec<(Tok, Range<usize>)>, DirectiveError> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut p = from;
    while p < bytes.len() {
        let b = bytes[p];
        if b.is_ascii_whitespace() || b == b',' {
            p += 1;
        } else if b == b'\\' && raw[p + 1..].trim().is_empty() {
            // line continuation
            p = bytes.len();
        } else if is_ident_byte(b) {
            let start = p;
            while p < bytes.len() && is_ident_byte(bytes[p]) {
                p += 1;
            }
            out.push((Tok::Word(raw[start..p].to_string()), start..p));
        } else if b == b'(' {
            let start = p;
            let mut depth = 0usize;
            let mut close = None;
            for (off, c) in raw[p..].char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(p + off);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| DirectiveError::malformed(raw, "unbalanced parentheses"))?;
            out.push((Tok::Group(raw[start + 1..close].to_string()), start..close + 1));
            p = close + 1;
        } else if b == b')' {
            return Err(DirectiveError::malformed(raw, "unbalanced parentheses"));
        } else {
            let c = raw[p..].chars().next().unwrap_or('?');
            return Err(DirectiveError::malformed(raw, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// Splits clause arguments into an optional modifier and top-level items.
fn split_args(args: &str) -> (Option<String>, Vec<String>) {
    let (modifier, rest) = match top_level_position(args, ':') {
        Some(pos) => (Some(args[..pos].trim().to_string()), &args[pos + 1..]),
        None => (None, args),
    };
    let items = if rest.trim().is_empty() {
        Vec::new()
    } else {
        split_top_level(rest, ',')
            .into_iter()
            .map(|s| s.trim().to_string())
            .collect()
    };
    (modifier, items)
}

fn top_level_position(text: &str, needle: char) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == needle && depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Splits at `sep` occurrences outside any (), [] or {} nesting.
pub(crate) fn split_top_level(text: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&text[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// A `#pragma omp` line harvested from source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedDirective {
    /// Zero-based line index in the input text.
    pub line: usize,
    /// The pragma text (continuation lines joined).
    pub text: String,
    pub parsed: Result<Directive, DirectiveError>,
}

impl ExtractedDirective {
    pub fn directive(&self) -> Option<&Directive> {
        self.parsed.as_ref().ok()
    }
}

fn is_pragma_omp_line(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('#') && find_pragma_omp(t).is_some_and(|s| s.pragma_start == 0)
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Returns every `#pragma omp` line of `code` in order, with Markdown fence
/// lines ignored. Lines that fail to parse are kept with their error.
pub fn extract_directives(code: &str) -> Vec<ExtractedDirective> {
    extract_directives_with(default_parser(), code)
}

pub fn extract_directives_with(parser: &DirectiveParser, code: &str) -> Vec<ExtractedDirective> {
    let lines: Vec<&str> = code.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if is_fence(line) || !is_pragma_omp_line(line) {
            i += 1;
            continue;
        }
        let start = i;
        let mut text = line.trim().to_string();
        while text.ends_with('\\') && i + 1 < lines.len() {
            text.pop();
            text.truncate(text.trim_end().len());
            i += 1;
            text.push(' ');
            text.push_str(lines[i].trim());
        }
        let text = text.trim_end_matches('\\').trim().to_string();
        let parsed = parser.parse(&text);
        out.push(ExtractedDirective {
            line: start,
            text,
            parsed,
        });
        i += 1;
    }
    out
}

/// Removes Markdown code fences. When fenced blocks are present the largest
/// block's content is returned; otherwise the text is returned unchanged.
pub fn strip_code_fences(text: &str) -> String {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if is_fence(line) {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(Vec::new()),
            }
        } else if let Some(block) = current.as_mut() {
            block.push(line);
        }
    }
    // An unterminated fence still counts as a block.
    if let Some(block) = current {
        blocks.push(block);
    }
    if blocks.is_empty() {
        return text.to_string();
    }
    let mut best = 0;
    for (idx, block) in blocks.iter().enumerate() {
        let len: usize = block.iter().map(|l| l.len() + 1).sum();
        let best_len: usize = blocks[best].iter().map(|l| l.len() + 1).sum();
        if len > best_len {
            best = idx;
        }
    }
    let mut out = blocks[best].join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_private_clause() {
        let d = parse_directive("#pragma omp parallel for private(i)").unwrap();
        assert_eq!(d.kind, "parallel for");
        assert_eq!(d.clauses.len(), 1);
        assert_eq!(d.clauses[0].keyword, "private");
        assert_eq!(d.clauses[0].items, vec!["i"]);
        assert_eq!(d.clauses[0].modifier, None);
        assert_eq!(d.clauses[0].sensitivity, Sensitivity::OrderInsensitive);
    }

    #[test]
    fn keeps_stray_reduction_comma() {
        let d = parse_directive("#pragma omp parallel for reduction(*:, R23, T23)").unwrap();
        let c = &d.clauses[0];
        assert_eq!(c.keyword, "reduction");
        assert_eq!(c.modifier.as_deref(), Some("*"));
        assert_eq!(c.items, vec!["", "R23", "T23"]);
        assert_eq!(c.sensitivity, Sensitivity::OrderSensitive);
    }

    #[test]
    fn clause_free_directive() {
        let d = parse_directive("#pragma omp parallel for").unwrap();
        assert_eq!(d.kind, "parallel for");
        assert!(d.clauses.is_empty());
    }

    #[test]
    fn normalizes_whitespace_on_render() {
        let d = parse_directive("#pragma   omp parallel  for private( i )").unwrap();
        assert_eq!(d.render(), "#pragma omp parallel for private(i)");
    }

    #[test]
    fn renders_reduction() {
        let d = parse_directive("#pragma omp parallel for reduction( + : z )").unwrap();
        assert_eq!(render_directive(&d), "#pragma omp parallel for reduction(+:z)");
    }

    #[test]
    fn bare_and_unknown_clauses() {
        let d = parse_directive("#pragma omp for nowait foo(x, y) schedule(static, 4)").unwrap();
        assert_eq!(d.kind, "for");
        let kws: Vec<_> = d.clauses.iter().map(|c| c.keyword.as_str()).collect();
        assert_eq!(kws, ["nowait", "foo", "schedule"]);
        assert!(!d.clauses[0].parenthesized);
        assert_eq!(d.clauses[1].items, vec!["x", "y"]);
        assert_eq!(d.clauses[2].modifier, None);
        assert_eq!(d.clauses[2].items, vec!["static", "4"]);
    }

    #[test]
    fn nested_commas_stay_in_one_item() {
        let d = parse_directive("#pragma omp parallel for if(f(a, b)) map(tofrom: a[0:n], b)").unwrap();
        assert_eq!(d.clauses[0].items, vec!["f(a, b)"]);
        assert_eq!(d.clauses[1].modifier.as_deref(), Some("tofrom"));
        assert_eq!(d.clauses[1].items, vec!["a[0:n]", "b"]);
    }

    #[test]
    fn ordered_as_directive_and_clause() {
        assert_eq!(parse_directive("#pragma omp ordered").unwrap().kind, "ordered");
        let d = parse_directive("#pragma omp for ordered").unwrap();
        assert_eq!(d.kind, "for");
        assert_eq!(d.clauses[0].keyword, "ordered");
    }

    #[test]
    fn clause_spans_point_into_raw() {
        let d = parse_directive("  #pragma omp parallel for private(k,j,i) reduction(z:+)").unwrap();
        let spans: Vec<_> = d.clauses.iter().map(|c| &d.raw[c.span.clone()]).collect();
        assert_eq!(spans, ["private(k,j,i)", "reduction(z:+)"]);
    }

    #[test]
    fn rejects_missing_pragma() {
        assert!(matches!(
            parse_directive("#pragma acc parallel"),
            Err(DirectiveError::MalformedDirective { .. })
        ));
        assert!(parse_directive("omp parallel for").is_err());
    }

    #[test]
    fn rejects_unbalanced_parentheses() {
        assert!(parse_directive("#pragma omp parallel for private(i").is_err());
        assert!(parse_directive("#pragma omp parallel for private(i))").is_err());
    }

    #[test]
    fn uppercase_keyword_is_lowercased() {
        let d = parse_directive("#pragma omp parallel for REDUCTION(+:z)").unwrap();
        assert_eq!(d.clauses[0].keyword, "reduction");
    }

    #[test]
    fn extracts_from_code() {
        let code = "#pragma omp parallel for reduction(*:, R23, T23)\n\
                    for (i = 1; i <= 23; i += 1){\n      R23 = 0.50 * R23;  T23 = 2.0 * T23; }\n";
        let found = extract_directives(code);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].line, 0);
        assert_eq!(
            found[0].directive().unwrap().raw,
            "#pragma omp parallel for reduction(*:, R23, T23)"
        );
    }

    #[test]
    fn extract_without_pragma_is_empty() {
        assert!(extract_directives("for (i = 0; i < n; i++) a[i] = 0;").is_empty());
    }

    #[test]
    fn extract_strips_fences() {
        let code = "```c\n#pragma omp parallel for\nfor(...){}\n```";
        let found = extract_directives(code);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].directive().unwrap().kind, "parallel for");
    }

    #[test]
    fn extract_keeps_broken_lines() {
        let found = extract_directives("#pragma omp parallel for private(i\nx = 1;\n#pragma omp barrier");
        assert_eq!(found.len(), 2);
        assert!(found[0].parsed.is_err());
        assert!(found[1].parsed.is_ok());
    }

    #[test]
    fn extract_joins_continuations() {
        let found = extract_directives("#pragma omp parallel for \\\n    private(i)\nfor(;;);");
        assert_eq!(found[0].text, "#pragma omp parallel for private(i)");
        assert_eq!(found[0].directive().unwrap().clauses.len(), 1);
    }

    #[test]
    fn fence_stripping_picks_largest_block() {
        let text = "Here:\n```\nx\n```\nand\n```c\nint a;\nint b;\n```\n";
        assert_eq!(strip_code_fences(text), "int a;\nint b;\n");
        assert_eq!(strip_code_fences("plain"), "plain");
    }
}
