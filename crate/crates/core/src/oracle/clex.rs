//! Minimal C lexing and statement splitting for loop analysis.
//!
//! This is deliberately not a C parser: it produces a flat list of simple
//! statements for a loop body, with `for`/`if`/`while` headers broken out
//! into their component expressions.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    Literal(String),
    Punct(&'static str),
}

impl Tok {
    pub(crate) fn text(&self) -> &str {
        match self {
            Tok::Ident(s) | Tok::Number(s) | Tok::Literal(s) => s,
            Tok::Punct(p) => p,
        }
    }

    pub(crate) fn is_punct(&self, p: &str) -> bool {
        matches!(self, Tok::Punct(q) if *q == p)
    }

    pub(crate) fn ident(&self) -> Option<&str> {
        match self {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub(crate) fn is_ident(&self, name: &str) -> bool {
        self.ident() == Some(name)
    }
}

const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "&&", "||", "==", "!=",
    "<=", ">=", "<<", ">>", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "<", ">", "=", "?", ":", ";", ",", ".",
    "(", ")", "[", "]", "{", "}",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LexError(pub String);

/// Tokenizes C source, dropping comments and preprocessor lines.
pub(crate) fn lex(src: &str) -> Result<Vec<Tok>, LexError> {
    let src = strip_comments_and_directives(src);
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let b = bytes[p];
        if b.is_ascii_whitespace() {
            p += 1;
        } else if b.is_ascii_alphabetic() || b == b'_' {
            let start = p;
            while p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
                p += 1;
            }
            out.push(Tok::Ident(src[start..p].to_string()));
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(p + 1).is_some_and(u8::is_ascii_digit)) {
            let start = p;
            while p < bytes.len() {
                let c = bytes[p];
                let exp_sign = (c == b'+' || c == b'-') && matches!(bytes[p - 1], b'e' | b'E' | b'p' | b'P');
                if c.is_ascii_alphanumeric() || c == b'.' || c == b'_' || exp_sign {
                    p += 1;
                } else {
                    break;
                }
            }
            out.push(Tok::Number(src[start..p].to_string()));
        } else if b == b'"' || b == b'\'' {
            let start = p;
            p += 1;
            while p < bytes.len() && bytes[p] != b {
                if bytes[p] == b'\\' {
                    p += 1;
                }
                p += 1;
            }
            if p >= bytes.len() {
                return Err(LexError("unterminated literal".into()));
            }
            p += 1;
            out.push(Tok::Literal(src[start..p].to_string()));
        } else if let Some(op) = PUNCTS.iter().find(|op| src[p..].starts_with(**op)) {
            out.push(Tok::Punct(op));
            p += op.len();
        } else {
            let c = src[p..].chars().next().unwrap_or('?');
            return Err(LexError(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn strip_comments_and_directives(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    let mut in_str: Option<char> = None;
    while let Some(c) = chars.next() {
        if let Some(q) = in_str {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == q {
                in_str = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => {
                in_str = Some(c);
                out.push(c);
            }
            '/' if chars.peek() == Some(&'/') => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = ' ';
                for n in chars.by_ref() {
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
                out.push(' ');
            }
            _ => out.push(c),
        }
    }
    out.lines()
        .map(|l| if l.trim_start().starts_with('#') { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Index of the bracket closing the one at `open`.
pub(crate) fn matching_close(toks: &[Tok], open: usize) -> Option<usize> {
    let (o, c) = match toks.get(open)? {
        Tok::Punct("(") => ("(", ")"),
        Tok::Punct("[") => ("[", "]"),
        Tok::Punct("{") => ("{", "}"),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.is_punct(o) {
            depth += 1;
        } else if t.is_punct(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Splits at `sep` outside any bracket nesting.
pub(crate) fn split_depth0<'a>(toks: &'a [Tok], sep: &str) -> Vec<&'a [Tok]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t {
            Tok::Punct("(" | "[" | "{") => depth += 1,
            Tok::Punct(")" | "]" | "}") => depth -= 1,
            t if depth == 0 && t.is_punct(sep) => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&toks[start..]);
    parts
}

/// The outermost `for` loop found in a token stream.
#[derive(Debug, Clone)]
pub(crate) struct ForLoop {
    pub init: Vec<Tok>,
    pub step: Vec<Tok>,
    pub body: Vec<Tok>,
}

pub(crate) fn find_outer_for(toks: &[Tok]) -> Result<ForLoop, String> {
    let pos = toks
        .iter()
        .enumerate()
        .position(|(i, t)| t.is_ident("for") && toks.get(i + 1).is_some_and(|n| n.is_punct("(")));
    let Some(pos) = pos else {
        return Err(if toks.iter().any(|t| t.is_ident("while")) {
            "while loops are not analyzed".into()
        } else {
            "no for-loop header".into()
        });
    };
    let close = matching_close(toks, pos + 1).ok_or("unbalanced loop header")?;
    let header = split_depth0(&toks[pos + 2..close], ";");
    if header.len() != 3 {
        return Err("loop header does not have three clauses".into());
    }
    let rest = &toks[close + 1..];
    let body = match rest.first() {
        Some(Tok::Punct("{")) => {
            let end = matching_close(rest, 0).ok_or("unbalanced braces in loop body")?;
            rest[1..end].to_vec()
        }
        _ => rest.to_vec(),
    };
    Ok(ForLoop {
        init: header[0].to_vec(),
        step: header[2].to_vec(),
        body,
    })
}

/// Flattens a loop body into simple statements. Control headers contribute
/// their expressions (`for` init/cond/step, `if`/`while`/`switch` conditions).
pub(crate) fn split_statements(body: &[Tok]) -> Result<Vec<Vec<Tok>>, String> {
    let mut stmts = Vec::new();
    let mut cur: Vec<Tok> = Vec::new();
    let mut depth = 0i32;
    let mut i = 0;
    let flush = |cur: &mut Vec<Tok>, stmts: &mut Vec<Vec<Tok>>| {
        if !cur.is_empty() {
            stmts.push(std::mem::take(cur));
        }
    };
    while i < body.len() {
        let t = &body[i];
        let at_stmt_start = cur.is_empty() && depth == 0;
        if at_stmt_start {
            if let Some(kw) = t.ident() {
                let has_paren = body.get(i + 1).is_some_and(|n| n.is_punct("("));
                match kw {
                    "for" | "if" | "while" | "switch" if has_paren => {
                        let close = matching_close(body, i + 1).ok_or("unbalanced control header")?;
                        let inner = &body[i + 2..close];
                        if kw == "for" {
                            for part in split_depth0(inner, ";") {
                                if !part.is_empty() {
                                    stmts.push(part.to_vec());
                                }
                            }
                        } else if !inner.is_empty() {
                            stmts.push(inner.to_vec());
                        }
                        i = close + 1;
                        continue;
                    }
                    "else" | "do" => {
                        i += 1;
                        continue;
                    }
                    "case" | "default" => {
                        // skip the label up to its colon
                        while i < body.len() && !body[i].is_punct(":") {
                            i += 1;
                        }
                        i += 1;
                        continue;
                    }
                    _ => {}
                }
            }
        }
        match t {
            Tok::Punct("{" | "}") if depth == 0 => {
                flush(&mut cur, &mut stmts);
            }
            Tok::Punct(";") if depth == 0 => {
                flush(&mut cur, &mut stmts);
            }
            _ => {
                match t {
                    Tok::Punct("(" | "[" | "{") => depth += 1,
                    Tok::Punct(")" | "]" | "}") => depth -= 1,
                    _ => {}
                }
                if depth < 0 {
                    return Err("unbalanced brackets in loop body".into());
                }
                cur.push(t.clone());
            }
        }
        i += 1;
    }
    if depth != 0 {
        return Err("unbalanced brackets in loop body".into());
    }
    flush(&mut cur, &mut stmts);
    Ok(stmts)
}
