//! OMPScore: ROUGE-L over OpenMP directives after order-insensitive clause
//! argument lists have been normalized.
//!
//! Scoring runs in four steps on both the candidate and the reference
//! directive:
//!
//! 1. mask: locate clause spans (`private(k,j,i)`, `nowait`, ...)
//! 2. categorize: the clause type is the span's first word
//! 3. update: sort the argument items of order-insensitive clause types
//!    (byte-wise ascending); order-sensitive clauses such as `reduction` keep
//!    their argument order
//! 4. score: ROUGE-L F1 between the tokenized, updated directives

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::directive::{extract_directives_with, Directive, DirectiveError, DirectiveParser};
use crate::metrics::{rouge_l, tokenize, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensitivity {
    OrderSensitive,
    OrderInsensitive,
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sensitivity::OrderSensitive => "order_sensitive",
            Sensitivity::OrderInsensitive => "order_insensitive",
        })
    }
}

impl FromStr for Sensitivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "order_sensitive" | "sensitive" => Ok(Sensitivity::OrderSensitive),
            "order_insensitive" | "insensitive" => Ok(Sensitivity::OrderInsensitive),
            other => Err(format!("unknown sensitivity `{other}`")),
        }
    }
}

const ORDER_INSENSITIVE: &[&str] = &[
    "private",
    "firstprivate",
    "lastprivate",
    "shared",
    "copyin",
    "copyprivate",
];
const ORDER_SENSITIVE: &[&str] = &[
    "reduction",
    "schedule",
    "collapse",
    "num_threads",
    "default",
    "if",
    "ordered",
    "map",
    "linear",
];

/// Clause keyword → sensitivity. Keywords without an entry are order-sensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityRegistry {
    entries: BTreeMap<String, Sensitivity>,
}

impl Default for SensitivityRegistry {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        for k in ORDER_INSENSITIVE {
            entries.insert(k.to_string(), Sensitivity::OrderInsensitive);
        }
        for k in ORDER_SENSITIVE {
            entries.insert(k.to_string(), Sensitivity::OrderSensitive);
        }
        SensitivityRegistry { entries }
    }
}

impl SensitivityRegistry {
    pub fn empty() -> Self {
        SensitivityRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, keyword: &str, sensitivity: Sensitivity) {
        self.entries.insert(keyword.to_ascii_lowercase(), sensitivity);
    }

    /// Applies overrides on top of the current entries.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = (&'a String, &'a Sensitivity)>) -> Self {
        for (k, s) in overrides {
            self.set(k, *s);
        }
        self
    }

    pub fn sensitivity(&self, keyword: &str) -> Sensitivity {
        self.entries
            .get(&keyword.to_ascii_lowercase())
            .copied()
            .unwrap_or(Sensitivity::OrderSensitive)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Sensitivity)> {
        self.entries.iter().map(|(k, s)| (k.as_str(), *s))
    }
}

/// A masked clause: its byte range in the directive text and the text itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Step 1: clause spans of a directive, non-overlapping and in source order.
/// Offsets are relative to the `#` of `#pragma`.
pub fn mask_clauses(directive_text: &str) -> Result<Vec<ClauseSpan>, DirectiveError> {
    let d = DirectiveParser::default().parse(directive_text)?;
    Ok(spans_of(&d))
}

fn spans_of(d: &Directive) -> Vec<ClauseSpan> {
    d.clauses
        .iter()
        .map(|c| ClauseSpan {
            start: c.span.start,
            end: c.span.end,
            text: d.raw[c.span.clone()].to_string(),
        })
        .collect()
}

/// Step 2: clause type = first word of the span, lowercased.
pub fn categorize(span: &str) -> String {
    span.trim_start()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Step 3: normalized clause text. Order-insensitive clauses get their items
/// sorted byte-wise; everything else is only whitespace-canonicalized. A
/// modifier always stays in front of the colon.
pub fn update_clause(span: &str, registry: &SensitivityRegistry) -> String {
    let parser = DirectiveParser::default().with_registry(registry.clone());
    let probe = format!("#pragma omp {}", span.trim());
    match parser.parse(&probe) {
        Ok(d) if d.kind.is_empty() && d.clauses.len() == 1 => {
            let mut clause = d.clauses.into_iter().next().expect("one clause");
            if clause.sensitivity == Sensitivity::OrderInsensitive {
                clause.items.sort();
            }
            clause.render()
        }
        // Not a single well-formed clause: leave the text alone apart from whitespace.
        _ => canonical_whitespace(span),
    }
}

fn canonical_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Directive text with every clause span replaced by its updated form; text
/// outside the spans is untouched.
pub fn normalize_directive(d: &Directive, registry: &SensitivityRegistry) -> String {
    let mut out = String::with_capacity(d.raw.len());
    let mut cursor = 0;
    for span in spans_of(d) {
        out.push_str(&d.raw[cursor..span.start]);
        out.push_str(&update_clause(&span.text, registry));
        cursor = span.end;
    }
    out.push_str(&d.raw[cursor..]);
    out
}

/// Normalized text of the first `#pragma omp` line in `code`, if any.
/// Unparseable directives come back whitespace-canonicalized.
pub fn first_directive_normalized(code: &str, parser: &DirectiveParser) -> Option<String> {
    let first = extract_directives_with(parser, code).into_iter().next()?;
    Some(match &first.parsed {
        Ok(d) => normalize_directive(d, parser.registry()),
        Err(_) => canonical_whitespace(&first.text),
    })
}

/// OMPScore between the first directive of `candidate` and of `reference`.
///
/// When neither side has a directive (a non-parallel loop correctly left
/// alone) the score is 100; when exactly one side has one it is 0.
pub fn omp_score(candidate: &str, reference: &str, registry: &SensitivityRegistry) -> f64 {
    let parser = DirectiveParser::default().with_registry(registry.clone());
    omp_score_with(candidate, reference, &parser)
}

pub fn omp_score_with(candidate: &str, reference: &str, parser: &DirectiveParser) -> f64 {
    match (
        first_directive_normalized(candidate, parser),
        first_directive_normalized(reference, parser),
    ) {
        (None, None) => 100.0,
        (Some(_), None) | (None, Some(_)) => 0.0,
        (Some(c), Some(r)) => rouge_l(&tokenize(&c), &tokenize(&r)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchScore {
    pub scores: Vec<f64>,
    pub mean: f64,
}

/// Scores each `(candidate, reference)` pair; the mean is rounded to two decimals.
pub fn omp_score_batch<C, R>(pairs: &[(C, R)], registry: &SensitivityRegistry) -> Result<BatchScore, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(MetricError::DegenerateInput("empty batch".into()));
    }
    let parser = DirectiveParser::default().with_registry(registry.clone());
    let scores: Vec<f64> = pairs
        .iter()
        .map(|(c, r)| omp_score_with(c.as_ref(), r.as_ref(), &parser))
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(BatchScore {
        scores,
        mean: (mean * 100.0).round() / 100.0,
    })
}
