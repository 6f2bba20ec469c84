//! Parallelism and pattern decisions for a loop.
//!
//! Two backends produce a [`PatternDecision`]: an annotation store loaded
//! from JSONL (authoritative labels, e.g. exported from a trained
//! classifier) and a rule-based analyzer working on C source text.

mod annotation;
mod clex;
mod heuristic;

pub use annotation::{AnnotationRecord, AnnotationStore};
pub use heuristic::{decide_heuristic, HeuristicConfig};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown sample `{0}`")]
    UnknownSample(String),
    #[error("unsupported loop: {0}")]
    UnsupportedLoop(String),
    #[error("annotation line {line}: {message}")]
    Annotation { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Annotation,
    Heuristic,
}

/// Oracle output for one loop.
///
/// A non-parallel decision never carries clause variables; constructors and
/// deserialization go through [`PatternDecision::normalized`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternDecision {
    pub parallel: bool,
    /// Private variables in source order, without duplicates.
    pub private_vars: Vec<String>,
    /// Reduction operator → variables in source order.
    pub reductions: BTreeMap<String, Vec<String>>,
    pub source: DecisionSource,
}

impl PatternDecision {
    pub fn non_parallel(source: DecisionSource) -> Self {
        PatternDecision {
            parallel: false,
            private_vars: Vec::new(),
            reductions: BTreeMap::new(),
            source,
        }
    }

    pub fn parallel(
        private_vars: impl IntoIterator<Item = impl Into<String>>,
        reductions: impl IntoIterator<Item = (impl Into<String>, Vec<String>)>,
        source: DecisionSource,
    ) -> Self {
        PatternDecision {
            parallel: true,
            private_vars: private_vars.into_iter().map(Into::into).collect(),
            reductions: reductions.into_iter().map(|(op, vars)| (op.into(), vars)).collect(),
            source,
        }
        .normalized()
    }

    /// Enforces the cascade: clause fields are cleared for non-parallel loops,
    /// duplicates dropped, empty operator entries removed.
    pub fn normalized(mut self) -> Self {
        if !self.parallel {
            self.private_vars.clear();
            self.reductions.clear();
            return self;
        }
        dedup_in_order(&mut self.private_vars);
        self.reductions.retain(|_, vars| {
            dedup_in_order(vars);
            !vars.is_empty()
        });
        self
    }

    pub fn has_private(&self) -> bool {
        !self.private_vars.is_empty()
    }

    pub fn has_reduction(&self) -> bool {
        !self.reductions.is_empty()
    }

    pub fn label(&self) -> PatternLabel {
        pattern_label(self)
    }
}

fn dedup_in_order(vars: &mut Vec<String>) {
    let mut seen = std::collections::HashSet::new();
    vars.retain(|v| !v.is_empty() && seen.insert(v.clone()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternLabel {
    NonParallel,
    DoAll,
    Private,
    Reduction,
    ReductionAndPrivate,
}

impl PatternLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternLabel::NonParallel => "non-parallel",
            PatternLabel::DoAll => "do-all",
            PatternLabel::Private => "private",
            PatternLabel::Reduction => "reduction",
            PatternLabel::ReductionAndPrivate => "reduction-and-private",
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn pattern_label(d: &PatternDecision) -> PatternLabel {
    match (d.parallel, d.has_private(), d.has_reduction()) {
        (false, _, _) => PatternLabel::NonParallel,
        (true, false, false) => PatternLabel::DoAll,
        (true, true, false) => PatternLabel::Private,
        (true, false, true) => PatternLabel::Reduction,
        (true, true, true) => PatternLabel::ReductionAndPrivate,
    }
}

/// C loop text handed to the heuristic analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSource {
    pub id: String,
    pub code: String,
    #[serde(default = "default_language")]
    pub language: String,
}

fn default_language() -> String {
    "c".to_string()
}

impl LoopSource {
    pub fn new(id: impl Into<String>, code: impl Into<String>) -> Self {
        LoopSource {
            id: id.into(),
            code: code.into(),
            language: default_language(),
        }
    }
}

/// Which backend answers oracle queries.
#[derive(Debug, Clone)]
pub enum PatternOracle {
    Annotation(AnnotationStore),
    Heuristic(HeuristicConfig),
}

/// A decision plus an optional warning (set when the heuristic had to fall
/// back to non-parallel).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub decision: PatternDecision,
    pub warning: Option<String>,
}

impl PatternOracle {
    pub fn decide(&self, loop_src: &LoopSource) -> Result<OracleVerdict, OracleError> {
        match self {
            PatternOracle::Annotation(store) => Ok(OracleVerdict {
                decision: store.decide(&loop_src.id)?,
                warning: None,
            }),
            PatternOracle::Heuristic(cfg) => match heuristic::decide_heuristic_with(loop_src, cfg) {
                Ok(decision) => Ok(OracleVerdict {
                    decision,
                    warning: None,
                }),
                Err(OracleError::UnsupportedLoop(why)) => Ok(OracleVerdict {
                    decision: PatternDecision::non_parallel(DecisionSource::Heuristic),
                    warning: Some(format!("{}: {why}; treated as non-parallel", loop_src.id)),
                }),
                Err(e) => Err(e),
            },
        }
    }
}

pub fn decide_from_annotation(id: &str, store: &AnnotationStore) -> Result<PatternDecision, OracleError> {
    store.decide(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn labels() {
        let s = DecisionSource::Annotation;
        let none: [(&str, Vec<String>); 0] = [];
        assert_eq!(
            PatternDecision::parallel(Vec::<String>::new(), none.clone(), s).label(),
            PatternLabel::DoAll
        );
        assert_eq!(PatternDecision::parallel(["i"], none, s).label(), PatternLabel::Private);
        let both = PatternDecision::parallel(["i"], [("*", vars(&["R23", "T23"]))], s);
        assert_eq!(both.label(), PatternLabel::ReductionAndPrivate);
        assert_eq!(PatternDecision::non_parallel(s).label(), PatternLabel::NonParallel);
        assert_eq!(PatternLabel::ReductionAndPrivate.to_string(), "reduction-and-private");
    }

    #[test]
    fn normalization_clears_non_parallel() {
        let d = PatternDecision {
            parallel: false,
            private_vars: vars(&["i"]),
            reductions: [("+".to_string(), vars(&["s"]))].into(),
            source: DecisionSource::Annotation,
        }
        .normalized();
        assert!(d.private_vars.is_empty() && d.reductions.is_empty());
    }

    #[test]
    fn normalization_dedups() {
        let d = PatternDecision::parallel(
            ["i", "j", "i"],
            [("+", vars(&["s", "s"])), ("*", vec![])],
            DecisionSource::Heuristic,
        );
        assert_eq!(d.private_vars, vars(&["i", "j"]));
        assert_eq!(d.reductions.len(), 1);
        assert_eq!(d.reductions["+"], vars(&["s"]));
    }
}
