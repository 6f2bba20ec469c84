use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecisionSource, OracleError, PatternDecision};

/// One JSONL line: `{"id", "parallel", "private": [..], "reduction": {"op": [..]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub id: String,
    pub parallel: bool,
    #[serde(default)]
    pub private: Vec<String>,
    #[serde(default)]
    pub reduction: BTreeMap<String, Vec<String>>,
}

impl AnnotationRecord {
    pub fn decision(&self) -> PatternDecision {
        PatternDecision {
            parallel: self.parallel,
            private_vars: self.private.clone(),
            reductions: self.reduction.clone(),
            source: DecisionSource::Annotation,
        }
        .normalized()
    }

    pub fn from_decision(id: impl Into<String>, d: &PatternDecision) -> Self {
        AnnotationRecord {
            id: id.into(),
            parallel: d.parallel,
            private: d.private_vars.clone(),
            reduction: d.reductions.clone(),
        }
    }
}

/// Read-only map from sample id to its annotated decision.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    decisions: HashMap<String, PatternDecision>,
}

impl AnnotationStore {
    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Self {
        AnnotationStore {
            decisions: records.into_iter().map(|r| (r.id.clone(), r.decision())).collect(),
        }
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, OracleError> {
        let mut records = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| OracleError::Annotation {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if !seen.insert(rec.id.clone()) {
                return Err(OracleError::Annotation {
                    line: idx + 1,
                    message: format!("duplicate id `{}`", rec.id),
                });
            }
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_jsonl(&text)
    }

    pub fn decide(&self, id: &str) -> Result<PatternDecision, OracleError> {
        self.decisions
            .get(id)
            .cloned()
            .ok_or_else(|| OracleError::UnknownSample(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}
