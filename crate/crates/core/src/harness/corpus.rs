use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SchemaError;
use crate::directive::extract_directives;
use crate::oracle::{AnnotationRecord, AnnotationStore, DecisionSource, LoopSource, PatternDecision};

/// Gold labels as stored in corpus files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldLabels {
    pub parallel: bool,
    #[serde(default)]
    pub private: Vec<String>,
    #[serde(default)]
    pub reduction: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    id: String,
    benchmark: String,
    app: String,
    sequential_code: String,
    reference_parallel_code: String,
    gold: GoldLabels,
    #[serde(default)]
    human_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopSample {
    pub id: String,
    pub benchmark: String,
    pub app: String,
    pub sequential_code: String,
    pub reference_parallel_code: String,
    pub gold: PatternDecision,
    pub human_score: Option<u8>,
}

impl LoopSample {
    pub fn loop_source(&self) -> LoopSource {
        LoopSource::new(&self.id, &self.sequential_code)
    }
}

/// Samples sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<LoopSample>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LoopSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Annotation store built from the gold labels.
    pub fn gold_annotations(&self) -> AnnotationStore {
        AnnotationStore::from_records(
            self.samples
                .iter()
                .map(|s| AnnotationRecord::from_decision(&s.id, &s.gold)),
        )
    }
}

fn field_error(id: &str, field: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::Field {
        id: id.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

fn validate(raw: RawSample) -> Result<LoopSample, SchemaError> {
    let id = raw.id.clone();
    if id.trim().is_empty() {
        return Err(field_error(&id, "id", "empty id"));
    }
    let gold = PatternDecision {
        parallel: raw.gold.parallel,
        private_vars: raw.gold.private,
        reductions: raw.gold.reduction,
        source: DecisionSource::Annotation,
    };
    if !gold.parallel && (!gold.private_vars.is_empty() || !gold.reductions.is_empty()) {
        return Err(field_error(&id, "gold", "non-parallel sample lists clause variables"));
    }
    let gold = gold.normalized();
    let has_directive = !extract_directives(&raw.reference_parallel_code).is_empty();
    if has_directive != gold.parallel {
        let msg = if gold.parallel {
            "parallel sample has no OpenMP directive"
        } else {
            "non-parallel sample contains an OpenMP directive"
        };
        return Err(field_error(&id, "reference_parallel_code", msg));
    }
    let human_score = match raw.human_score {
        None => None,
        Some(h) if h.fract() == 0.0 && (0.0..=5.0).contains(&h) => Some(h as u8),
        Some(h) => {
            return Err(field_error(
                &id,
                "human_score",
                format!("{h} is not an integer in [0,5]"),
            ))
        }
    };
    Ok(LoopSample {
        id,
        benchmark: raw.benchmark,
        app: raw.app,
        sequential_code: raw.sequential_code,
        reference_parallel_code: raw.reference_parallel_code,
        gold,
        human_score,
    })
}

fn finish(samples: Vec<LoopSample>) -> Result<Corpus, SchemaError> {
    let mut seen = HashSet::new();
    for s in &samples {
        if !seen.insert(s.id.as_str()) {
            return Err(SchemaError::DuplicateId(s.id.clone()));
        }
    }
    let mut samples = samples;
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    if samples.is_empty() {
        log::warn!("corpus is empty");
    }
    Ok(Corpus { samples })
}

pub fn parse_corpus_jsonl(text: &str) -> Result<Corpus, SchemaError> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSample = serde_json::from_str(line).map_err(|e| SchemaError::Json {
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(validate(raw)?);
    }
    finish(samples)
}

/// Metadata file of a sample folder; code lives in `sequential.c` and
/// `reference.c` next to it, and the folder name is the id.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FolderMeta {
    benchmark: String,
    app: String,
    gold: GoldLabels,
    #[serde(default)]
    human_score: Option<f64>,
}

/// Loads a JSONL corpus file or a directory of sample folders.
pub fn load_corpus(path: &Path) -> Result<Corpus, SchemaError> {
    let io = |p: &Path, e: std::io::Error| SchemaError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    if !path.is_dir() {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        return parse_corpus_jsonl(&text);
    }
    let mut dirs: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| io(path, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut samples = Vec::new();
    for dir in dirs {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let read = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| io(&dir.join(name), e));
        let meta: FolderMeta =
            serde_json::from_str(&read("meta.json")?).map_err(|e| field_error(&id, "meta.json", e.to_string()))?;
        samples.push(validate(RawSample {
            id,
            benchmark: meta.benchmark,
            app: meta.app,
            sequential_code: read("sequential.c")?,
            reference_parallel_code: read("reference.c")?,
            gold: meta.gold,
            human_score: meta.human_score,
        })?);
    }
    finish(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, parallel: bool, reference: &str, human: &str) -> String {
        format!(
            r#"{{"id":"{id}","benchmark":"B","app":"A","sequential_code":"for(i=0;i<n;i++) a[i]=0;","reference_parallel_code":"{reference}","gold":{{"parallel":{parallel}}}{human}}}"#
        )
    }

    #[test]
    fn parses_and_sorts() {
        let text = [
            line("b", true, "#pragma omp parallel for\\nfor(;;);", ""),
            String::new(),
            line("a", false, "for(;;);", r#","human_score":3"#),
        ]
        .join("\n");
        let c = parse_corpus_jsonl(&text).unwrap();
        assert_eq!(c.samples.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(c.get("a").unwrap().human_score, Some(3));
        assert!(parse_corpus_jsonl("").unwrap().is_empty());
    }

    #[test]
    fn rejects_invalid_samples() {
        let dup = [line("a", false, "x", ""), line("a", false, "y", "")].join("\n");
        assert!(matches!(parse_corpus_jsonl(&dup), Err(SchemaError::DuplicateId(id)) if id == "a"));
        let missing = line("a", true, "no pragma", "");
        assert!(
            matches!(parse_corpus_jsonl(&missing), Err(SchemaError::Field { field, .. }) if field == "reference_parallel_code")
        );
        let spurious = line("a", false, "#pragma omp parallel for", "");
        assert!(parse_corpus_jsonl(&spurious).is_err());
        let human = line("a", false, "x", r#","human_score":2.5"#);
        assert!(matches!(parse_corpus_jsonl(&human), Err(SchemaError::Field { field, .. }) if field == "human_score"));
        let human = line("a", false, "x", r#","human_score":6"#);
        assert!(parse_corpus_jsonl(&human).is_err());
        assert!(matches!(
            parse_corpus_jsonl("{not json"),
            Err(SchemaError::Json { line: 1, .. })
        ));
    }

    #[test]
    fn loads_folder_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s1");
        std::fs::create_dir(&s).unwrap();
        std::fs::write(
            s.join("meta.json"),
            r#"{"benchmark":"NPB","app":"IS","gold":{"parallel":true,"reduction":{"*":["R23"]}}}"#,
        )
        .unwrap();
        std::fs::write(s.join("sequential.c"), "for(i=0;i<9;i++) R23 = 0.5*R23;").unwrap();
        std::fs::write(
            s.join("reference.c"),
            "#pragma omp parallel for reduction(*:R23)\nfor(i=0;i<9;i++) R23 = 0.5*R23;",
        )
        .unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.samples[0].id, "s1");
        assert_eq!(c.samples[0].gold.reductions["*"], vec!["R23".to_string()]);
    }
}
