//! Corpus model, pipeline orchestration, scoring and report assembly.

mod analysis;
mod corpus;
mod pipeline;
mod replay;
mod report;

pub use analysis::{
    classifier_report, classifier_report_from_counts, correlate, correlate_metric, parse_runtime_csv, speedup_report,
    AnalysisError, ClassifierReport, CorrelationRow, CorrelationTable, ModelSpeedup, RuntimeRow, SpeedupReport, Task,
    TaskAccuracy,
};
pub use corpus::{load_corpus, parse_corpus_jsonl, Corpus, GoldLabels, LoopSample};
pub use pipeline::{run_pipeline, FailureKind, Mode, PipelineConfig, PipelineRun, SampleFailure, SampleOutcome};
pub use replay::{build_replay_entries, parse_responses_jsonl, ResponseFixture};
pub use report::{
    score_pair, score_run, Aggregate, MetricReport, MetricRow, MetricValues, ReportError, METRIC_COLUMNS, NOT_COMPUTED,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("sample `{id}`, field `{field}`: {message}")]
    Field { id: String, field: String, message: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("row {line}: {message}")]
    Row { line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}
