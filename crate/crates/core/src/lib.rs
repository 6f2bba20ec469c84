//! Pattern-guided LLM parallelization of C loops with OpenMP, and the
//! evaluation tooling around it: directive parsing, OMPScore, baseline text
//! metrics, rank correlation, classifier accuracy and speedup arithmetic.

pub mod config;
pub mod directive;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod ompscore;
pub mod oracle;
pub mod prompt;
