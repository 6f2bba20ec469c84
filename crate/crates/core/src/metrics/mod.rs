//! Text similarity metrics, rank correlation and the small pieces of
//! arithmetic used in evaluation reports.
//!
//! All similarity scores are on a 0–100 scale.

mod bleu;
mod meteor;
mod rouge;
mod stats;
mod tokenize;

pub use bleu::{bleu, BLEU_EPSILON, BLEU_MAX_ORDER};
pub use meteor::{meteor, meteor_alignment, MeteorAlignment, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use rouge::{lcs_len, lcs_len_by, rouge_l};
pub use stats::{
    accuracy, rank_average, spearman, speedup_percent, AppSpeedup, ConfusionCounts, Percentage, RuntimePair,
    SpeedupSummary,
};
pub use tokenize::{tokenize, TokenSeq};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid runtime for `{app}`: times must be positive and finite")]
    InvalidRuntime { app: String },
}
