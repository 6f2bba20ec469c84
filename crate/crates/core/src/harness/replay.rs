use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::pipeline::Mode;
use super::SchemaError;
use crate::llm::ReplayEntry;
use crate::oracle::PatternOracle;
use crate::prompt::{ModelFamily, PromptBuilder};

/// A hand-written model response for one sample and prompt mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseFixture {
    pub id: String,
    pub mode: Mode,
    pub response: String,
}

pub fn parse_responses_jsonl(text: &str) -> Result<Vec<ResponseFixture>, SchemaError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SchemaError::Json {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Renders the prompt each fixture answers and pairs it with the response,
/// producing entries ready for the replay directory.
pub fn build_replay_entries(
    corpus: &Corpus,
    oracle: &PatternOracle,
    builder: &PromptBuilder,
    family: ModelFamily,
    model: &str,
    fixtures: &[ResponseFixture],
) -> Result<Vec<ReplayEntry>, SchemaError> {
    fixtures
        .iter()
        .map(|f| {
            let err = |field: &str, message: String| SchemaError::Field {
                id: f.id.clone(),
                field: field.to_string(),
                message,
            };
            let sample = corpus.get(&f.id).ok_or_else(|| err("id", "not in corpus".into()))?;
            let prompt = match f.mode {
                Mode::Basic => builder.render_basic(&sample.sequential_code, family),
                Mode::Guided => {
                    let verdict = oracle
                        .decide(&sample.loop_source())
                        .map_err(|e| err("id", e.to_string()))?;
                    builder
                        .render_guided(&sample.sequential_code, &verdict.decision, family)
                        .map_err(|e| err("mode", e.to_string()))?
                }
            };
            Ok(ReplayEntry {
                model: model.to_string(),
                prompt: prompt.rendered,
                response: f.response.clone(),
                recorded_at: "fixture".into(),
            })
        })
        .collect()
}
