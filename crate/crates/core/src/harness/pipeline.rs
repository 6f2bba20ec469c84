use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, LoopSample};
use crate::llm::{GenerationRecord, LlmClient, LlmError};
use crate::oracle::{OracleVerdict, PatternOracle};
use crate::prompt::{ModelFamily, PromptBuilder, PromptKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Basic,
    Guided,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Basic => "basic",
            Mode::Guided => "guided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Oracle,
    Prompt,
    Transport,
    Api,
    ReplayMiss,
    Credentials,
    Io,
}

impl From<&LlmError> for FailureKind {
    fn from(e: &LlmError) -> Self {
        match e {
            LlmError::Transport(_) => FailureKind::Transport,
            LlmError::ApiError { .. } => FailureKind::Api,
            LlmError::ReplayMiss(_) => FailureKind::ReplayMiss,
            LlmError::MissingCredentials(_) => FailureKind::Credentials,
            LlmError::IoFailure { .. } => FailureKind::Io,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub kind: FailureKind,
    /// Message prefixed with the sample id.
    pub message: String,
}

/// Everything the pipeline produced for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub verdict: Option<OracleVerdict>,
    pub prompt_kind: Option<PromptKind>,
    pub prompt_hash: Option<String>,
    pub llm_called: bool,
    /// Final code: extracted LLM output, or the original code when guided
    /// mode skips generation for a non-parallel loop.
    pub output_code: Option<String>,
    pub failure: Option<SampleFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineRun {
    pub model: String,
    pub mode: Mode,
    /// Sorted by sample id.
    pub outcomes: Vec<SampleOutcome>,
    pub records: Vec<GenerationRecord>,
}

impl PipelineRun {
    pub fn llm_calls(&self) -> usize {
        self.outcomes.iter().filter(|o| o.llm_called).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &SampleFailure)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.failure.as_ref().map(|f| (o.id.as_str(), f)))
    }

    pub fn has_transport_failure(&self) -> bool {
        self.failures()
            .any(|(_, f)| matches!(f.kind, FailureKind::Transport | FailureKind::Api))
    }

    pub fn outcome(&self, id: &str) -> Option<&SampleOutcome> {
        self.outcomes.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub family: ModelFamily,
    pub max_in_flight: usize,
}

pub fn run_pipeline(
    corpus: &Corpus,
    oracle: &PatternOracle,
    builder: &PromptBuilder,
    client: &LlmClient,
    cfg: &PipelineConfig,
) -> PipelineRun {
    let n = corpus.samples.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Processed>>> = Mutex::new(vec![None; n]);
    let workers = cfg.max_in_flight.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(sample) = corpus.samples.get(i) else { break };
                let out = process(sample, oracle, builder, client, cfg);
                results.lock().expect("result slot lock")[i] = Some(out);
            });
        }
    });
    let mut outcomes = Vec::with_capacity(n);
    let mut records = Vec::new();
    for (outcome, record) in results.into_inner().expect("result slot lock").into_iter().flatten() {
        outcomes.push(outcome);
        records.extend(record);
    }
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));
    PipelineRun {
        model: client.config().model.clone(),
        mode: cfg.mode,
        outcomes,
        records,
    }
}

type Processed = (SampleOutcome, Option<GenerationRecord>);

fn process(
    sample: &LoopSample,
    oracle: &PatternOracle,
    builder: &PromptBuilder,
    client: &LlmClient,
    cfg: &PipelineConfig,
) -> Processed {
    let mut outcome = SampleOutcome {
        id: sample.id.clone(),
        verdict: None,
        prompt_kind: None,
        prompt_hash: None,
        llm_called: false,
        output_code: None,
        failure: None,
    };
    let fail = |kind, e: &dyn fmt::Display| SampleFailure {
        kind,
        message: format!("{}: {e}", sample.id),
    };
    match oracle.decide(&sample.loop_source()) {
        Ok(v) => {
            if let Some(w) = &v.warning {
                log::warn!("{w}");
            }
            outcome.verdict = Some(v);
        }
        Err(e) if cfg.mode == Mode::Guided => {
            outcome.failure = Some(fail(FailureKind::Oracle, &e));
            return (outcome, None);
        }
        Err(e) => log::warn!("{}: oracle unavailable in basic mode: {e}", sample.id),
    }
    let prompt = match cfg.mode {
        Mode::Basic => builder.render_basic(&sample.sequential_code, cfg.family),
        Mode::Guided => {
            let decision = &outcome.verdict.as_ref().expect("guided mode has a verdict").decision;
            if !decision.parallel {
                outcome.output_code = Some(sample.sequential_code.clone());
                return (outcome, None);
            }
            match builder.render_guided(&sample.sequential_code, decision, cfg.family) {
                Ok(p) => p,
                Err(e) => {
                    outcome.failure = Some(fail(FailureKind::Prompt, &e));
                    return (outcome, None);
                }
            }
        }
    };
    if prompt.code.trim().is_empty() {
        log::warn!("{}: empty code in prompt", sample.id);
    }
    outcome.prompt_kind = Some(prompt.kind);
    outcome.llm_called = true;
    match client.generate(&prompt) {
        Ok(record) => {
            outcome.prompt_hash = Some(record.prompt_hash.clone());
            outcome.output_code = Some(record.extracted_code.clone());
            (outcome, Some(record))
        }
        Err(e) => {
            outcome.failure = Some(fail(FailureKind::from(&e), &e));
            (outcome, None)
        }
    }
}
