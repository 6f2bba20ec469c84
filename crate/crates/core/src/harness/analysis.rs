use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::report::{MetricReport, METRIC_COLUMNS};
use super::SchemaError;
use crate::metrics::{
    accuracy, spearman, speedup_percent, ConfusionCounts, MetricError, Percentage, RuntimePair, SpeedupSummary,
};
use crate::oracle::PatternDecision;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub metric: String,
    /// Spearman rho × 100; `None` when the input was degenerate.
    pub rho_x100: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub samples: usize,
    pub rows: Vec<CorrelationRow>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 2 samples with human scores, found {0}")]
    TooFewHumanScores(usize),
    #[error("metric `{metric}`: {source}")]
    Metric {
        metric: String,
        #[source]
        source: MetricError,
    },
    #[error("no decision for sample `{0}`")]
    MissingDecision(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Spearman correlation of every report metric against human scores.
/// Metrics with constant values are flagged instead of reported.
pub fn correlate(report: &MetricReport, corpus: &Corpus) -> Result<CorrelationTable, AnalysisError> {
    let mut human = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); METRIC_COLUMNS.len()];
    for row in &report.rows {
        let Some(score) = corpus.get(&row.id).and_then(|s| s.human_score) else {
            continue;
        };
        human.push(f64::from(score));
        for (col, v) in values.iter_mut().zip(row.values.as_array()) {
            col.push(v);
        }
    }
    if human.len() < 2 {
        return Err(AnalysisError::TooFewHumanScores(human.len()));
    }
    let rows = METRIC_COLUMNS
        .iter()
        .zip(&values)
        .map(|((_, name), xs)| correlate_metric(name, xs, &human))
        .collect();
    Ok(CorrelationTable {
        samples: human.len(),
        rows,
    })
}

/// One metric against human scores, with degeneracy turned into a flag.
pub fn correlate_metric(name: &str, metric: &[f64], human: &[f64]) -> CorrelationRow {
    match spearman(metric, human) {
        Ok(rho) => CorrelationRow {
            metric: name.to_string(),
            rho_x100: Some(rho * 100.0),
            note: None,
        },
        Err(e) => CorrelationRow {
            metric: name.to_string(),
            rho_x100: None,
            note: Some(format!("degenerate: {e}")),
        },
    }
}

impl CorrelationTable {
    pub fn to_markdown(&self) -> String {
        let mut md = format!(
            "# Spearman correlation with human scores ({} samples)\n\n",
            self.samples
        );
        md.push_str("| Metric | Spearman (x100) |\n|---|---:|\n");
        for r in &self.rows {
            let v = r
                .rho_x100
                .map_or_else(|| "degenerate".to_string(), |x| format!("{x:.2}"));
            let _ = writeln!(md, "| {} | {v} |", r.metric);
        }
        md.push_str("| CodeBLEU | not computed |\n| CodeBERTScore | not computed |\n");
        md
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeRow {
    pub model: String,
    pub app: String,
    pub time_basic: f64,
    pub time_guided: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpeedup {
    pub model: String,
    pub runtimes: Vec<RuntimePair>,
    pub summary: SpeedupSummary,
}

/// Models in order of first appearance in the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub models: Vec<ModelSpeedup>,
}

pub fn parse_runtime_csv(text: &str) -> Result<Vec<RuntimeRow>, SchemaError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    rdr.deserialize::<RuntimeRow>()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| SchemaError::Row {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn speedup_report(runtime_csv: &str) -> Result<SpeedupReport, AnalysisError> {
    let rows = parse_runtime_csv(runtime_csv)?;
    let mut order: Vec<String> = Vec::new();
    let mut by_model: BTreeMap<String, Vec<RuntimePair>> = BTreeMap::new();
    for r in rows {
        if !by_model.contains_key(&r.model) {
            order.push(r.model.clone());
        }
        by_model
            .entry(r.model)
            .or_default()
            .push(RuntimePair::new(r.app, r.time_basic, r.time_guided));
    }
    let mut models = Vec::new();
    for model in order {
        let runtimes = by_model.remove(&model).unwrap_or_default();
        let summary = speedup_percent(&runtimes).map_err(|source| AnalysisError::Metric {
            metric: model.clone(),
            source,
        })?;
        models.push(ModelSpeedup {
            model,
            runtimes,
            summary,
        });
    }
    Ok(SpeedupReport { models })
}

impl SpeedupReport {
    pub fn average(&self, model: &str) -> Option<f64> {
        self.models.iter().find(|m| m.model == model).map(|m| m.summary.average)
    }

    /// Apps as rows, each model contributing basic/guided runtime columns,
    /// closed by the average speedup row.
    pub fn to_markdown(&self) -> String {
        let mut apps: Vec<&str> = Vec::new();
        for m in &self.models {
            for r in &m.runtimes {
                if !apps.contains(&r.app.as_str()) {
                    apps.push(&r.app);
                }
            }
        }
        let mut md = String::from("| Application |");
        for m in &self.models {
            let _ = write!(md, " {0} basic (s) | {0} guided (s) |", m.model);
        }
        md.push_str("\n|---|");
        md.push_str(&"---:|---:|".repeat(self.models.len()));
        md.push('\n');
        for app in apps {
            let _ = write!(md, "| {app} |");
            for m in &self.models {
                match m.runtimes.iter().find(|r| r.app == app) {
                    Some(r) => {
                        let _ = write!(md, " {:.3} | {:.3} |", r.time_basic, r.time_guided);
                    }
                    None => md.push_str(" - | - |"),
                }
            }
            md.push('\n');
        }
        md.push_str("| Avg. Speedup (%) |");
        for m in &self.models {
            let _ = write!(md, " | {:.1}% |", m.summary.average);
        }
        md.push('\n');
        md
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "app", "speedup_percent"])
            .expect("in-memory csv");
        for m in &self.models {
            for a in &m.summary.per_app {
                w.write_record([m.model.as_str(), a.app.as_str(), &format!("{:.4}", a.percent)])
                    .expect("in-memory csv");
            }
            w.write_record([m.model.as_str(), "average", &format!("{:.4}", m.summary.average)])
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Parallel,
    Private,
    Reduction,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Parallel, Task::Private, Task::Reduction];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Parallel => "parallel",
            Task::Private => "private",
            Task::Reduction => "reduction",
        }
    }

    fn label(&self, d: &PatternDecision) -> bool {
        match self {
            Task::Parallel => d.parallel,
            Task::Private => d.has_private(),
            Task::Reduction => d.has_reduction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskAccuracy {
    pub task: Task,
    pub counts: ConfusionCounts,
    /// `None` for a task with no samples.
    pub accuracy: Option<Percentage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierReport {
    pub tasks: Vec<TaskAccuracy>,
}

pub fn classifier_report_from_counts(counts: &[(Task, ConfusionCounts)]) -> ClassifierReport {
    ClassifierReport {
        tasks: counts
            .iter()
            .map(|&(task, counts)| TaskAccuracy {
                task,
                counts,
                accuracy: accuracy(&counts).ok(),
            })
            .collect(),
    }
}

/// Confusion counts per task, comparing decisions against gold labels.
pub fn classifier_report(
    decisions: &BTreeMap<String, PatternDecision>,
    corpus: &Corpus,
) -> Result<ClassifierReport, AnalysisError> {
    let mut counts = [ConfusionCounts::default(); 3];
    for sample in &corpus.samples {
        let d = decisions
            .get(&sample.id)
            .ok_or_else(|| AnalysisError::MissingDecision(sample.id.clone()))?;
        for (task, c) in Task::ALL.iter().zip(counts.iter_mut()) {
            c.record(task.label(&sample.gold), task.label(d));
        }
    }
    let pairs: Vec<(Task, ConfusionCounts)> = Task::ALL.into_iter().zip(counts).collect();
    Ok(classifier_report_from_counts(&pairs))
}

impl ClassifierReport {
    pub fn accuracy(&self, task: Task) -> Option<Percentage> {
        self.tasks.iter().find(|t| t.task == task).and_then(|t| t.accuracy)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::from("| Task | TP | TN | FP | FN | Accuracy (%) |\n|---|---:|---:|---:|---:|---:|\n");
        for t in &self.tasks {
            let c = t.counts;
            let acc = t.accuracy.map_or_else(|| "n/a".to_string(), |a| a.to_string());
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {acc} |",
                t.task.name(),
                c.tp,
                c.tn,
                c.fp,
                c.fn_
            );
        }
        md
    }
}
