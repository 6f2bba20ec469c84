use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::pipeline::PipelineRun;
use super::SchemaError;
use crate::directive::{extract_directives_with, DirectiveParser};
use crate::metrics::{bleu, meteor, rouge_l, tokenize};
use crate::ompscore::omp_score_with;

pub const NOT_COMPUTED: &str = "not computed";

/// Metric columns in report order: (CSV header, display name).
pub const METRIC_COLUMNS: [(&str, &str); 7] = [
    ("ompscore", "OMPScore"),
    ("directive_bleu", "BLEU (directive)"),
    ("directive_rouge_l", "ROUGE-L (directive)"),
    ("directive_meteor", "METEOR (directive)"),
    ("body_bleu", "BLEU (body)"),
    ("body_rouge_l", "ROUGE-L (body)"),
    ("body_meteor", "METEOR (body)"),
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub ompscore: f64,
    pub directive_bleu: f64,
    pub directive_rouge_l: f64,
    pub directive_meteor: f64,
    pub body_bleu: f64,
    pub body_rouge_l: f64,
    pub body_meteor: f64,
}

impl MetricValues {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.ompscore,
            self.directive_bleu,
            self.directive_rouge_l,
            self.directive_meteor,
            self.body_bleu,
            self.body_rouge_l,
            self.body_meteor,
        ]
    }

    fn from_array(v: [f64; 7]) -> Self {
        MetricValues {
            ompscore: v[0],
            directive_bleu: v[1],
            directive_rouge_l: v[2],
            directive_meteor: v[3],
            body_bleu: v[4],
            body_rouge_l: v[5],
            body_meteor: v[6],
        }
    }

    fn mean<'a>(values: impl IntoIterator<Item = &'a MetricValues>) -> (usize, MetricValues) {
        let mut sum = [0.0; 7];
        let mut n = 0;
        for v in values {
            for (s, x) in sum.iter_mut().zip(v.as_array()) {
                *s += x;
            }
            n += 1;
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        (n, MetricValues::from_array(sum))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub benchmark: String,
    pub app: String,
    pub failed: bool,
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub benchmark: String,
    pub samples: usize,
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model: String,
    pub mode: String,
    /// One row per corpus sample, sorted by id.
    pub rows: Vec<MetricRow>,
    /// (id, message) for failed samples.
    pub errors: Vec<(String, String)>,
}

/// Directive-level and body-level scores of one candidate against one reference.
pub fn score_pair(candidate: &str, reference: &str, parser: &DirectiveParser) -> MetricValues {
    let first = |code: &str| {
        extract_directives_with(parser, code)
            .into_iter()
            .next()
            .map(|d| d.text.split_whitespace().collect::<Vec<_>>().join(" "))
    };
    let (dc, dr) = (first(candidate), first(reference));
    let directive = |f: &dyn Fn(&str, &str) -> f64| match (&dc, &dr) {
        (None, None) => 100.0,
        (Some(c), Some(r)) => f(c, r),
        _ => 0.0,
    };
    let b = |c: &str, r: &str| bleu(&tokenize(c), &[tokenize(r)]);
    let rl = |c: &str, r: &str| rouge_l(&tokenize(c), &tokenize(r));
    let m = |c: &str, r: &str| meteor(&tokenize(c), &tokenize(r));
    MetricValues {
        ompscore: omp_score_with(candidate, reference, parser),
        directive_bleu: directive(&b),
        directive_rouge_l: directive(&rl),
        directive_meteor: directive(&m),
        body_bleu: b(candidate, reference),
        body_rouge_l: rl(candidate, reference),
        body_meteor: m(candidate, reference),
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no pipeline outcome for sample `{0}`")]
    MissingRecord(String),
}

/// Scores every corpus sample; failed generations score 0 on all metrics.
pub fn score_run(run: &PipelineRun, corpus: &Corpus, parser: &DirectiveParser) -> Result<MetricReport, ReportError> {
    let mut rows = Vec::with_capacity(corpus.len());
    let mut errors = Vec::new();
    for sample in &corpus.samples {
        let outcome = run
            .outcome(&sample.id)
            .ok_or_else(|| ReportError::MissingRecord(sample.id.clone()))?;
        let (failed, values) = match (&outcome.failure, &outcome.output_code) {
            (None, Some(code)) => (false, score_pair(code, &sample.reference_parallel_code, parser)),
            (failure, _) => {
                let msg = failure
                    .as_ref()
                    .map_or_else(|| format!("{}: no output", sample.id), |f| f.message.clone());
                errors.push((sample.id.clone(), msg));
                (true, MetricValues::default())
            }
        };
        rows.push(MetricRow {
            id: sample.id.clone(),
            benchmark: sample.benchmark.clone(),
            app: sample.app.clone(),
            failed,
            values,
        });
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(MetricReport {
        model: run.model.clone(),
        mode: run.mode.to_string(),
        rows,
        errors,
    })
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

const CSV_HEAD: [&str; 6] = ["model", "mode", "id", "benchmark", "app", "status"];

#[derive(Debug, Deserialize)]
struct CsvRow {
    model: String,
    mode: String,
    id: String,
    benchmark: String,
    app: String,
    status: String,
    ompscore: f64,
    directive_bleu: f64,
    directive_rouge_l: f64,
    directive_meteor: f64,
    body_bleu: f64,
    body_rouge_l: f64,
    body_meteor: f64,
}

impl MetricReport {
    /// Per-benchmark means (sorted by benchmark) followed by the overall mean.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut by_bench: BTreeMap<&str, Vec<&MetricValues>> = BTreeMap::new();
        for r in &self.rows {
            by_bench.entry(&r.benchmark).or_default().push(&r.values);
        }
        let mut out: Vec<Aggregate> = by_bench
            .into_iter()
            .map(|(b, vs)| {
                let (samples, values) = MetricValues::mean(vs);
                Aggregate {
                    benchmark: b.to_string(),
                    samples,
                    values,
                }
            })
            .collect();
        let (samples, values) = MetricValues::mean(self.rows.iter().map(|r| &r.values));
        out.push(Aggregate {
            benchmark: "all".into(),
            samples,
            values,
        });
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = CSV_HEAD
            .iter()
            .copied()
            .chain(METRIC_COLUMNS.iter().map(|c| c.0))
            .chain(["codebleu", "codebertscore"])
            .collect();
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![
                self.model.clone(),
                self.mode.clone(),
                r.id.clone(),
                r.benchmark.clone(),
                r.app.clone(),
                if r.failed { "failed" } else { "ok" }.to_string(),
            ];
            rec.extend(r.values.as_array().into_iter().map(fmt2));
            rec.extend([NOT_COMPUTED.to_string(), NOT_COMPUTED.to_string()]);
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn from_csv(text: &str) -> Result<Self, SchemaError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        let (mut model, mut mode) = (String::new(), String::new());
        for (idx, rec) in rdr.deserialize::<CsvRow>().enumerate() {
            let r = rec.map_err(|e| SchemaError::Row {
                line: idx + 2,
                message: e.to_string(),
            })?;
            model = r.model;
            mode = r.mode;
            rows.push(MetricRow {
                id: r.id,
                benchmark: r.benchmark,
                app: r.app,
                failed: r.status != "ok",
                values: MetricValues {
                    ompscore: r.ompscore,
                    directive_bleu: r.directive_bleu,
                    directive_rouge_l: r.directive_rouge_l,
                    directive_meteor: r.directive_meteor,
                    body_bleu: r.body_bleu,
                    body_rouge_l: r.body_rouge_l,
                    body_meteor: r.body_meteor,
                },
            });
        }
        Ok(MetricReport {
            model,
            mode,
            rows,
            errors: Vec::new(),
        })
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Metric report: {} ({} prompts)\n", self.model, self.mode);
        let head: Vec<&str> = METRIC_COLUMNS.iter().map(|c| c.1).collect();
        let _ = writeln!(md, "## Aggregates\n");
        let _ = writeln!(
            md,
            "| Benchmark | Samples | {} | CodeBLEU | CodeBERTScore |",
            head.join(" | ")
        );
        let _ = writeln!(md, "|---|---:|{}---|---|", "---:|".repeat(head.len()));
        for a in self.aggregates() {
            let vals: Vec<String> = a.values.as_array().into_iter().map(fmt2).collect();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {NOT_COMPUTED} | {NOT_COMPUTED} |",
                a.benchmark,
                a.samples,
                vals.join(" | ")
            );
        }
        let _ = writeln!(md, "\n## Samples\n");
        let _ = writeln!(md, "| Id | Benchmark | App | Status | {} |", head.join(" | "));
        let _ = writeln!(md, "|---|---|---|---|{}", "---:|".repeat(head.len()));
        for r in &self.rows {
            let vals: Vec<String> = r.values.as_array().into_iter().map(fmt2).collect();
            let status = if r.failed { "failed" } else { "ok" };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {status} | {} |",
                r.id,
                r.benchmark,
                r.app,
                vals.join(" | ")
            );
        }
        if !self.errors.is_empty() {
            let _ = writeln!(md, "\n## Errors\n");
            for (id, msg) in &self.errors {
                let _ = writeln!(md, "- `{id}`: {}", msg.replace('\n', " "));
            }
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflexive_pair_scores_100() {
        let parser = DirectiveParser::default();
        let code = "#pragma omp parallel for private(i)\nfor (i = 0; i < n; i++) a[i] = b[i] + c[i];";
        let v = score_pair(code, code, &parser);
        let (dm, bm) = (v.directive_meteor, v.body_meteor);
        for x in [
            v.ompscore,
            v.directive_bleu,
            v.directive_rouge_l,
            v.body_bleu,
            v.body_rouge_l,
        ] {
            assert!((x - 100.0).abs() < 1e-9, "{x}");
        }
        // one chunk still carries the fragmentation penalty
        let closed = |m: f64| 100.0 * (1.0 - 0.5 / m.powi(3));
        assert!((dm - closed(tokenize(code.lines().next().unwrap()).len() as f64)).abs() < 1e-9);
        assert!((bm - closed(tokenize(code).len() as f64)).abs() < 1e-9);
    }

    #[test]
    fn refusal_scores() {
        let parser = DirectiveParser::default();
        let code = "for (i = 1; i < n; i++) a[i] = a[i-1];";
        let v = score_pair(code, code, &parser);
        assert_eq!(v.ompscore, 100.0);
        assert_eq!(v.directive_rouge_l, 100.0);
        let wrong = format!("#pragma omp parallel for\n{code}");
        let v = score_pair(&wrong, code, &parser);
        assert_eq!(v.ompscore, 0.0);
        assert_eq!(v.directive_bleu, 0.0);
        assert!(v.body_rouge_l > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let report = MetricReport {
            model: "m".into(),
            mode: "guided".into(),
            rows: vec![MetricRow {
                id: "a".into(),
                benchmark: "NPB".into(),
                app: "IS".into(),
                failed: false,
                values: MetricValues::from_array([88.89, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            }],
            errors: vec![],
        };
        let csv = report.to_csv();
        assert!(csv.contains("not computed"));
        let back = MetricReport::from_csv(&csv).unwrap();
        assert_eq!(back, report);
        let md = report.to_markdown();
        assert!(md.contains("| all | 1 | 88.89 |"));
    }
}
