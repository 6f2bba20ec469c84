use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use ompgen::directive::{extract_directives, DirectiveParser};
use ompgen::harness::{
    build_replay_entries, classifier_report, load_corpus, parse_corpus_jsonl, parse_responses_jsonl, run_pipeline,
    score_run, Corpus, Mode, PipelineConfig, SchemaError, Task,
};
use ompgen::llm::{prompt_hash, write_replay_entries, Backend, GenerationConfig, LlmClient, ReplayEntry};
use ompgen::oracle::{AnnotationStore, HeuristicConfig, PatternOracle};
use ompgen::prompt::{ModelFamily, PromptBuilder};

const MODEL: &str = "gpt-4";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn corpus() -> Corpus {
    load_corpus(&fixtures().join("corpus.jsonl")).unwrap()
}

fn annotation_oracle() -> PatternOracle {
    PatternOracle::Annotation(AnnotationStore::load(&fixtures().join("annotations.jsonl")).unwrap())
}

fn client(dir: &Path) -> LlmClient {
    LlmClient::new(GenerationConfig {
        backend: Backend::Replay,
        replay_dir: dir.to_path_buf(),
        model: MODEL.into(),
        ..GenerationConfig::default()
    })
    .unwrap()
}

fn run(mode: Mode, oracle: &PatternOracle, dir: &Path) -> (ompgen::harness::PipelineRun, usize) {
    let c = client(dir);
    let cfg = PipelineConfig {
        mode,
        family: ModelFamily::Generic,
        max_in_flight: 2,
    };
    let r = run_pipeline(&corpus(), oracle, &PromptBuilder::default(), &c, &cfg);
    (r, c.call_count())
}

#[test]
fn fixture_corpus_shape() {
    let c = corpus();
    assert_eq!(c.len(), 6);
    let labels: std::collections::BTreeSet<_> = c
        .samples
        .iter()
        .filter(|s| s.gold.parallel)
        .map(|s| s.gold.label())
        .collect();
    assert_eq!(labels.len(), 3);
    assert!(c.samples.iter().all(|s| s.human_score.is_some()));
}

#[test]
fn committed_replay_store_matches_regenerated_entries() {
    let c = corpus();
    let responses =
        parse_responses_jsonl(&std::fs::read_to_string(fixtures().join("responses.jsonl")).unwrap()).unwrap();
    let entries = build_replay_entries(
        &c,
        &annotation_oracle(),
        &PromptBuilder::default(),
        ModelFamily::Generic,
        MODEL,
        &responses,
    )
    .unwrap();
    let dir = fixtures().join("replay");
    let committed = std::fs::read_dir(&dir).unwrap().count();
    assert_eq!(committed, entries.len());
    for e in &entries {
        let path = dir.join(format!("{}.json", prompt_hash(&e.model, &e.prompt)));
        let stored: ReplayEntry = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(&stored, e, "{}", path.display());
    }
    let tmp = tempfile::tempdir().unwrap();
    write_replay_entries(&entries, tmp.path()).unwrap();
    for e in &entries {
        let name = format!("{}.json", prompt_hash(&e.model, &e.prompt));
        assert_eq!(
            std::fs::read(tmp.path().join(&name)).unwrap(),
            std::fs::read(dir.join(&name)).unwrap()
        );
    }
}

#[test]
fn guided_reduction_loop_extracts_corrected_directive() {
    // The committed fixture keeps the stray comma of the recorded output.
    let (r, _) = run(Mode::Guided, &annotation_oracle(), &fixtures().join("replay"));
    let out = r.outcome("npb_is_r23").unwrap().output_code.clone().unwrap();
    let d = extract_directives(&out).remove(0).parsed.unwrap();
    assert_eq!(d.render(), "#pragma omp parallel for reduction(*:,R23,T23)");

    // A store holding the corrected output yields the clean clause.
    let c = corpus();
    let sample = c.get("npb_is_r23").unwrap();
    let prompt = PromptBuilder::default()
        .render_guided(&sample.sequential_code, &sample.gold, ModelFamily::Generic)
        .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let entry = ReplayEntry {
        model: MODEL.into(),
        prompt: prompt.rendered,
        response: format!(
            "```c\n#pragma omp parallel for reduction(*: R23, T23)\n{}```\n",
            sample.sequential_code
        ),
        recorded_at: "fixture".into(),
    };
    write_replay_entries(&[entry], tmp.path()).unwrap();
    let (r, calls) = run(Mode::Guided, &annotation_oracle(), tmp.path());
    assert_eq!(calls, 4);
    let out = r.outcome("npb_is_r23").unwrap().output_code.clone().unwrap();
    let d = extract_directives(&out).remove(0).parsed.unwrap();
    assert_eq!(d.render(), "#pragma omp parallel for reduction(*:R23,T23)");
    assert!(out.ends_with(&sample.sequential_code));
}

#[test]
fn basic_mode_always_asks_the_model() {
    let (r, calls) = run(Mode::Basic, &annotation_oracle(), &fixtures().join("replay"));
    assert_eq!(calls, 6);
    assert!(r.outcome("npb_mg_interp").unwrap().llm_called);
    assert_eq!(r.failures().count(), 0);
}

#[test]
fn guided_never_emits_directive_for_gold_non_parallel() {
    let c = corpus();
    let (r, _) = run(Mode::Guided, &annotation_oracle(), &fixtures().join("replay"));
    for s in c.samples.iter().filter(|s| !s.gold.parallel) {
        let out = r.outcome(&s.id).unwrap().output_code.as_deref().unwrap();
        assert!(extract_directives(out).is_empty(), "{}", s.id);
    }
}

#[test]
fn guided_refusal_scores_100_and_failures_score_0() {
    let c = corpus();
    let parser = DirectiveParser::default();
    let (guided, _) = run(Mode::Guided, &annotation_oracle(), &fixtures().join("replay"));
    let report = score_run(&guided, &c, &parser).unwrap();
    assert_eq!(report.rows.len(), c.len());
    let mg = report.rows.iter().find(|r| r.id == "npb_mg_interp").unwrap();
    assert_eq!(mg.values.ompscore, 100.0);

    // An empty replay store fails every parallel sample without aborting the batch.
    let empty = tempfile::tempdir().unwrap();
    let (failed, _) = run(Mode::Guided, &annotation_oracle(), empty.path());
    assert_eq!(failed.failures().count(), 4);
    let report = score_run(&failed, &c, &parser).unwrap();
    for row in report.rows.iter().filter(|r| r.failed) {
        assert!(row.values.as_array().iter().all(|&v| v == 0.0), "{}", row.id);
    }
    assert_eq!(report.errors.len(), 4);
    assert!(report.to_markdown().contains("## Errors"));
}

#[test]
fn perfect_replay_scores_full_marks() {
    let c = corpus();
    let tmp = tempfile::tempdir().unwrap();
    let builder = PromptBuilder::default();
    let entries: Vec<ReplayEntry> = c
        .samples
        .iter()
        .map(|s| ReplayEntry {
            model: MODEL.into(),
            prompt: builder.render_basic(&s.sequential_code, ModelFamily::Generic).rendered,
            response: s.reference_parallel_code.clone(),
            recorded_at: "fixture".into(),
        })
        .collect();
    write_replay_entries(&entries, tmp.path()).unwrap();
    let (r, _) = run(Mode::Basic, &annotation_oracle(), tmp.path());
    let report = score_run(&r, &c, &DirectiveParser::default()).unwrap();
    for row in &report.rows {
        let v = row.values;
        for (name, x) in [
            ("ompscore", v.ompscore),
            ("directive_bleu", v.directive_bleu),
            ("directive_rouge_l", v.directive_rouge_l),
            ("body_bleu", v.body_bleu),
            ("body_rouge_l", v.body_rouge_l),
        ] {
            assert!((x - 100.0).abs() < 1e-9, "{} {name} = {x}", row.id);
        }
        // Exact-match METEOR keeps a one-chunk fragmentation penalty: 100·(1 − γ/m³).
        assert!(
            v.body_meteor > 99.0 && v.body_meteor <= 100.0,
            "{} meteor {}",
            row.id,
            v.body_meteor
        );
    }
}

#[test]
fn heuristic_oracle_matches_gold_on_fixtures() {
    let c = corpus();
    let oracle = PatternOracle::Heuristic(HeuristicConfig::default());
    let decisions: BTreeMap<_, _> = c
        .samples
        .iter()
        .map(|s| (s.id.clone(), oracle.decide(&s.loop_source()).unwrap().decision))
        .collect();
    let report = classifier_report(&decisions, &c).unwrap();
    for task in Task::ALL {
        assert_eq!(report.accuracy(task).unwrap().to_string(), "100.00", "{task:?}");
    }
    for s in &c.samples {
        let d = decisions[&s.id].clone().normalized();
        assert_eq!(
            (d.parallel, &d.private_vars, &d.reductions),
            (s.gold.parallel, &s.gold.private_vars, &s.gold.reductions),
            "{}",
            s.id
        );
    }
}

#[test]
fn corpus_validation_errors() {
    assert!(parse_corpus_jsonl("").unwrap().is_empty());
    let line = std::fs::read_to_string(fixtures().join("corpus.jsonl"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let dup = format!("{line}\n{line}\n");
    assert!(matches!(parse_corpus_jsonl(&dup), Err(SchemaError::DuplicateId(_))));
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ompgen"));
    c.env_remove("OMPGEN_API_KEY");
    c
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // validation error: corpus missing
    let status = cli()
        .args(["pipeline", "--mode", "guided", "--backend", "replay", "--corpus"])
        .arg(tmp.path().join("nope.jsonl"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));

    // replay misses: reports are still written, exit code 1
    let empty = tmp.path().join("empty-store");
    std::fs::create_dir(&empty).unwrap();
    let status = cli()
        .args(["pipeline", "--mode", "guided", "--backend", "replay", "--corpus"])
        .arg(fixtures().join("corpus.jsonl"))
        .arg("--replay-dir")
        .arg(&empty)
        .arg("--out")
        .arg(tmp.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    let md = std::fs::read_to_string(tmp.path().join("missing").join("report.md")).unwrap();
    assert!(md.contains("## Errors"));

    // transport error: live backend against a closed local port
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let cfg = tmp.path().join("live.toml");
    std::fs::write(
        &cfg,
        format!("[llm]\nbackend = \"live\"\nendpoint = \"http://127.0.0.1:{port}/v1/chat/completions\"\nretries = 0\ntimeout_secs = 2\n"),
    )
    .unwrap();
    let status = cli()
        .env("OMPGEN_API_KEY", "test-key")
        .args(["--config"])
        .arg(&cfg)
        .args(["pipeline", "--mode", "guided", "--oracle", "annotation", "--corpus"])
        .arg(fixtures().join("corpus.jsonl"))
        .arg("--out")
        .arg(tmp.path().join("live"))
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
}

#[test]
fn cli_report_rescoring_reproduces_pipeline_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let ok = cli()
        .args([
            "pipeline",
            "--mode",
            "basic",
            "--backend",
            "replay",
            "--model",
            MODEL,
            "--corpus",
        ])
        .arg(fixtures().join("corpus.jsonl"))
        .arg("--replay-dir")
        .arg(fixtures().join("replay"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(ok.success());
    let before = std::fs::read_to_string(out.join("report.csv")).unwrap();
    std::fs::remove_file(out.join("report.csv")).unwrap();
    let ok = cli()
        .arg("report")
        .arg("--run")
        .arg(&out)
        .arg("--corpus")
        .arg(fixtures().join("corpus.jsonl"))
        .status()
        .unwrap();
    assert!(ok.success());
    assert_eq!(std::fs::read_to_string(out.join("report.csv")).unwrap(), before);

    let corr = cli()
        .arg("correlate")
        .arg("--report")
        .arg(out.join("report.csv"))
        .arg("--corpus")
        .arg(fixtures().join("corpus.jsonl"))
        .output()
        .unwrap();
    assert!(corr.status.success());
    assert!(String::from_utf8_lossy(&corr.stdout).contains("| OMPScore |"));
}

#[test]
fn cli_speedup_and_oracle() {
    let out = cli()
        .arg("speedup")
        .arg("--runtimes")
        .arg(fixtures().join("runtimes_nas.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("| Avg. Speedup (%) | | 2.5% | | 3.4% | | 3.2% | | 3.4% |"),
        "{text}"
    );

    let tmp = tempfile::tempdir().unwrap();
    let loop_file = tmp.path().join("dot.c");
    std::fs::write(
        &loop_file,
        "for (i = 0; i < n; i++) { t = a[i] * b[i]; sum = sum + t; }\n",
    )
    .unwrap();
    let out = cli().arg("oracle").arg("--loop").arg(&loop_file).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["label"], "reduction-and-private");
    assert_eq!(v["decision"]["reductions"]["+"][0], "sum");
}

#[test]
fn example_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../ompgen.example.toml");
    let cfg = ompgen::config::Config::load(&path).unwrap();
    assert_eq!(cfg.llm.backend, Backend::Replay);
    assert!(cfg.llm.replay_dir.ends_with("crates/core/fixtures/replay"));
    assert!(cfg.prompt_builder().is_ok());
}
