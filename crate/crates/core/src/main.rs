use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ompgen::config::Config;
use ompgen::harness::{
    build_replay_entries, classifier_report, correlate, load_corpus, parse_responses_jsonl, run_pipeline, score_pair,
    score_run, speedup_report, Corpus, MetricReport, Mode, PipelineConfig, PipelineRun, SampleOutcome,
};
use ompgen::llm::{write_replay_entries, Backend, LlmClient, LlmError};
use ompgen::oracle::{AnnotationStore, LoopSource, PatternOracle};
use ompgen::prompt::ModelFamily;

/// Pattern-guided OpenMP parallelization with LLMs, and its evaluation tools.
#[derive(Debug, Parser)]
#[command(name = "ompgen", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    Annotation,
    Heuristic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Basic,
    Guided,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Generic,
    CodellamaChat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "annotation")]
    oracle: OracleKind,
    /// Annotation JSONL; defaults to the corpus gold labels.
    #[arg(long)]
    annotations: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a candidate file against a reference file.
    Score {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Run the generation pipeline over a corpus and write reports.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        replay_dir: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the pattern decision for one loop.
    Oracle {
        /// C source containing the loop.
        #[arg(long = "loop")]
        loop_file: PathBuf,
        #[arg(long, value_enum, default_value = "heuristic")]
        oracle: OracleKind,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Sample id for annotation lookups; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
    },
    /// Spearman correlation of report metrics with human scores.
    Correlate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Speedup table from a runtime CSV (model,app,time_basic,time_guided).
    Speedup {
        #[arg(long)]
        runtimes: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Re-score a pipeline output directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build a replay directory from hand-written responses.
    ReplayBuild {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Transport(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

/// Metadata of a pipeline run directory.
#[derive(Debug, Serialize, Deserialize)]
struct RunInfo {
    model: String,
    mode: Mode,
    family: ModelFamily,
    llm_calls: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Transport(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::parse("", Path::new("."))?),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn family(cfg: &Config, arg: Option<FamilyArg>) -> ModelFamily {
    match arg {
        Some(FamilyArg::Generic) => ModelFamily::Generic,
        Some(FamilyArg::CodellamaChat) => ModelFamily::CodellamaChat,
        None => cfg.prompt.family,
    }
}

fn build_oracle(cfg: &Config, args: &OracleArgs, corpus: &Corpus) -> anyhow::Result<PatternOracle> {
    Ok(match args.oracle {
        OracleKind::Heuristic => PatternOracle::Heuristic(cfg.heuristic()),
        OracleKind::Annotation => PatternOracle::Annotation(match &args.annotations {
            Some(p) => AnnotationStore::load(p)?,
            None => corpus.gold_annotations(),
        }),
    })
}

fn to_jsonl<T: Serialize>(items: &[T]) -> anyhow::Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

fn write_reports(dir: &Path, run: &PipelineRun, corpus: &Corpus, cfg: &Config) -> anyhow::Result<()> {
    let report = score_run(run, corpus, &cfg.parser()?)?;
    write(&dir.join("report.csv"), &report.to_csv())?;
    write(&dir.join("report.md"), &report.to_markdown())?;
    let decisions: BTreeMap<String, _> = run
        .outcomes
        .iter()
        .filter_map(|o| o.verdict.as_ref().map(|v| (o.id.clone(), v.decision.clone())))
        .collect();
    match classifier_report(&decisions, corpus) {
        Ok(c) => write(&dir.join("classifier.md"), &c.to_markdown())?,
        Err(e) => log::warn!("classifier report skipped: {e}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Score { candidate, reference } => {
            let v = score_pair(
                &read(&candidate)?,
                &read(&reference)?,
                &cfg.parser().map_err(anyhow::Error::from)?,
            );
            emit(&(serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)? + "\n"))?;
        }
        Command::Pipeline {
            corpus,
            mode,
            oracle,
            backend,
            replay_dir,
            model,
            family: fam,
            out,
        } => {
            let corpus = load_corpus(&corpus).map_err(anyhow::Error::from)?;
            let mut gen = cfg.llm.clone();
            if let Some(b) = backend {
                gen.backend = match b {
                    BackendArg::Live => Backend::Live,
                    BackendArg::Replay => Backend::Replay,
                };
            }
            if let Some(d) = replay_dir {
                gen.replay_dir = d;
            }
            if let Some(m) = model {
                gen.model = m;
            }
            let max_in_flight = gen.max_in_flight;
            let client = LlmClient::new(gen).map_err(|e| anyhow!(e))?;
            let oracle = build_oracle(&cfg, &oracle, &corpus)?;
            let pcfg = PipelineConfig {
                mode: match mode {
                    ModeArg::Basic => Mode::Basic,
                    ModeArg::Guided => Mode::Guided,
                },
                family: family(&cfg, fam),
                max_in_flight,
            };
            let builder = cfg.prompt_builder().map_err(anyhow::Error::from)?;
            let run = run_pipeline(&corpus, &oracle, &builder, &client, &pcfg);
            std::fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
            write(&out.join("outcomes.jsonl"), &to_jsonl(&run.outcomes)?)?;
            write(&out.join("records.jsonl"), &to_jsonl(&run.records)?)?;
            let info = RunInfo {
                model: run.model.clone(),
                mode: run.mode,
                family: pcfg.family,
                llm_calls: run.llm_calls(),
            };
            write(
                &out.join("run.json"),
                &(serde_json::to_string_pretty(&info).map_err(anyhow::Error::from)? + "\n"),
            )?;
            write_reports(&out, &run, &corpus, &cfg)?;
            let failures: Vec<_> = run.failures().map(|(_, f)| f.message.clone()).collect();
            eprintln!(
                "{} samples, {} LLM calls, {} failures; reports in {}",
                corpus.len(),
                run.llm_calls(),
                failures.len(),
                out.display()
            );
            for f in &failures {
                eprintln!("  {f}");
            }
            if run.has_transport_failure() {
                return Err(Failure::Transport(anyhow!(
                    "generation failed for {} sample(s)",
                    failures.len()
                )));
            }
            if !failures.is_empty() {
                return Err(Failure::Validation(anyhow!("{} sample(s) failed", failures.len())));
            }
        }
        Command::Oracle {
            loop_file,
            oracle,
            annotations,
            id,
        } => {
            let code = read(&loop_file)?;
            let id = id.unwrap_or_else(|| {
                loop_file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let oracle = match oracle {
                OracleKind::Heuristic => PatternOracle::Heuristic(cfg.heuristic()),
                OracleKind::Annotation => {
                    let path =
                        annotations.ok_or_else(|| anyhow!("--annotations is required with --oracle annotation"))?;
                    PatternOracle::Annotation(AnnotationStore::load(&path).map_err(anyhow::Error::from)?)
                }
            };
            let verdict = oracle.decide(&LoopSource::new(id, code)).map_err(anyhow::Error::from)?;
            if let Some(w) = &verdict.warning {
                eprintln!("warning: {w}");
            }
            let out = serde_json::json!({
                "label": verdict.decision.label(),
                "decision": verdict.decision,
            });
            emit(&(serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)? + "\n"))?;
        }
        Command::Correlate { report, corpus } => {
            let report = MetricReport::from_csv(&read(&report)?).map_err(anyhow::Error::from)?;
            let corpus = load_corpus(&corpus).map_err(anyhow::Error::from)?;
            let table = correlate(&report, &corpus).map_err(anyhow::Error::from)?;
            emit(&table.to_markdown())?;
        }
        Command::Speedup { runtimes, format } => {
            let r = speedup_report(&read(&runtimes)?).map_err(anyhow::Error::from)?;
            match format {
                Format::Md => emit(&r.to_markdown())?,
                Format::Csv => emit(&r.to_csv())?,
                Format::Json => emit(&(serde_json::to_string_pretty(&r).map_err(anyhow::Error::from)? + "\n"))?,
            }
        }
        Command::Report { run, corpus } => {
            let corpus = load_corpus(&corpus).map_err(anyhow::Error::from)?;
            let info: RunInfo = serde_json::from_str(&read(&run.join("run.json"))?).map_err(anyhow::Error::from)?;
            let outcomes: Vec<SampleOutcome> = read(&run.join("outcomes.jsonl"))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()
                .map_err(anyhow::Error::from)?;
            let pr = PipelineRun {
                model: info.model,
                mode: info.mode,
                outcomes,
                records: Vec::new(),
            };
            write_reports(&run, &pr, &corpus, &cfg)?;
            eprintln!("reports rewritten in {}", run.display());
        }
        Command::ReplayBuild {
            corpus,
            responses,
            oracle,
            model,
            family: fam,
            out,
        } => {
            let corpus = load_corpus(&corpus).map_err(anyhow::Error::from)?;
            let fixtures = parse_responses_jsonl(&read(&responses)?).map_err(anyhow::Error::from)?;
            let oracle = build_oracle(&cfg, &oracle, &corpus)?;
            let model = model.unwrap_or_else(|| cfg.llm.model.clone());
            let builder = cfg.prompt_builder().map_err(anyhow::Error::from)?;
            let entries = build_replay_entries(&corpus, &oracle, &builder, family(&cfg, fam), &model, &fixtures)
                .map_err(anyhow::Error::from)?;
            let n = write_replay_entries(&entries, &out).map_err(|e: LlmError| anyhow!(e))?;
            eprintln!("wrote {n} replay entries to {}", out.display());
        }
    }
    Ok(())
}
