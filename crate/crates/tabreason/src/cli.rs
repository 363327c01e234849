//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when some items failed or the run could not
//! complete, 2 on usage errors (bad flags, missing input paths, invalid
//! config or backend spec). Diagnostics go to standard error; machine
//! output goes to files or standard output.

use std::ffi::OsString;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use tabreason_core::dataset::SegmentSelection;
use tabreason_core::eval::{build_report, gold_strings, judge_verdict, predicted_string, JudgeVerdict, Metric, Verdict};
use tabreason_core::prompt::PromptTemplates;
use tabreason_core::{execute, format_result, parse_query, Backend, Instance, Table, Trace};

use crate::batch::run_batch_with;
use crate::config::{load_config, Settings};
use crate::dataset::{build_dataset, export_jsonl, sample_instances};
use crate::http::HttpBackend;
use crate::io::{read_json, read_jsonl, write_jsonl};
use crate::replay::{RecordingBackend, ReplayBackend};
use crate::templates::templates_or_builtin;

#[derive(Debug, Parser)]
#[command(name = "tabreason", version, about = "Plan-then-reason table reasoning with SQL execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline over an instance file and write one trace per line.
    Infer {
        /// Instance JSONL.
        #[arg(long)]
        data: PathBuf,
        /// `http` or `replay:<script.jsonl>`.
        #[arg(long)]
        backend: String,
        /// key = value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trace JSONL output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "1")]
        parallelism: NonZeroUsize,
        /// Also write the session as a keyed replay script.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Score a trace file against gold answers.
    Eval {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated: accuracy, f1, judge.
        #[arg(long, default_value = "accuracy")]
        metrics: String,
        /// Backend for the judge metric, `http` or `replay:<script.jsonl>`.
        #[arg(long)]
        judge_backend: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Run one SQL query against a table JSON file.
    Sql {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        query: String,
    },
    /// Generate teacher responses, keep consistent ones, export pairs.
    BuildDataset {
        #[arg(long)]
        data: PathBuf,
        /// `http` or `replay:<script.jsonl>`.
        #[arg(long)]
        teacher: String,
        /// Training-pair JSONL output.
        #[arg(long)]
        out: PathBuf,
        /// full, no-plan (alias reasoning-only), or no-reasoning.
        #[arg(long, default_value = "full")]
        segments: String,
        /// Sample this many instances before generation.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "1")]
        parallelism: NonZeroUsize,
        /// Also write every candidate as JSONL.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Also write dropped candidates with their reasons as JSONL.
        #[arg(long)]
        dropped: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

fn require(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn settings(config: Option<&Path>) -> Result<Settings, Failure> {
    match config {
        None => Ok(Settings::default()),
        Some(path) => {
            require(path, "config file")?;
            load_config(path).map_err(|e| usage(format!("{e:#}")))
        }
    }
}

fn templates(settings: &Settings) -> Result<PromptTemplates, Failure> {
    templates_or_builtin(settings.templates_dir.as_deref()).map_err(|e| usage(e.to_string()))
}

fn open_backend(spec: &str, settings: &Settings) -> Result<Box<dyn Backend>, Failure> {
    if spec == "http" {
        return Ok(Box::new(HttpBackend::new(settings.http.clone())));
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let path = Path::new(path);
        require(path, "replay script")?;
        return ReplayBackend::load(path).map(|b| Box::new(b) as Box<dyn Backend>).map_err(|e| usage(e.to_string()));
    }
    Err(usage(format!("unknown backend {spec:?}; expected `http` or `replay:<path>`")))
}

fn load_instances(path: &Path) -> Result<Vec<Instance>, Failure> {
    require(path, "data file")?;
    Ok(read_jsonl(path).context("reading instances")?)
}

/// Parses `args` (program name first) and runs the command.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("{}", Cli::command().render_usage());
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Infer { data, backend, config, out, parallelism, record } => {
            let settings = settings(config.as_deref())?;
            let templates = templates(&settings)?;
            let instances = load_instances(&data)?;
            let backend = RecordingBackend::new(open_backend(&backend, &settings)?);
            let run = run_batch_with(&instances, &settings.run, &backend, parallelism, &templates);
            write_jsonl(&out, &run.traces()).context("writing traces")?;
            if let Some(path) = record {
                backend.write_script(&path).context("writing replay script")?;
            }
            eprintln!(
                "{} instances, {} failed, mean api calls {:.2}",
                run.results.len(),
                run.failures(),
                run.mean_api_calls()
            );
            for (outcome, trace) in &run.results {
                if let Some(e) = &trace.error {
                    eprintln!("{}: {e}", outcome.instance_id);
                }
            }
            Ok(i32::from(run.failures() > 0))
        }
        Command::Eval { traces, data, metrics, judge_backend, config, format } => {
            let metrics: Vec<Metric> = metrics
                .split(',')
                .filter(|m| !m.trim().is_empty())
                .map(|m| Metric::from_name(m).ok_or_else(|| usage(format!("unknown metric {m:?}"))))
                .collect::<Result<_, _>>()?;
            let settings = settings(config.as_deref())?;
            let judge = match (metrics.contains(&Metric::Judge), &judge_backend) {
                (true, None) => return Err(usage("the judge metric needs --judge-backend")),
                (true, Some(spec)) => Some(open_backend(spec, &settings)?),
                (false, _) => None,
            };
            let templates = templates(&settings)?;
            let instances = load_instances(&data)?;
            require(&traces, "trace file")?;
            let traces: Vec<Trace> = read_jsonl(&traces).context("reading traces")?;
            let outcomes: Vec<_> = traces.iter().map(Trace::outcome).collect();
            let mut judge_failures = 0;
            let verdicts: Option<Vec<JudgeVerdict>> = judge.map(|backend| {
                let by_id: std::collections::HashMap<&str, &Instance> =
                    instances.iter().map(|i| (i.id.as_str(), i)).collect();
                outcomes
                    .iter()
                    .map(|o| {
                        let Some(inst) = by_id.get(o.instance_id.as_str()) else {
                            return JudgeVerdict { verdict: Verdict::Unparseable, raw: String::new() };
                        };
                        let gold = gold_strings(&inst.gold);
                        judge_verdict(&inst.query, &gold, &predicted_string(&o.final_answer), &*backend, &templates)
                            .unwrap_or_else(|e| {
                                judge_failures += 1;
                                eprintln!("{}: judge failed: {e}", o.instance_id);
                                JudgeVerdict { verdict: Verdict::Unparseable, raw: String::new() }
                            })
                    })
                    .collect()
            });
            let report = build_report(&outcomes, &instances, &metrics, verdicts.as_deref()).context("scoring")?;
            let json = serde_json::to_string_pretty(&report).context("rendering report")?;
            match format {
                ReportFormat::Text => print!("{}", report.to_text()),
                ReportFormat::Json => println!("{json}"),
                ReportFormat::Both => {
                    print!("{}", report.to_text());
                    println!("{json}");
                }
            }
            Ok(i32::from(report.failed > 0 || judge_failures > 0))
        }
        Command::Sql { table, query } => {
            require(&table, "table file")?;
            let table: Table = read_json(&table).context("reading table")?;
            let result = parse_query(&query)
                .and_then(|q| execute(&q, &table))
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            print!("{}", format_result(&result));
            Ok(0)
        }
        Command::BuildDataset { data, teacher, out, segments, sample, seed, config, parallelism, candidates, dropped } => {
            let selection = SegmentSelection::from_name(&segments)
                .ok_or_else(|| usage(format!("unknown segment selection {segments:?}")))?;
            let settings = settings(config.as_deref())?;
            let templates = templates(&settings)?;
            let mut instances = load_instances(&data)?;
            if let Some(n) = sample {
                instances = sample_instances(&instances, n, seed);
                eprintln!("sampled {} instances with seed {seed}", instances.len());
            }
            let teacher = open_backend(&teacher, &settings)?;
            let build = build_dataset(&instances, &*teacher, &settings.run, parallelism, &templates, selection)
                .context("building dataset")?;
            if let Some(path) = candidates {
                write_jsonl(&path, &build.candidates).context("writing candidates")?;
            }
            if let Some(path) = dropped {
                write_jsonl(&path, &build.dropped).context("writing dropped candidates")?;
            }
            eprintln!(
                "{} candidates, {} kept, {} dropped, {} generation failures",
                build.candidates.len(),
                build.kept.len(),
                build.dropped.len(),
                build.generation_failures()
            );
            export_jsonl(&out, &build.pairs).context("exporting training pairs")?;
            Ok(i32::from(build.generation_failures() > 0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(dispatch(["tabreason", "sql", "--bogus"]), 2);
        assert_eq!(dispatch(["tabreason"]), 2);
        assert_eq!(dispatch(["tabreason", "sql", "--table", "/nonexistent/t.json", "--query", "SELECT 1"]), 2);
        assert_eq!(dispatch(["tabreason", "--help"]), 0);
    }
}
