//! `acgrade`: exam setup, sheet generation, scan ingestion, grading exports
//! and search-exercise experiments from the command line.
//!
//! Workflow commands run either against a data directory in-process
//! (`--data-dir`) or against a running service (`--server` with `--token`).

mod backend;
mod lab;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acgrade_core::exam::ExamError;
use acgrade_core::sheet::{generate_layout, sequential_booklet_ids, Anomaly, LayoutTemplate, RoutingResult, ScanPage};
use acgrade_core::{AcId, BookletId, Exam, TaskId};
use acgrade_service::{ExamState, ServiceConfig, ServiceError, SubmitRequest};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::backend::{Backend, Local, Remote};

#[derive(Parser)]
#[command(name = "acgrade", version, about = "Answer-class based exam grading")]
struct Cli {
    /// Base URL of a running grading service.
    #[arg(long, global = true, conflicts_with = "data_dir")]
    server: Option<String>,
    /// Data directory to operate on directly, without a service.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Bearer token for --server.
    #[arg(long, global = true, env = "ACGRADE_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Write output here instead of stdout (a directory for multi-file output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exam documents and lifecycle.
    #[command(subcommand)]
    Exam(ExamCmd),
    /// Printable sheet layouts.
    #[command(subcommand)]
    Sheets(SheetsCmd),
    /// Scanned pages.
    #[command(subcommand)]
    Scans(ScansCmd),
    /// Answer-class assignments and grade export.
    #[command(subcommand)]
    Grade(GradeCmd),
    /// Per-booklet feedback documents.
    #[command(subcommand)]
    Feedback(FeedbackCmd),
    /// Cohort statistics.
    #[command(subcommand)]
    Analytics(AnalyticsCmd),
    /// Search-algorithm oracles and answer classification.
    #[command(subcommand)]
    Searchlab(lab::LabCmd),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExamCmd {
    /// Check an exam file and print a summary.
    Validate { file: PathBuf },
    Upload { file: PathBuf },
    /// Move the hosted exam to another lifecycle state.
    Transition { state: ExamState },
    Status,
}

#[derive(Subcommand)]
enum SheetsCmd {
    /// Write one layout descriptor per booklet into --out (default: current directory).
    Generate {
        exam: PathBuf,
        #[arg(long)]
        count: usize,
        /// Layout template overriding the exam's own.
        #[arg(long)]
        template: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScansCmd {
    /// Route a batch listed in a CSV manifest with columns image_path,payload_text.
    Ingest {
        manifest: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum GradeCmd {
    /// Claim the next ungraded answer of a task.
    Next {
        #[arg(long)]
        task: String,
    },
    Submit(SubmitArgs),
    /// Grades CSV (exam must be in analysis or later).
    Export,
}

#[derive(Args)]
struct SubmitArgs {
    #[arg(long)]
    booklet: String,
    #[arg(long)]
    task: String,
    /// Answer class id; repeat for several.
    #[arg(long = "ac", required = true)]
    acs: Vec<String>,
    #[arg(long)]
    transcription: Option<String>,
    #[arg(long)]
    finalize: bool,
    /// Version being replaced; defaults to the current one.
    #[arg(long)]
    expected_version: Option<u64>,
}

#[derive(Subcommand)]
enum FeedbackCmd {
    /// Feedback for one booklet, or for all booklets into the --out directory.
    Export {
        #[arg(long)]
        booklet: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
    /// Answer-class histogram as CSV.
    Csv,
}

#[derive(Subcommand)]
enum AnalyticsCmd {
    Cohort {
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.clone();
    match cli.command {
        Command::Exam(ExamCmd::Validate { file }) => {
            let exam = load_exam(&file)?;
            for lint in exam.lints() {
                eprintln!("warning: {lint}");
            }
            emit(out.as_deref(), &exam_summary(&exam))
        }
        Command::Exam(ExamCmd::Upload { file }) => {
            let text = read(&file)?;
            let status = backend(&cli.server, &cli.data_dir, &cli.token)?.upload_exam(&text).map_err(explain_exam)?;
            emit(out.as_deref(), &format!("uploaded {} ({})\n", status.exam_id, status.state))
        }
        Command::Exam(ExamCmd::Transition { state }) => {
            let now = backend(&cli.server, &cli.data_dir, &cli.token)?.transition(state)?;
            emit(out.as_deref(), &format!("{now}\n"))
        }
        Command::Exam(ExamCmd::Status) => {
            let status = backend(&cli.server, &cli.data_dir, &cli.token)?.status()?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&status)? + "\n"))
        }
        Command::Sheets(SheetsCmd::Generate { exam, count, template }) => {
            generate_sheets(&exam, count, template.as_deref(), out.as_deref())
        }
        Command::Scans(ScansCmd::Ingest { manifest, json }) => {
            let pages = read_manifest(&manifest)?;
            let routed = backend(&cli.server, &cli.data_dir, &cli.token)?.ingest(pages)?;
            let text = if json { serde_json::to_string_pretty(&routed)? + "\n" } else { routing_report(&routed) };
            emit(out.as_deref(), &text)
        }
        Command::Grade(GradeCmd::Next { task }) => {
            match backend(&cli.server, &cli.data_dir, &cli.token)?.claim_next(&TaskId::new(task.clone()))? {
                Some(claim) => emit(out.as_deref(), &(serde_json::to_string_pretty(&claim)? + "\n")),
                None => {
                    eprintln!("nothing left to grade for {task}");
                    Ok(())
                }
            }
        }
        Command::Grade(GradeCmd::Submit(args)) => {
            let backend = backend(&cli.server, &cli.data_dir, &cli.token)?;
            let booklet_id = BookletId::new(args.booklet);
            let task_id = TaskId::new(args.task);
            let expected_version = match args.expected_version {
                Some(v) => v,
                None => backend.assignment(&booklet_id, &task_id)?.map_or(0, |a| a.version),
            };
            let ac_ids = args.acs.iter().map(|s| AcId::new(s.trim())).collect::<Result<BTreeSet<_>, _>>()?;
            let request = SubmitRequest {
                booklet_id,
                task_id,
                ac_ids,
                transcription: args.transcription,
                finalize: args.finalize,
                expected_version: Some(expected_version),
            };
            let saved = backend.submit(request)?;
            emit(out.as_deref(), &format!("{} {} version {}\n", saved.booklet_id, saved.task_id, saved.version))
        }
        Command::Grade(GradeCmd::Export) => {
            let csv = backend(&cli.server, &cli.data_dir, &cli.token)?.export_grades()?;
            emit(out.as_deref(), &csv)
        }
        Command::Feedback(FeedbackCmd::Export { booklet }) => {
            let backend = backend(&cli.server, &cli.data_dir, &cli.token)?;
            match booklet {
                Some(b) => emit(out.as_deref(), &backend.export_feedback(&BookletId::new(b))?),
                None => {
                    let Some(dir) = out else {
                        bail!("exporting feedback for every booklet needs --out <directory>");
                    };
                    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    let booklets = backend.status()?.booklets;
                    for b in &booklets {
                        let path = dir.join(format!("{b}.txt"));
                        fs::write(&path, backend.export_feedback(b)?)
                            .with_context(|| format!("writing {}", path.display()))?;
                    }
                    println!("{} feedback files written to {}", booklets.len(), dir.display());
                    Ok(())
                }
            }
        }
        Command::Analytics(AnalyticsCmd::Cohort { format }) => {
            let report = backend(&cli.server, &cli.data_dir, &cli.token)?.cohort()?;
            let text = match format {
                ReportFormat::Text => report.to_text(),
                ReportFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
                ReportFormat::Csv => report.histogram_csv(),
            };
            emit(out.as_deref(), &text)
        }
        Command::Searchlab(cmd) => emit(out.as_deref(), &lab::run(cmd)?),
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            acgrade_service::http::serve_blocking(config)?;
            Ok(())
        }
    }
}

fn backend(server: &Option<String>, data_dir: &Option<PathBuf>, token: &Option<String>) -> Result<Box<dyn Backend>> {
    match (server, data_dir) {
        (Some(url), None) => {
            let Some(token) = token else {
                bail!("--server needs --token (or ACGRADE_TOKEN)");
            };
            Ok(Box::new(Remote::new(url, token)))
        }
        (None, Some(dir)) => Ok(Box::new(Local::open(dir)?)),
        _ => bail!("this command needs either --server <url> or --data-dir <dir>"),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn load_exam(path: &Path) -> Result<Exam> {
    let text = read(path)?;
    Exam::from_json(&text).map_err(|e| exam_error(path, &e))
}

fn exam_error(path: &Path, e: &ExamError) -> anyhow::Error {
    anyhow::anyhow!("{} is not a valid exam:\n{e}", path.display())
}

/// Turns a local validation failure into the same multi-line message a
/// remote one produces.
fn explain_exam(e: anyhow::Error) -> anyhow::Error {
    match e.downcast::<ServiceError>() {
        Ok(ServiceError::InvalidExam(inner)) => anyhow::anyhow!("invalid exam\n{inner}"),
        Ok(other) => other.into(),
        Err(e) => e,
    }
}

fn exam_summary(exam: &Exam) -> String {
    format!(
        "{}: {} problems, {} tasks, {} task-specific answer classes, {} points\n",
        exam.exam_id,
        exam.problems.len(),
        exam.task_count(),
        exam.specific_ac_count(),
        exam.max_total()
    )
}

fn generate_sheets(exam: &Path, count: usize, template: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let exam = load_exam(exam)?;
    let template: Option<LayoutTemplate> = template
        .map(|p| serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display())))
        .transpose()?;
    let booklets = sequential_booklet_ids(count);
    let descriptors = generate_layout(&exam, &booklets, template.as_ref())?;
    let pages = template.as_ref().or(exam.layout.as_ref()).map_or(0, LayoutTemplate::page_count) as usize;
    let dir = out.unwrap_or(Path::new("."));
    if !descriptors.is_empty() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for d in &descriptors {
        let path = dir.join(format!("{}.json", d.booklet_id));
        fs::write(&path, serde_json::to_string_pretty(d)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{count} booklets, {pages} pages, {} payloads", count * pages);
    Ok(())
}

#[derive(Deserialize)]
struct ManifestRow {
    image_path: String,
    payload_text: String,
}

fn read_manifest(path: &Path) -> Result<Vec<ScanPage>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).ne(["image_path", "payload_text"]) {
        bail!("{}: expected header image_path,payload_text", path.display());
    }
    reader
        .deserialize::<ManifestRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
            Ok(ScanPage { image_ref: row.image_path, payload_text: row.payload_text })
        })
        .collect()
}

fn routing_report(routed: &RoutingResult) -> String {
    let mut out = String::new();
    for (booklet, pages) in &routed.booklets {
        let list: Vec<String> = pages.iter().map(|p| p.page.to_string()).collect();
        out.push_str(&format!("{booklet}: {} pages ({})\n", pages.len(), list.join(",")));
    }
    out.push_str(&format!("{} anomalies\n", routed.anomalies.len()));
    for anomaly in &routed.anomalies {
        out.push_str(&format!("  {}\n", describe(anomaly)));
    }
    out
}

fn describe(anomaly: &Anomaly) -> String {
    match anomaly {
        Anomaly::UndecodablePayload { image_ref, reason, .. } => format!("{image_ref}: unreadable payload ({reason})"),
        Anomaly::ForeignExam { image_ref, exam_id } => format!("{image_ref}: belongs to exam {exam_id}"),
        Anomaly::UnknownBooklet { booklet_id, page, image_ref } => {
            format!("{image_ref}: booklet {booklet_id} page {page} is not registered")
        }
        Anomaly::PageOutOfRange { booklet_id, page, image_ref } => {
            format!("{image_ref}: booklet {booklet_id} has no page {page}")
        }
        Anomaly::DuplicatePage { booklet_id, page, image_refs } => {
            format!("booklet {booklet_id} page {page} scanned {} times: {}", image_refs.len(), image_refs.join(", "))
        }
        Anomaly::MissingPage { booklet_id, page } => format!("booklet {booklet_id} page {page} is missing"),
    }
}
