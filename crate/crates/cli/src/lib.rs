//! The `bfrb` command line: dataset validation, experiment runs, the full
//! experiment matrix, descriptive statistics, feature export and synthetic
//! data generation.
//!
//! Exit codes: 0 success, 1 domain or validation error, 2 I/O or
//! configuration error.

pub mod config;
pub mod output;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bfrb_core::evaluation::{
    descriptive_stats_report, evaluate, prepare_features, CvStrategy, EvalReport, ExperimentConfig, MetricSummary,
    ModalitySubset, PreparedFeatures,
};
use bfrb_core::ingest::{discover_sessions, load_session, Adapter, IngestError};
use bfrb_core::models::{ModelConfig, ModelKind};
use bfrb_core::synth::{generate_dataset, write_dataset, SynthConfig};
use bfrb_core::{LabelSet, SessionBundle, WindowSpec};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use config::{resolve, Overrides, ResolvedConfig};
use output::{roc_svg, write_atomic, write_csv_atomic};

#[derive(Debug, Error)]
pub enum CliError {
    /// Data or parameters the pipeline rejects.
    #[error("{0}")]
    Domain(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) | CliError::Config(_) => 2,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Adapter(_) => CliError::Config(e.to_string()),
            e if e.is_io() => CliError::Io(e.to_string()),
            e => CliError::Domain(format!("{} ({})", e, e.kind())),
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bfrb", version, about = "Anticipatory BFRB detection from wearable sensor data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every session under a dataset root
    Validate {
        dataset: PathBuf,
        #[arg(long)]
        adapter: Option<PathBuf>,
    },
    /// Run one experiment (plus modality ablations) and write its reports
    Run(Overrides),
    /// Run every window x label set x model x CV strategy combination
    Matrix(Overrides),
    /// Descriptive statistics of a dataset
    Stats {
        dataset: PathBuf,
        #[arg(long)]
        adapter: Option<PathBuf>,
        #[arg(long, default_value = "bfrb-stats")]
        output_dir: PathBuf,
    },
    /// Write the feature matrix of one window spec and label set as CSV
    Featurize {
        #[command(flatten)]
        overrides: Overrides,
        /// Output CSV (default: <output-dir>/features.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset in the canonical layout
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        participants: usize,
        #[arg(long, default_value_t = 24)]
        events: usize,
        #[arg(long, default_value_t = 1.0)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Validate { dataset, adapter } => cmd_validate(&dataset, adapter.as_deref()),
        Command::Run(o) => cmd_run(&resolve(&o)?).map(|_| 0),
        Command::Matrix(o) => cmd_matrix(&resolve(&o)?),
        Command::Stats {
            dataset,
            adapter,
            output_dir,
        } => cmd_stats(&dataset, adapter.as_deref(), &output_dir).map(|_| 0),
        Command::Featurize { overrides, out } => {
            let cfg = resolve(&overrides)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join("features.csv"));
            cmd_featurize(&cfg, &out).map(|_| 0)
        }
        Command::Synth {
            out,
            participants,
            events,
            signal,
            seed,
        } => {
            let cfg = SynthConfig {
                participants,
                events_per_session: events,
                signal,
                seed,
                ..SynthConfig::default()
            };
            let sessions = generate_dataset(&cfg)?;
            write_dataset(&sessions, &out)?;
            println!("wrote {} sessions to {}", sessions.len(), out.display());
            Ok(0)
        }
    }
}

fn load_adapter(path: Option<&Path>) -> Result<Adapter, CliError> {
    match path {
        Some(p) => Ok(Adapter::from_path(p)?),
        None => Ok(Adapter::default()),
    }
}

/// Loads every session; an empty root is an I/O error.
pub fn load_sessions(root: &Path, adapter: Option<&Path>) -> Result<Vec<SessionBundle>, CliError> {
    let adapter = load_adapter(adapter)?;
    let dirs = discover_sessions(root)?;
    if dirs.is_empty() {
        return Err(CliError::Io(format!("{}: no participant directories", root.display())));
    }
    let sessions = dirs
        .par_iter()
        .map(|d| load_session(d, &adapter).map_err(|e| (d.participant_id.clone(), e)))
        .collect::<Result<Vec<_>, _>>();
    sessions.map_err(|(p, e)| {
        let err = CliError::from(e);
        match err {
            CliError::Domain(m) => CliError::Domain(format!("session {p}: {m}")),
            other => other,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionCheck {
    pub participant: String,
    pub ok: bool,
    pub detail: String,
}

pub fn cmd_validate(root: &Path, adapter: Option<&Path>) -> Result<i32, CliError> {
    let adapter = load_adapter(adapter)?;
    let dirs = discover_sessions(root)?;
    if dirs.is_empty() {
        return Err(CliError::Io(format!("{}: no participant directories", root.display())));
    }
    let mut io_failure = false;
    let mut checks = Vec::new();
    for d in &dirs {
        let check = match load_session(d, &adapter) {
            Ok(b) => SessionCheck {
                participant: d.participant_id.clone(),
                ok: true,
                detail: format!(
                    "{} samples, {} stages, {} behaviors",
                    b.recording().samples().len(),
                    b.stages().len(),
                    b.events().len()
                ),
            },
            Err(e) => {
                io_failure |= e.is_io();
                SessionCheck {
                    participant: d.participant_id.clone(),
                    ok: false,
                    detail: format!("{}: {e}", e.kind()),
                }
            }
        };
        println!(
            "{}\t{}\t{}",
            check.participant,
            if check.ok { "ok" } else { "FAIL" },
            check.detail
        );
        checks.push(check);
    }
    let failed = checks.iter().filter(|c| !c.ok).count();
    println!("{} sessions, {} failed", checks.len(), failed);
    Ok(if io_failure {
        2
    } else if failed > 0 {
        1
    } else {
        0
    })
}

fn file_tag(s: &str) -> String {
    s.replace(['/', '+', ':', ','], "-")
}

fn fmt_summary(m: &MetricSummary) -> String {
    match (m.mean, m.std) {
        (Some(mean), Some(std)) => format!("{mean:.3} ({std:.3})"),
        (Some(mean), None) => format!("{mean:.3}"),
        _ => "undefined".into(),
    }
}

fn with_run_config(mut report: EvalReport, cfg: &ResolvedConfig) -> EvalReport {
    report.metadata.run_config = cfg.to_json_value();
    report
}

fn write_report(report: &EvalReport, dir: &Path, stem: &str) -> Result<(), CliError> {
    write_atomic(&dir.join(format!("{stem}.json")), report.to_json().as_bytes())?;
    Ok(())
}

/// Runs one experiment for all modalities and every configured ablation,
/// sharing one fold plan. Returns the reports in ablation order, all
/// modalities last.
pub fn cmd_run(cfg: &ResolvedConfig) -> Result<Vec<EvalReport>, CliError> {
    let started = Instant::now();
    let sessions = load_sessions(&cfg.dataset, cfg.adapter.as_deref())?;
    let prepared = prepare_features(&sessions, &cfg.experiment()).map_err(domain)?;
    let plan = prepared.plan(cfg.cv).map_err(domain)?;
    let mut subsets = cfg.ablations.clone();
    if !subsets.iter().any(ModalitySubset::is_all) {
        subsets.push(ModalitySubset::all());
    }
    let reports = subsets
        .iter()
        .map(|s| evaluate(&prepared, &cfg.model, &plan, s).map(|r| with_run_config(r, cfg)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(domain)?;

    let out = &cfg.output_dir;
    write_atomic(
        &out.join("run_config.json"),
        serde_json::to_string_pretty(cfg).expect("config serializes").as_bytes(),
    )?;
    for r in &reports {
        let tag = file_tag(&r.metadata.ablation.to_string());
        write_report(r, out, &format!("report_{tag}"))?;
        write_csv_atomic(&out.join(format!("folds_{tag}.csv")), |b| r.write_folds_csv(b))?;
        write_csv_atomic(&out.join(format!("roc_{tag}.csv")), |b| r.write_roc_csv(b))?;
    }
    if cfg.plots {
        let curves: Vec<_> = reports
            .iter()
            .map(|r| (r.metadata.ablation.to_string(), r.summary.auc.mean, r.roc.clone()))
            .collect();
        let title = format!(
            "{} {} {} {}",
            cfg.model.kind.abbreviation(),
            cfg.window,
            cfg.label_set,
            cfg.cv.short_name()
        );
        write_atomic(&out.join("roc.svg"), roc_svg(&title, &curves).as_bytes())?;
    }

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{} {} {} {}: {} vectors ({} positive), {} folds",
        cfg.model.kind,
        cfg.window,
        cfg.label_set,
        cfg.cv.short_name(),
        prepared.summary.vectors,
        prepared.summary.vectors_positive,
        plan.folds.len()
    );
    for r in &reports {
        let _ = writeln!(
            stdout,
            "  {:<12} AUC {}  recall {}  F1 {}",
            r.metadata.ablation.to_string(),
            fmt_summary(&r.summary.auc),
            fmt_summary(&r.summary.recall),
            fmt_summary(&r.summary.f1)
        );
    }
    let _ = writeln!(stdout, "wrote {} ({:.1} s)", out.display(), started.elapsed().as_secs_f64());
    Ok(reports)
}

/// Window specs of the matrix, in column order.
pub const MATRIX_WINDOWS: [WindowSpec; 2] = [WindowSpec::SHORT, WindowSpec::LONG];
pub const MATRIX_STRATEGIES: [CvStrategy; 2] = [CvStrategy::LeaveOneUserOut, CvStrategy::STRATIFIED];

type CellResult = Result<EvalReport, String>;

struct MatrixCell {
    strategy: CvStrategy,
    window: WindowSpec,
    labels: LabelSet,
    model: ModelKind,
    result: CellResult,
}

fn report_stem(window: WindowSpec, labels: &LabelSet, model: ModelKind) -> String {
    format!("{}_{}_{}", file_tag(&window.to_string()), file_tag(&labels.to_string()), model.name())
}

/// All 36 combinations. Cells that fail are recorded and the rest continue;
/// the exit code is 1 when any cell failed.
pub fn cmd_matrix(cfg: &ResolvedConfig) -> Result<i32, CliError> {
    let started = Instant::now();
    let sessions = load_sessions(&cfg.dataset, cfg.adapter.as_deref())?;
    let combos: Vec<(WindowSpec, LabelSet)> = MATRIX_WINDOWS
        .iter()
        .flat_map(|&w| LabelSet::STANDARD_SETS.iter().map(move |l| (w, l.clone())))
        .collect();

    let cells: Vec<MatrixCell> = combos
        .par_iter()
        .flat_map_iter(|(window, labels)| {
            let exp = ExperimentConfig {
                window: *window,
                labels: labels.clone(),
                ..cfg.experiment()
            };
            let prepared: Result<PreparedFeatures, String> =
                prepare_features(&sessions, &exp).map_err(|e| e.to_string());
            let mut cells = Vec::new();
            for strategy in MATRIX_STRATEGIES {
                let plan = prepared.as_ref().map_err(Clone::clone).and_then(|p| {
                    p.plan(strategy).map(|plan| (p, plan)).map_err(|e| e.to_string())
                });
                for kind in ModelKind::ALL {
                    let model = ModelConfig { kind, ..cfg.model.clone() };
                    let result = plan.as_ref().map_err(Clone::clone).and_then(|(p, plan)| {
                        evaluate(p, &model, plan, &ModalitySubset::all())
                            .map(|r| with_run_config(r, cfg))
                            .map_err(|e| e.to_string())
                    });
                    cells.push(MatrixCell {
                        strategy,
                        window: *window,
                        labels: labels.clone(),
                        model: kind,
                        result,
                    });
                }
            }
            cells
        })
        .collect();

    let out = &cfg.output_dir;
    write_atomic(
        &out.join("matrix_config.json"),
        serde_json::to_string_pretty(cfg).expect("config serializes").as_bytes(),
    )?;
    let mut errors = Vec::new();
    for c in &cells {
        let dir = out.join("reports").join(c.strategy.short_name());
        let stem = report_stem(c.window, &c.labels, c.model);
        match &c.result {
            Ok(r) => write_report(r, &dir, &stem)?,
            Err(e) => errors.push(serde_json::json!({
                "strategy": c.strategy.short_name(),
                "window": c.window,
                "labels": c.labels,
                "model": c.model,
                "error": e,
            })),
        }
    }
    for strategy in MATRIX_STRATEGIES {
        let path = out.join(format!("summary_{}.csv", strategy.short_name()));
        write_csv_atomic(&path, |b| write_summary_csv(&cells, strategy, b))?;
    }
    let errors_path = out.join("matrix_errors.json");
    if errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).map_err(|e| CliError::Io(e.to_string()))?;
        }
    } else {
        write_atomic(
            &errors_path,
            serde_json::to_string_pretty(&errors).expect("errors serialize").as_bytes(),
        )?;
    }
    println!(
        "{} cells, {} failed; wrote {} ({:.1} s)",
        cells.len(),
        errors.len(),
        out.display(),
        started.elapsed().as_secs_f64()
    );
    for e in &errors {
        eprintln!("cell failed: {e}");
    }
    Ok(if errors.is_empty() { 0 } else { 1 })
}

/// Rows: label set x model. Columns: window x (AUC, recall, F1) mean and std.
fn write_summary_csv(cells: &[MatrixCell], strategy: CvStrategy, out: &mut Vec<u8>) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label_set".to_string(), "model".to_string()];
    for window in MATRIX_WINDOWS {
        for metric in ["auc", "recall", "f1"] {
            header.push(format!("{window}_{metric}_mean"));
            header.push(format!("{window}_{metric}_std"));
        }
    }
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    for labels in LabelSet::STANDARD_SETS {
        for kind in ModelKind::ALL {
            let mut row = vec![labels.to_string(), kind.abbreviation().to_string()];
            for window in MATRIX_WINDOWS {
                let cell = cells
                    .iter()
                    .find(|c| c.strategy == strategy && c.window == window && c.labels == labels && c.model == kind);
                match cell.map(|c| &c.result) {
                    Some(Ok(r)) => {
                        for m in [&r.summary.auc, &r.summary.recall, &r.summary.f1] {
                            row.push(opt(m.mean));
                            row.push(opt(m.std));
                        }
                    }
                    _ => row.extend(std::iter::repeat_n("ERROR".to_string(), 6)),
                }
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_stats(root: &Path, adapter: Option<&Path>, out: &Path) -> Result<bfrb_core::evaluation::DescriptiveReport, CliError> {
    let sessions = load_sessions(root, adapter)?;
    let report = descriptive_stats_report(&sessions);
    write_atomic(&out.join("stats.json"), report.to_json().as_bytes())?;
    write_csv_atomic(&out.join("prevalence.csv"), |b| report.write_prevalence_csv(b))?;
    write_csv_atomic(&out.join("stages.csv"), |b| report.write_stages_csv(b))?;
    write_csv_atomic(&out.join("participants.csv"), |b| report.write_participants_csv(b))?;

    println!("{} sessions, {} behaviors", report.sessions, report.total_behaviors);
    for p in report.prevalence.iter().filter(|p| p.count > 0) {
        println!(
            "  {:<16} {:>5}  {:>5.1}%",
            p.behavior.name(),
            p.count,
            p.share.unwrap_or(0.0) * 100.0
        );
    }
    Ok(report)
}

pub fn cmd_featurize(cfg: &ResolvedConfig, out: &Path) -> Result<PreparedFeatures, CliError> {
    let sessions = load_sessions(&cfg.dataset, cfg.adapter.as_deref())?;
    let prepared = prepare_features(&sessions, &cfg.experiment()).map_err(domain)?;
    write_csv_atomic(out, |b| prepared.dataset.write_csv(b))?;
    let sidecar = serde_json::json!({
        "run_config": cfg,
        "schema_fingerprint": prepared.dataset.schema.fingerprint(),
        "dataset": prepared.summary,
    });
    write_atomic(
        &out.with_extension("json"),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes").as_bytes(),
    )?;
    println!(
        "{} vectors ({} positive) x {} features -> {}",
        prepared.summary.vectors,
        prepared.summary.vectors_positive,
        prepared.dataset.schema.len(),
        out.display()
    );
    Ok(prepared)
}
