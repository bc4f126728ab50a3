//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uvad_core::eval::evaluate_run;
use uvad_core::orchestrator::{LoopEvent, LoopMetrics, LoopObserver, Pipeline, StopReason};
use uvad_core::synthgen::{generate, GeneratorSpec};
use uvad_core::RunConfig;

use crate::ablation::run_ablation;
use crate::report::{self, ablation_chart, emit_report, metrics_rows, write_ablation, write_metrics};
use crate::run_dir::{write_atomic, RunDir, ABLATION_FILE, METRICS_FILE};
use crate::{config_file, dataset_io};

pub const DATASET_FILE: &str = "dataset.jsonl";

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_COLLAPSED: u8 = 3;
pub const EXIT_MAX_MODULES: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "uvad", version, about = "Unsupervised video anomaly detection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into <out>/dataset.jsonl.
    Gen(Common),
    /// Run the pipeline on a dataset, checkpointing into <out>.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue the run recorded in <out>.
        #[arg(long)]
        resume: bool,
    },
    /// Score every module of the run in <out> and write metrics.csv.
    Eval(Common),
    /// Render charts from the run and metrics in <out>.
    Report(Common),
    /// Compare soft-label and hard-label runs over the first two modules.
    Ablate(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides every other source.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output (run) directory, created if absent.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Dataset file. Defaults to <out>/dataset.jsonl.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `key=value` config override; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        config_file::resolve(self.config.as_deref(), std::env::vars(), &self.overrides, self.seed)
    }

    fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join(DATASET_FILE))
    }

    fn load_dataset(&self) -> Result<uvad_core::dataset::Dataset> {
        let path = self.dataset_path();
        dataset_io::load(&path).with_context(|| format!("loading dataset {}", path.display()))
    }
}

/// One `key=value` line on stdout for harnesses.
fn summary(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}", line.join(" "));
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |x| format!("{x:.6}"))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn exit_code(reason: StopReason) -> u8 {
    match reason {
        StopReason::CriterionMet => EXIT_OK,
        StopReason::ThresholdCollapsed => EXIT_COLLAPSED,
        StopReason::MaxModules => EXIT_MAX_MODULES,
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen(c) => gen(&c),
        Command::Train { common, resume } => train(&common, resume),
        Command::Eval(c) => eval(&c),
        Command::Report(c) => report_cmd(&c),
        Command::Ablate(c) => ablate(&c),
    }
}

fn gen(c: &Common) -> Result<u8> {
    let cfg = c.config()?;
    let spec = GeneratorSpec::from_config(&cfg);
    let ds = generate(&spec, cfg.master_seed)?;
    let path = c.dataset_path();
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    dataset_io::save(&ds, &path).with_context(|| format!("writing {}", path.display()))?;
    let n = ds.n_snippets();
    let abnormal = ds.ground_truth().n_abnormal();
    summary(&[
        ("command", "gen".into()),
        ("dataset", path.display().to_string()),
        ("N", n.to_string()),
        ("d", ds.d().to_string()),
        ("objects", ds.training().n_objects().to_string()),
        ("abnormal", abnormal.to_string()),
        ("rho", format!("{:.6}", abnormal as f64 / n as f64)),
    ]);
    Ok(EXIT_OK)
}

/// Prints one progress line per loop.
struct Progress<W: Write>(W);

impl<W: Write> LoopObserver for Progress<W> {
    fn on_loop(&mut self, e: &LoopEvent<'_>) -> LoopMetrics {
        let _ = writeln!(
            self.0,
            "module={} loop={} t_ws={} wocc_loss={:.6} ws_loss={}",
            e.module,
            e.loop_index,
            e.t_ws,
            e.wocc_loss,
            fmt_opt(e.ws_loss)
        );
        LoopMetrics::default()
    }
}

fn train(c: &Common, resume: bool) -> Result<u8> {
    let dir = RunDir::create(&c.out)?;
    let ds = c.load_dataset()?;
    let data = ds.training();
    let mut pipeline = if resume && dir.has_record() {
        let record = dir.load()?;
        let requested = c.config()?;
        if requested != record.config {
            eprintln!(
                "note: resuming with the config stored in {}; command-line settings ignored",
                dir.root().display()
            );
        }
        Pipeline::resume(record, data)?
    } else {
        if dir.has_record() {
            bail!("{} already holds a run; pass --resume or choose another --out", dir.root().display());
        }
        Pipeline::new(c.config()?, data)?
    };
    let mut progress = Progress(std::io::stderr());
    let reason = loop {
        let step = pipeline.step_module(&mut progress)?;
        dir.save(pipeline.record())?;
        if let Some(r) = step {
            break r;
        }
    };
    let record = pipeline.record();
    if reason == StopReason::ThresholdCollapsed {
        eprintln!("threshold collapsed: a pseudo-label pool went empty after module {}", record.modules.len());
    }
    summary(&[
        ("command", "train".into()),
        ("stop_reason", reason.as_str().into()),
        ("modules", record.modules.len().to_string()),
        ("final_t_ws", record.final_threshold().unwrap_or(0).to_string()),
        ("thresholds", join(&record.thresholds)),
    ]);
    Ok(exit_code(reason))
}

fn eval(c: &Common) -> Result<u8> {
    let dir = RunDir::new(&c.out);
    let record = dir.load()?;
    let ds = c.load_dataset()?;
    let series = evaluate_run(&record, &ds)?;
    let rows = metrics_rows(&series);
    write_metrics(&dir.path(METRICS_FILE), &rows)?;
    let last = rows.last();
    summary(&[
        ("command", "eval".into()),
        ("modules", rows.len().to_string()),
        ("final_auc_wocc", fmt_opt(last.map(|r| r.auc_wocc))),
        ("final_auc_ws", fmt_opt(last.map(|r| r.auc_ws))),
        ("metrics", dir.path(METRICS_FILE).display().to_string()),
    ]);
    Ok(EXIT_OK)
}

fn report_cmd(c: &Common) -> Result<u8> {
    let dir = RunDir::new(&c.out);
    let outcome = emit_report(&dir)?;
    for n in &outcome.notices {
        eprintln!("{n}");
    }
    let names: Vec<String> =
        outcome.written.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect();
    summary(&[("command", "report".into()), ("charts", join(&names)), ("skipped", outcome.notices.len().to_string())]);
    Ok(EXIT_OK)
}

fn ablate(c: &Common) -> Result<u8> {
    let dir = RunDir::create(&c.out)?;
    let ds = c.load_dataset()?;
    let outcome = run_ablation(&c.config()?, &ds)?;
    write_ablation(&dir.path(ABLATION_FILE), &outcome.rows)?;
    let chart = dir.path(report::ABLATION_CHART);
    write_atomic(&chart, ablation_chart(&outcome.rows).render().as_bytes())?;
    summary(&[
        ("command", "ablate".into()),
        ("soft_ws_auc_std", fmt_opt(outcome.soft_ws_std)),
        ("hard_ws_auc_std", fmt_opt(outcome.hard_ws_std)),
        ("soft_thresholds", join(&outcome.soft.thresholds)),
        ("hard_thresholds", join(&outcome.hard.thresholds)),
        ("chart", chart.display().to_string()),
    ]);
    Ok(EXIT_OK)
}

/// Entry point used by `main`: parses arguments, reports errors, maps codes.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
