//! Config-driven experiment runner behind the `hrsnn` binary.

pub mod config;
pub mod ini;
pub mod manifest;
pub mod tasks;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hrsnn_core::ErrorKind;

use crate::config::{ExperimentConfig, Task};
use crate::ini::{Diagnostic, Ini};
use crate::manifest::{records, sha256_hex, Manifest, TOOL};
use crate::tasks::Artifact;

pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hrsnn", version, about = "Heterogeneous recurrent spiking network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (INI).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Run this single seed instead of the config's seed list.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Memory capacity, spike count and efficiency.
    McEval(RunArgs),
    /// Time-series prediction on Lorenz data.
    Predict(RunArgs),
    /// Synthetic spike-pattern classification.
    Classify(RunArgs),
    /// Bayesian optimization over parameter distributions.
    BoSearch {
        #[command(flatten)]
        run: RunArgs,
        /// capacity, spikes or efficiency.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        n_init: Option<usize>,
    },
    /// Hawkes-process sparsity comparison.
    HawkesCompare(RunArgs),
    /// Write generated datasets.
    GenData(RunArgs),
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Repeat a run from its manifest and compare the outputs.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    fn diagnostics(diags: &[Diagnostic]) -> Self {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        Self::new(EXIT_CONFIG, lines.join("\n"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<hrsnn_core::Error> for CliError {
    fn from(e: hrsnn_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Numerical => EXIT_NUMERICAL,
            ErrorKind::Io => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }
}

/// Config text plus overrides, parsed and validated.
pub fn load_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let mut ini = Ini::parse(text)?;
    let mut diags = Vec::new();
    for o in overrides {
        if let Err(d) = ini.apply_override(o) {
            diags.push(d);
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    ExperimentConfig::from_ini(&ini)
}

/// Diagnostics for a config file; empty means valid.
pub fn validate_file(path: &Path, overrides: &[String]) -> Result<Vec<Diagnostic>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(load_config(&text, overrides).err().unwrap_or_default())
}

/// Executes a parsed command line. `Ok` carries lines for stdout.
pub fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::McEval(a) => run_task(Task::McEval, a, Vec::new()),
        Command::Predict(a) => run_task(Task::Predict, a, Vec::new()),
        Command::Classify(a) => run_task(Task::Classify, a, Vec::new()),
        Command::HawkesCompare(a) => run_task(Task::HawkesCompare, a, Vec::new()),
        Command::GenData(a) => run_task(Task::GenData, a, Vec::new()),
        Command::BoSearch {
            run,
            objective,
            budget,
            n_init,
        } => {
            let mut extra = Vec::new();
            if let Some(o) = objective {
                extra.push(format!("bo.objective={o}"));
            }
            if let Some(b) = budget {
                extra.push(format!("bo.budget={b}"));
            }
            if let Some(n) = n_init {
                extra.push(format!("bo.n_init={n}"));
            }
            run_task(Task::BoSearch, run, extra)
        }
        Command::Validate { config, set } => {
            let diags = validate_file(&config, &set)?;
            if diags.is_empty() {
                Ok(vec![format!("{}: ok", config.display())])
            } else {
                Err(CliError::diagnostics(&diags))
            }
        }
        Command::Rerun { manifest, out, workers } => rerun(&manifest, &out, workers),
    }
}

fn run_task(task: Task, args: RunArgs, extra: Vec<String>) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    // Flag-derived overrides go last so they win over `--set`.
    let mut overrides = args.set.clone();
    overrides.extend(extra);
    if let Some(s) = args.seed {
        overrides.push(format!("run.seeds={s}"));
    }
    let cfg = load_config(&text, &overrides).map_err(|d| CliError::diagnostics(&d))?;
    if cfg.task != task {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("[run] task: config is for '{}', not '{}'", cfg.task.name(), task.name()),
        ));
    }
    let workers = args.workers.unwrap_or_else(default_workers);
    let artifacts = compute(&cfg, workers)?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: task.name().into(),
        config_path: args.config.display().to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        config_text: text,
        overrides,
        seeds: cfg.seeds.clone(),
        workers,
        resolved: serde_json::to_value(&cfg).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?,
        outputs: records(&artifacts),
    };
    write_outputs(&args.out, &artifacts, &manifest)?;
    Ok(vec![format!(
        "{}: wrote {} files to {}",
        task.name(),
        artifacts.len() + 1,
        args.out.display()
    )])
}

fn rerun(path: &Path, out: &Path, workers: Option<usize>) -> Result<Vec<String>, CliError> {
    let old = Manifest::read(path)
        .map_err(|e| CliError::io(path, e))?
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: not a manifest: {e}", path.display())))?;
    if old.tool != TOOL {
        return Err(CliError::new(EXIT_CONFIG, format!("manifest was written by '{}'", old.tool)));
    }
    let cfg = load_config(&old.config_text, &old.overrides).map_err(|d| CliError::diagnostics(&d))?;
    let workers = workers.unwrap_or(old.workers);
    let artifacts = compute(&cfg, workers)?;
    let mut manifest = old.clone();
    manifest.version = env!("CARGO_PKG_VERSION").into();
    manifest.workers = workers;
    manifest.outputs = records(&artifacts);
    write_outputs(out, &artifacts, &manifest)?;
    let diffs = old.mismatches(&manifest.outputs, "");
    if diffs.is_empty() {
        Ok(vec![format!("rerun: {} outputs identical", manifest.outputs.len())])
    } else {
        Err(CliError::new(EXIT_MISMATCH, format!("rerun differs:\n{}", diffs.join("\n"))))
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn compute(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Artifact>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("worker pool: {e}")))?;
    Ok(pool.install(|| tasks::run(cfg))?.0)
}

/// All file writes happen here, on the calling thread, and only inside `out`.
fn write_outputs(out: &Path, artifacts: &[Artifact], manifest: &Manifest) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for a in artifacts {
        debug_assert!(!a.name.contains(['/', '\\']) && !a.name.starts_with('.'));
        let p = out.join(&a.name);
        std::fs::write(&p, &a.bytes).map_err(|e| CliError::io(&p, e))?;
    }
    let p = out.join("manifest.json");
    let json = manifest.to_json().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    std::fs::write(&p, json).map_err(|e| CliError::io(&p, e))
}
