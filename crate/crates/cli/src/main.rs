//! `lineres`: reproducible resonance experiments on a π-section line.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 usage or configuration
//! error, 3 solver failure, 4 finished with warnings.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "lineres",
    version,
    about = "Resonance analysis of a transmission line"
)]
struct Cli {
    /// JSON run configuration; the 100 km reference line when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues and resonance table of the line.
    Spectrum {
        #[arg(long, value_enum, default_value_t = Method::Numeric)]
        method: Method,
    },
    /// Damping of selected modes with the load moved across every node.
    Sweep,
    /// Eigenvalue traces as the load conductance grows.
    Locus,
    /// First-order eigenvalue sensitivity to the load position.
    Sensitivity,
    /// Step or ramp energization and the spectrum of the response.
    Simulate {
        /// Peaks CSV; defaults to `<out stem>_peaks.csv`.
        #[arg(long)]
        peaks: Option<PathBuf>,
    },
    /// Run the invariant suite on randomized small lines.
    Validate {
        /// Evaluate Chebyshev polynomials with a broken recurrence, to
        /// confirm the suite notices.
        #[arg(long, hide = true)]
        corrupt_recurrence: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    ClosedForm,
    Analytic,
    Numeric,
}

/// Bad flags, config contents or paths.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// How a command finished when it did not fail outright.
pub enum Outcome {
    Success,
    Warnings(Vec<String>),
    InvariantFailure,
}

/// Where the primary CSV goes and where the human summary is printed.
pub struct Sink {
    out: Option<PathBuf>,
}

impl Sink {
    /// Summary lines go to stdout unless the CSV does.
    pub fn say(&self, line: impl AsRef<str>) {
        if self.out.is_some() {
            println!("{}", line.as_ref());
        } else {
            eprintln!("{}", line.as_ref());
        }
    }

    pub fn out_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    pub fn emit(
        &self,
        render: impl FnOnce(&mut Vec<u8>) -> line_resonance::Result<()>,
    ) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        match &self.out {
            Some(path) => write_atomic(path, &buf),
            None => {
                std::io::stdout().write_all(&buf)?;
                Ok(())
            }
        }
    }
}

/// Write to a temporary file next to `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| UsageError(format!("cannot write to {}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| UsageError(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<line_resonance::Error>() {
            return if e.is_solver_failure() { 3 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let sink = Sink { out: cli.out };
    if let Command::Validate { corrupt_recurrence } = cli.command {
        return commands::validate(&sink, cli.seed, corrupt_recurrence);
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load_file(path)?,
        None => RunConfig::reference(),
    };
    let sec = cfg.sections().context("invalid line parameters")?;
    match cli.command {
        Command::Spectrum { method } => commands::spectrum(&sink, &cfg, &sec, method),
        Command::Sweep => commands::sweep(&sink, &cfg, &sec),
        Command::Locus => commands::locus(&sink, &cfg, &sec),
        Command::Sensitivity => commands::sensitivity(&sink, &cfg, &sec),
        Command::Simulate { peaks } => commands::simulate(&sink, &cfg, &sec, peaks),
        Command::Validate { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings(warnings)) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(4)
        }
        Ok(Outcome::InvariantFailure) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
