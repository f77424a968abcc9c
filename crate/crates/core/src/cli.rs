//! Command-line front end: `evaluate`, `coverage`, `sweep` and `regress`.
//!
//! Exit status is 0 on success, 1 for usage or configuration errors and 2
//! when a run diverges.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::harness::{
    read_coverage_csv, regress_coverage, run_coverage, run_policy_eval, run_sensitivity, write_coverage_csv,
    write_regression_csv, write_sweep_csv, write_trace_csv, ExperimentConfig, HarnessError,
};

#[derive(Debug, Parser)]
#[command(name = "online-bootstrap", version, about = "Online bootstrap confidence intervals for TD/GTD policy evaluation")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for repeated runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config repeat count.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run; writes the interval trace.
    Evaluate,
    /// Monte-Carlo coverage over repeated runs.
    Coverage,
    /// Coverage over the config's alpha0_grid and eta_grid.
    Sweep,
    /// Coverage-error rate regression, from a coverage table or a fresh run.
    Regress {
        /// Existing coverage table; when omitted the coverage study in
        /// --config is run first.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Nominal level; defaults to the config's ci_level, else 0.95.
        #[arg(long)]
        nominal: Option<f64>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Diagnostics go to `stderr`; output goes to `--out` or
/// `stdout`.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let path = cli.config.as_ref().ok_or_else(|| HarnessError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.repeats {
        cfg.repeats = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    write: impl FnOnce(&mut Vec<u8>) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    match out {
        Some(path) => std::fs::write(path, buf)
            .map_err(|e| HarnessError::Io(format!("cannot write {}: {e}", path.display()))),
        None => Ok(stdout.write_all(&buf)?),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Evaluate => {
            let trace = run_policy_eval(&load_config(cli)?)?;
            emit(out, stdout, |w| write_trace_csv(w, &trace))
        }
        Command::Coverage => {
            let records = run_coverage(&load_config(cli)?, cli.jobs)?;
            emit(out, stdout, |w| write_coverage_csv(w, &records))
        }
        Command::Sweep => {
            let rows = run_sensitivity(&load_config(cli)?, cli.jobs)?;
            emit(out, stdout, |w| write_sweep_csv(w, &rows))
        }
        Command::Regress { input, nominal } => {
            let (records, cfg_level) = match input {
                Some(path) => {
                    let file = std::fs::File::open(path)
                        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
                    let level = match &cli.config {
                        Some(_) => Some(load_config(cli)?.ci_level),
                        None => None,
                    };
                    (read_coverage_csv(file)?, level)
                }
                None => {
                    let cfg = load_config(cli)?;
                    (run_coverage(&cfg, cli.jobs)?, Some(cfg.ci_level))
                }
            };
            let nominal = nominal.or(cfg_level).unwrap_or(0.95);
            if !(nominal > 0.0 && nominal < 1.0) {
                return Err(HarnessError::Config(format!("nominal level {nominal} must lie in (0, 1)")));
            }
            let rows = regress_coverage(&records, nominal)?;
            emit(out, stdout, |w| write_regression_csv(w, &rows))
        }
    }
}
