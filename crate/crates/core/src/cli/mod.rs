//! Command-line front end: `simulate`, `verify`, `sweep`, `validate`.

pub mod config;
pub mod csv_out;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use toml::Value;

use crate::error::{Error, Result};
use crate::simulator::run_scenario;
use crate::verification::verify;
use config::{ConfigDocument, IePolicyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dual-adapt",
    version,
    about = "Composite MRAC simulator and verifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key override, e.g. `gains.sigma=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Integrator step, overriding `integrator.dt`.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon in seconds, overriding `integrator.horizon`.
    #[arg(long)]
    horizon: Option<f64>,
    /// IE activation policy, overriding `ie_policy.kind`.
    #[arg(long = "ie-policy", value_name = "window|threshold")]
    ie_policy: Option<IePolicyKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario and check it; exit 0 iff every check passes.
    Verify {
        #[command(flatten)]
        common: Common,
        /// JSON report path; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optional trajectory CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the `[sweep]` parameter grid into a directory.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate the scenario only.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

/// Exit code for an error: 3 for numerical divergence, 2 otherwise.
pub fn exit_code_for(e: &Error) -> i32 {
    if e.is_divergence() {
        EXIT_DIVERGED
    } else {
        EXIT_CONFIG
    }
}

/// Ordering for combining sweep exit codes: divergence outranks config
/// errors, which outrank check failures.
fn severity(code: i32) -> usize {
    [EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIVERGED]
        .iter()
        .position(|c| *c == code)
        .unwrap_or(usize::MAX)
}

/// Reads the config file and applies `--set`, then `--dt`, `--horizon`,
/// `--ie-policy`.
fn load_document(common: &Common) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| Error::io(&common.config, e))?;
    let mut doc = ConfigDocument::parse(&text)?;
    for item in &common.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::invalid("--set", format!("expected KEY=VALUE, got {item:?}")))?;
        doc.set_str(key.trim(), value.trim())?;
    }
    if let Some(dt) = common.dt {
        doc.set("integrator.dt", Value::Float(dt))?;
    }
    if let Some(h) = common.horizon {
        doc.set("integrator.horizon", Value::Float(h))?;
    }
    if let Some(kind) = common.ie_policy {
        let name = match kind {
            IePolicyKind::Window => "window",
            IePolicyKind::Threshold => "threshold",
        };
        doc.set("ie_policy.kind", Value::String(name.into()))?;
    }
    Ok(doc)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { common, out } => {
            let cfg = load_document(&common)?.build()?;
            warn(&cfg.warnings);
            let log = run_scenario(&cfg)?;
            csv_out::write_csv(&log, &out)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            common,
            report,
            out,
        } => {
            let cfg = load_document(&common)?.build()?;
            warn(&cfg.warnings);
            let log = run_scenario(&cfg)?;
            if let Some(out) = out {
                csv_out::write_csv(&log, &out)?;
            }
            let rep = verify(&cfg, &log)?;
            let json = rep.to_json()?;
            match report {
                Some(path) => write_file(&path, &json)?,
                None => print!("{json}"),
            }
            for c in &rep.checks {
                eprintln!("{:<22} {}", c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            Ok(if rep.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Sweep { common, out } => {
            let doc = load_document(&common)?;
            let points = sweep::run_sweep(&doc, &out)?;
            for p in &points {
                if let sweep::PointOutcome::Failed { message, .. } = &p.outcome {
                    eprintln!("{}: {message}", p.stem());
                }
            }
            Ok(points
                .iter()
                .map(|p| p.exit_code())
                .max_by_key(|c| severity(*c))
                .unwrap_or(EXIT_OK))
        }
        Command::Validate { common } => {
            let cfg = load_document(&common)?.build()?;
            warn(&cfg.warnings);
            println!("{}: ok", cfg.name);
            Ok(EXIT_OK)
        }
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
