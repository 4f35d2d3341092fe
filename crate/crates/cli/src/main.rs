//! `metro-twin` command-line interface.
//!
//! Exit codes: 0 success, 1 scenario validation failure, 2 runtime error,
//! 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metro_twin::redundancy::WorkflowEvent;
use metro_twin::scenario::{
    load_run_dir, load_scenario, render_report, run_scenario, write_report_csv, write_run, RunOptions, ScenarioError,
};
use metro_twin::Timestamp;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Environment variable overriding the default output directory of `run`.
const OUT_ENV: &str = "METRO_TWIN_OUT";
const DEFAULT_OUT: &str = "metro-twin-out";

#[derive(Debug, Parser)]
#[command(name = "metro-twin", version, about = "Uncertainty-aware sensor network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write all artifacts to an output directory.
    Run {
        scenario: PathBuf,
        /// Output directory [default: $METRO_TWIN_OUT, else ./metro-twin-out]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for same-instant events. Output does not depend on it.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        threads: u16,
    },
    /// Check a scenario file and report every problem found.
    Validate { scenario: PathBuf },
    /// Print the measurement submodel of one stream of a finished run.
    ExportAas {
        run_dir: PathBuf,
        stream_id: String,
        /// Start of the exported range, RFC 3339 (inclusive).
        #[arg(long, requires = "to")]
        from: Option<String>,
        /// End of the exported range, RFC 3339 (inclusive).
        #[arg(long, requires = "from")]
        to: Option<String>,
    },
    /// Summarise a finished run: coverage statistics, flags and swaps per stream.
    Report {
        run_dir: PathBuf,
        /// Print CSV instead of the text table.
        #[arg(long)]
        csv: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn runtime(message: impl ToString) -> Failure {
    Failure { code: EXIT_RUNTIME, message: message.to_string() }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    let code = match e {
        ScenarioError::Validation(_) | ScenarioError::Parse(_) => EXIT_VALIDATION,
        ScenarioError::Io { .. } => EXIT_RUNTIME,
    };
    Failure { code, message: e.to_string() }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

fn parse_time(s: &str) -> Result<Timestamp, Failure> {
    Timestamp::parse_rfc3339(s).map_err(|e| Failure { code: EXIT_USAGE, message: format!("invalid time `{s}`: {e}") })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, out, seed, threads } => {
            let mut config = load_scenario(&scenario).map_err(scenario_failure)?;
            if let Some(s) = seed {
                config.scenario.seed = Some(s);
            }
            let out = out
                .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let run = run_scenario(&config, &RunOptions { threads: threads.into() }).map_err(runtime)?;
            write_run(&run, &out).map_err(runtime)?;
            let swaps = run.audit.iter().filter(|a| matches!(a.event, WorkflowEvent::CertificateSwap { .. })).count();
            emit(&format!(
                "{}: {} events, {} streams, {} certificate swaps -> {}\n",
                run.scenario,
                run.events.len(),
                run.streams.len(),
                swaps,
                out.display()
            ))
        }
        Command::Validate { scenario } => {
            let config = load_scenario(&scenario).map_err(scenario_failure)?;
            emit(&format!(
                "{}: ok ({} nodes, {} sensors, {} virtual streams)\n",
                scenario.display(),
                config.nodes.len(),
                config.sensors.len(),
                config.virtual_rules().len()
            ))
        }
        Command::ExportAas { run_dir, stream_id, from, to } => {
            let range = match (from, to) {
                (Some(a), Some(b)) => {
                    let (a, b) = (parse_time(&a)?, parse_time(&b)?);
                    if a > b {
                        return Err(Failure { code: EXIT_USAGE, message: "--from is after --to".into() });
                    }
                    Some((a, b))
                }
                _ => None,
            };
            let dir = load_run_dir(&run_dir).map_err(runtime)?;
            let sm = dir.submodel(Path::new(&run_dir), &stream_id, range).map_err(runtime)?;
            emit(&(serde_json::to_string_pretty(&sm).map_err(runtime)? + "\n"))
        }
        Command::Report { run_dir, csv } => {
            let rows = load_run_dir(&run_dir).map_err(runtime)?.report();
            if csv {
                let mut buf = Vec::new();
                write_report_csv(&mut buf, &rows).map_err(runtime)?;
                emit(&String::from_utf8_lossy(&buf))
            } else {
                emit(&render_report(&rows))
            }
        }
    }
}
