//! Command-line front end: `qcap <task> --scenario FILE`.
//!
//! Exit codes: 0 on success, 1 on invalid input (usage, unreadable or
//! invalid scenario), 2 when a computation fails.
//!
//! The seed is taken from `--seed`, else the scenario's `seed` key, else the
//! `QCAP_SEED` environment variable, else 42.

pub mod emit;
pub mod run;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use emit::{emit, parse_record, Format, ResultRecord};
pub use run::{run, RunOptions};
pub use scenario::{parse_scenario, Scenario, ScenarioError, Task, Unit};

/// Environment variable overriding the default seed.
pub const SEED_ENV: &str = "QCAP_SEED";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Computation(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "qcap", version, about = "Quantum mutual entropy, Holevo bounds and channel capacities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// von Neumann entropy of the scenario state (and of its channel output)
    Entropy(CommonArgs),
    /// Mutual entropy of the state through the channel
    Mutual(CommonArgs),
    /// Holevo quantity of the ensemble through the channel
    Chi(CommonArgs),
    /// Upper, middle and lower rungs of the Holevo bound chain
    Bounds(CommonArgs),
    /// Quantum and pseudo-quantum capacity of the channel
    Capacity(CommonArgs),
    /// Classical-quantum-classical capacities for the ensemble coding and measurement decoding
    Cqc(CommonArgs),
    /// Capacity over a grid of one channel parameter
    Sweep(CommonArgs),
    /// Runs the task named in the scenario file
    Run(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
    /// Seed for every randomized search
    #[arg(long)]
    seed: Option<u64>,
    /// Display unit (defaults to the scenario's unit, then bits)
    #[arg(long, value_enum)]
    unit: Option<Unit>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report wall-clock runtime in the diagnostics
    #[arg(long)]
    timing: bool,
}

fn resolve_seed(flag: Option<u64>, scenario: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(scenario) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(crate::optim::DEFAULT_SEED),
    }
}

/// Parses and runs a scenario, returning the rendered output.
pub fn execute(
    text: &str,
    task: Option<Task>,
    seed: Option<u64>,
    unit: Option<Unit>,
    format: Format,
    timing: bool,
) -> Result<String, CliError> {
    let scenario = parse_scenario(text).map_err(|e| CliError::Validation(e.to_string()))?;
    let task = match (task, scenario.task) {
        (Some(t), Some(s)) if t != s => {
            return Err(CliError::Validation(format!(
                "subcommand {} does not match the scenario's task {}",
                t.as_str(),
                s.as_str()
            )))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => return Err(CliError::Validation("the scenario names no task".into())),
    };
    let opts = RunOptions {
        seed: resolve_seed(seed, scenario.seed)?,
        unit: unit.or(scenario.unit).unwrap_or(Unit::Bits),
        timing,
    };
    let records = run(&scenario, task, &opts)?;
    Ok(emit(&records, format))
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (task, a) = match cli.command {
        Command::Entropy(a) => (Some(Task::Entropy), a),
        Command::Mutual(a) => (Some(Task::Mutual), a),
        Command::Chi(a) => (Some(Task::Chi), a),
        Command::Bounds(a) => (Some(Task::Bounds), a),
        Command::Capacity(a) => (Some(Task::Capacity), a),
        Command::Cqc(a) => (Some(Task::Cqc), a),
        Command::Sweep(a) => (Some(Task::Sweep), a),
        Command::Run(a) => (None, a),
    };
    let result = std::fs::read_to_string(&a.scenario)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", a.scenario.display())))
        .and_then(|text| execute(&text, task, a.seed, a.unit, a.format, a.timing));
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qcap: {e}");
            return e.exit_code();
        }
    };
    let written = match &a.out {
        Some(path) => std::fs::write(path, &output)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(output.as_bytes())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
    };
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qcap: {e}");
            1
        }
    }
}
