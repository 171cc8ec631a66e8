//! Command-line front end: scenario files in, deterministic reports out.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::{run, Command, Format, Outcome, Overrides};
pub use error::CliError;
pub use scenario::{load_scenario, parse_scenario, Scenario};

#[derive(Debug, Parser)]
#[command(name = "minsing", version, about = "Singular vertical distance and Steiner rigidity checks on structured BV fields")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Lattice cell size.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Lattice neighbourhood: 4, 8 or 16.
    #[arg(long)]
    pub connectivity: Option<u32>,
    /// Fraction of nodes allowed outside the largest zero class.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory for the report; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Seed for randomised generators.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Report file name for a scenario and command.
pub fn report_name(scenario: &Path, cmd: Command, format: Format) -> String {
    let stem = scenario.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    format!("{stem}.{}.{}", cmd.name(), format.extension())
}

/// Runs one invocation and writes its report. A failed check is returned as the error carrying its exit status.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let sc = load_scenario(&cli.scenario)?;
    let name = cli.scenario.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let overrides = Overrides { resolution: cli.resolution, connectivity: cli.connectivity, tol: cli.tol, seed: cli.seed };
    let outcome = run(cli.command, &sc, &name, &overrides, cli.format)?;
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(report_name(&cli.scenario, cli.command, cli.format));
            std::fs::write(&path, &outcome.bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&outcome.bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    match outcome.status {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
