//! `hkcone`: Hellinger–Kantorovich distances, geodesics and property checks
//! on finitely supported measures.

mod commands;
mod suites;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hkcone", version, about = "Hellinger–Kantorovich distances, geodesics and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// HK distance, optimal plan and calibration densities of a problem file.
    Hk,
    /// Spherical HK distance between two probability measures.
    Shk,
    /// Samples of the HK geodesic between the two measures of a problem file.
    Geodesic,
    /// Runs a seeded property suite.
    Check {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Scaling,
    Metric,
    Optimality,
    Lac,
    Semiconcavity,
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Problem or space file (JSON).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Overrides the length scale δ of the input, or sets it for generated instances.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Number of time samples along geodesics.
    #[arg(long, global = true, default_value_t = 33)]
    pub grid: usize,
    /// Seed for every generated instance.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl RunConfig {
    fn validate(&self) -> anyhow::Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be a positive number, got {}", self.tol);
        }
        if self.grid < 3 {
            bail!("--grid must be at least 3, got {}", self.grid);
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                bail!("--delta must be a positive number, got {d}");
            }
        }
        Ok(())
    }

    pub fn header(&self, command: &str) -> Header {
        Header {
            tool: "hkcone",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: self.seed,
            tol: self.tol,
            grid: self.grid,
            delta: self.delta,
            input: self.input.as_ref().map(|p| p.display().to_string()),
        }
    }

    /// Writes `text` to `--out` or standard output.
    pub fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

/// Run metadata placed at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub tol: f64,
    pub grid: usize,
    pub delta: Option<f64>,
    pub input: Option<String>,
}

/// How a successful run ended.
pub enum Outcome {
    Pass,
    PropertyFailure,
}

const EXIT_INPUT: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_PROPERTY: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    let nonconvergent = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<hkcone::Error>(), Some(hkcone::Error::NonConvergence(_))));
    if nonconvergent {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_INPUT
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    cli.config.validate()?;
    match &cli.command {
        Command::Hk => commands::hk(&cli.config, false),
        Command::Shk => commands::hk(&cli.config, true),
        Command::Geodesic => commands::geodesic(&cli.config),
        Command::Check { suite } => suites::run(&cli.config, *suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::PropertyFailure) => ExitCode::from(EXIT_PROPERTY),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonconvergence_maps_to_two() {
        let e = anyhow::Error::new(hkcone::Error::NonConvergence("stalled".into())).context("solving");
        assert_eq!(exit_code(&e), EXIT_NONCONVERGENCE);
    }

    #[test]
    fn other_errors_map_to_one() {
        let e = anyhow::Error::new(hkcone::Error::InvalidInput("bad".into()));
        assert_eq!(exit_code(&e), EXIT_INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), EXIT_INPUT);
    }

    #[test]
    fn grid_below_three_is_rejected() {
        let cli = Cli::try_parse_from(["hkcone", "check", "lac", "--grid", "2"]).unwrap();
        assert!(cli.config.validate().is_err());
    }
}
