//! Config-driven experiment driver for `anosov-core`.
//!
//! Each subcommand reads one JSON config, runs its experiment and writes a
//! `report.json` (plus optional CSV tables and plot-ready artifacts) into the
//! output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Subcommand};
pub use config::{load_config, load_config_file, LabConfig, ReportFormat};
pub use error::LabError;
pub use report::{emit_report, RunReport, RunStatus, Table};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "ANOSOV_LAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "anosov-lab", version, about = "Numerical experiments on hyperbolic torus actions")]
pub struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// JSON config document; defaults apply to every missing field.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. `resolution.grid=128`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; beats `ANOSOV_LAB_OUT` and `experiment.output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shorthand for `--set experiment.format=...`.
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

impl Cli {
    pub fn overrides(&self) -> Vec<String> {
        let mut all = self.overrides.clone();
        if let Some(f) = self.format {
            let name = match f {
                ReportFormat::Json => "json",
                ReportFormat::CsvBundle => "csv-bundle",
            };
            all.push(format!("experiment.format=\"{name}\""));
        }
        all
    }

    pub fn output_dir(&self, config: &LabConfig) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(&config.experiment.output_dir),
        }
    }
}

/// Parses, runs and writes; returns the report and the directory it went to.
pub fn execute(cli: &Cli) -> Result<(RunReport, PathBuf), LabError> {
    let config = load_config_file(cli.config.as_deref(), &cli.overrides())?;
    let dir = cli.output_dir(&config);
    let mut report = run(cli.subcommand, &config);
    emit_report(&mut report, config.experiment.format, &dir)?;
    Ok((report, dir))
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((report, dir)) => {
            println!(
                "{}: {} (exit {}) -> {}",
                report.subcommand,
                serde_json::to_value(report.status).expect("status serializes").as_str().unwrap_or("?"),
                report.exit_code,
                dir.join("report.json").display()
            );
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
