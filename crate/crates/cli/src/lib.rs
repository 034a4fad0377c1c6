//! `lendfair`: ingest loan CSVs, fit the regression models, run per-sector
//! effect studies and fairness sweeps, and generate synthetic bundles.
//!
//! One TOML file configures a run; flags override it, and `LENDFAIR_OUT_DIR`
//! overrides the output directory. Every command writes the resolved
//! configuration next to its outputs so a run can be replayed exactly.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{OlsModel, SynthParams};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "lendfair", version, about = "Loan funding-time models and sector effect studies")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; every random quantity in a run derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where artifacts are written.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Fraction of rows used for fitting in split-based commands.
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,
    /// Fairness penalty weight.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Comma-separated sector subset, e.g. "Retail,Arts".
    #[arg(long, global = true, value_delimiter = ',')]
    pub sectors: Option<Vec<String>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the five input CSVs and write the per-loan feature table.
    Ingest,
    /// Fit ordinary least squares and write the coefficient table.
    Ols {
        /// Which design to fit.
        #[arg(long, value_enum, default_value_t = OlsModel::M1)]
        model: OlsModel,
        /// Sector for the binary model; defaults to the configured subset.
        #[arg(long)]
        sector: Option<String>,
    },
    /// Per-sector effect studies: naive, regression-baseline, and doubly
    /// robust estimates with model diagnostics.
    Ate,
    /// Compare the plain and fairness-penalized samplers per sector.
    Fair,
    /// Generate a synthetic five-file CSV bundle.
    Synth {
        /// Number of loans.
        #[arg(long, default_value_t = 400)]
        loans: usize,
        /// Number of borrower countries.
        #[arg(long, default_value_t = 8)]
        countries: usize,
        /// Number of lender countries.
        #[arg(long, default_value_t = 6)]
        lenders: usize,
        /// Additive funding-time shift per sector index; 0 for no effect.
        #[arg(long, default_value_t = 0.0)]
        sector_effect: f64,
    },
}

/// Resolve the configuration and dispatch. Returns the artifacts written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let overrides = Overrides {
        seed: cli.seed,
        output_dir: cli.output_dir.clone(),
        train_fraction: cli.train_fraction,
        lambda: cli.lambda,
        sectors: cli.sectors.clone(),
    };
    let config = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&config),
        Command::Ols { model, sector } => commands::cmd_ols(&config, *model, sector.as_deref()),
        Command::Ate => commands::cmd_ate(&config),
        Command::Fair => commands::cmd_fair(&config),
        Command::Synth { loans, countries, lenders, sector_effect } => {
            let params = SynthParams {
                loans: *loans,
                countries: *countries,
                lenders: *lenders,
                sector_effect: *sector_effect,
            };
            commands::cmd_synth(&config, &params)
        }
    }
}
