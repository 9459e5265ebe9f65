//! Command-line parsing: one subcommand per experiment, flags overriding the
//! configuration file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qpiston_core::Mode;

use crate::config::{parse_config, ConfigFile, Experiment, OutputFormat, RunConfig, OUTPUT_DIR_ENV};
use crate::{execute, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "qpiston",
    version,
    about = "Single-piston quantum oscillator engine simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean piston interaction energy of thermal states over a (ω_T, y/σ) grid.
    InteractionMap(Flags),
    /// Final stroke energies against stroke time, with both limiting bounds.
    Adiabaticity(Flags),
    /// Bath-powered engine cycles.
    RunBath(Flags),
    /// Measurement-powered engine cycles.
    RunMeasurement(Flags),
    /// Steady-state summaries over a grid of widths, stroke times and modes.
    Sweep(Flags),
    /// The experiment named in the configuration file.
    Run(Flags),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Bath,
    Measurement,
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// TOML configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y_retracted: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega_hot: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega_cold: Option<f64>,
    /// Fock cutoff N of fluid and bath.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Runge-Kutta step in oscillator periods.
    #[arg(long, allow_negative_numbers = true)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Abort when the top Fock population exceeds the failure level.
    #[arg(long)]
    pub strict_cutoff: Option<bool>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub omega_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub y_over_sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<ModeArg>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// Directory for outputs when no output path is given.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self, experiment: Option<Experiment>) -> ConfigFile {
        ConfigFile {
            experiment,
            sigma: self.sigma,
            tau_p: self.tau_p,
            tau_b: self.tau_b,
            phi0: self.phi0,
            y_retracted: self.y_retracted,
            omega_hot: self.omega_hot,
            omega_cold: self.omega_cold,
            cutoff: self.cutoff,
            n_cycles: self.cycles,
            dtau: self.dtau,
            strict_cutoff: self.strict_cutoff,
            omega_grid: self.omega_grid.clone(),
            y_over_sigma: self.y_over_sigma.clone(),
            tau_grid: self.taus.clone(),
            sigmas: self.sigmas.clone(),
            modes: self.modes.as_ref().map(|ms| {
                ms.iter()
                    .map(|m| match m {
                        ModeArg::Bath => Mode::Bath,
                        ModeArg::Measurement => Mode::Measurement,
                    })
                    .collect()
            }),
            output_path: self.output.clone(),
            output_format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            }),
            ..ConfigFile::default()
        }
    }
}

impl Command {
    /// The resolved configuration for this invocation.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let (experiment, flags) = match self {
            Command::InteractionMap(f) => (Some(Experiment::InteractionMap), f),
            Command::Adiabaticity(f) => (Some(Experiment::Adiabaticity), f),
            Command::RunBath(f) => (Some(Experiment::RunBath), f),
            Command::RunMeasurement(f) => (Some(Experiment::RunMeasurement), f),
            Command::Sweep(f) => (Some(Experiment::Sweep), f),
            Command::Run(f) => (None, f),
        };
        parse_config(
            flags.config.as_deref(),
            flags.overrides(experiment),
            flags.output_dir.as_deref(),
        )
    }
}

/// Parses `args`, runs the experiment and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.command.config().and_then(|c| execute(&c)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
