//! Command-line front end: presets in, figure data and reports out.
//!
//! [`run`] parses arguments, executes one command, writes exactly one output
//! file and prints a one-line summary. Exit codes: 0 success, 1 domain or I/O
//! error, 2 usage error.

mod commands;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pnrqkd::{ExperimentPreset, PresetLibrary};

pub use output::{write_table, Cell, Format, Table};

/// Environment variable naming a directory that holds `presets.toml`.
pub const PRESET_DIR_ENV: &str = "PNRQKD_PRESET_DIR";

#[derive(Debug, Parser)]
#[command(name = "pnrqkd", version, about = "Photon-number-resolving decoy-state QKD analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment preset to start from.
    #[arg(long, global = true, default_value = "gys")]
    pub preset: String,
    /// Directory containing presets.toml (replaces the built-in presets).
    #[arg(long, global = true, env = PRESET_DIR_ENV)]
    pub preset_dir: Option<PathBuf>,
    /// TOML file whose keys override the selected preset.
    #[arg(long = "override", global = true, value_name = "FILE")]
    pub override_file: Option<PathBuf>,
    /// Output file. Defaults to `<command>.<format>` in the working directory.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. Defaults to the extension of --out, then to the command's usual format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write a gnuplot script for the CSV output.
    #[arg(long, global = true, value_name = "FILE")]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Information gain of n SI attacks versus one CMP attack on an n-photon pulse, over a QBER grid.
    AttackInfo {
        /// Photons per pulse.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        /// Largest QBER of the grid (the grid starts at 0).
        #[arg(long, default_value_t = 0.5)]
        e_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// QBER below which the CMP attack beats n SI attacks.
    Crossover {
        #[arg(required = true, value_parser = clap::value_parser!(u32).range(1..))]
        n: Vec<u32>,
    },
    /// Final key rate against fiber length.
    RateCurve {
        /// Intensities (comma separated). Defaults to the preset's.
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        l_min: f64,
        #[arg(long, default_value_t = 200.0)]
        l_max: f64,
        #[arg(long, default_value_t = 201)]
        steps: usize,
    },
    /// Intensity maximising the final key rate at given lengths.
    OptimizeMu {
        /// Fiber lengths in km (comma separated). Defaults to the preset's.
        #[arg(long, value_delimiter = ',')]
        distance: Vec<f64>,
    },
    /// Longest fiber with a positive final key rate.
    MaxDistance {
        /// Intensities (comma separated). Defaults to the preset's.
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
        /// Append the intensity with the longest reach.
        #[arg(long)]
        best: bool,
    },
    /// Monte Carlo simulation of the source, channel, Eve and a PNR detector.
    Simulate {
        #[arg(long)]
        mu: Option<f64>,
        /// Fiber length in km. Defaults to the preset's.
        #[arg(long)]
        distance: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        pulses: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Eve::BeamSplitter)]
        eve: Eve,
    },
    /// Simulates signal and decoy runs and tests their photon-number yields for equality.
    DecoyCheck {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        decoy_mu: f64,
        #[arg(long)]
        distance: Option<f64>,
        #[arg(long, default_value_t = 10_000_000)]
        pulses: u64,
        /// Seed of the signal run; the decoy run uses seed + 1.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Eve::BeamSplitter)]
        eve: Eve,
    },
    /// Tagged fraction below which a PNS attack yields full information.
    PnsThreshold {
        /// Intensities (comma separated). Defaults to the preset's.
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AttackInfo { .. } => "attack-info",
            Command::Crossover { .. } => "crossover",
            Command::RateCurve { .. } => "rate-curve",
            Command::OptimizeMu { .. } => "optimize-mu",
            Command::MaxDistance { .. } => "max-distance",
            Command::Simulate { .. } => "simulate",
            Command::DecoyCheck { .. } => "decoy-check",
            Command::PnsThreshold { .. } => "pns-threshold",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Simulate { .. } | Command::DecoyCheck { .. } => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Eve {
    /// Forwards each photon with the channel transmittance.
    BeamSplitter,
    /// Blocks single-photon pulses.
    BlockSingles,
    /// Beam-splits the lower intensity and halves single-photon forwarding at the higher one.
    IntensityAware,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<pnrqkd::Error> for CliError {
    fn from(e: pnrqkd::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

/// Result of one command before it is written out.
pub struct Report {
    pub table: Table,
    pub config: serde_json::Value,
    pub summary: serde_json::Value,
    pub line: String,
    pub log_y: bool,
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

/// Executes a parsed command line and returns the summary line.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let c = &cli.common;
    let format = c
        .format
        .or_else(|| c.out.as_deref().and_then(Format::from_path))
        .unwrap_or_else(|| cli.command.default_format());
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", cli.command.name(), format.extension())));
    if c.plot_script.is_some() && format != Format::Csv {
        return Err(CliError::Usage("--plot-script needs CSV output".into()));
    }

    let report = match c.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Failure(e.to_string()))?
            .install(|| commands::dispatch(cli))?,
        None => commands::dispatch(cli)?,
    };

    write_table(&report.table, format, &out, report.config, report.summary)
        .map_err(|e| CliError::Failure(format!("{}: {e}", out.display())))?;
    if let Some(script) = &c.plot_script {
        std::fs::write(script, output::gnuplot_script(&report.table, &out, report.log_y))
            .map_err(|e| CliError::Failure(format!("{}: {e}", script.display())))?;
    }
    Ok(format!("{} -> {}", report.line, out.display()))
}

/// The selected preset with the override file applied.
pub fn resolve_preset(c: &Common) -> Result<ExperimentPreset, CliError> {
    let library = match &c.preset_dir {
        Some(dir) => PresetLibrary::from_dir(dir)?,
        None => PresetLibrary::builtin(),
    };
    let preset = library.get(&c.preset)?;
    match &c.override_file {
        Some(path) => Ok(preset.apply_overrides(&pnrqkd::channel::PresetOverrides::from_file(
            Path::new(path),
            &c.preset,
        )?)?),
        None => Ok(preset),
    }
}
