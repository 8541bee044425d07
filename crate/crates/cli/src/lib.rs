//! `chfdist` command-line front end.
//!
//! Every command is a pure function of its input files, flags and seed, and
//! writes only into the output directory (`--out`, or `CHFDIST_OUT`).

mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use chfdist::spectrum::ConvMode;
use chfdist::WeightOptions;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or unreadable/invalid input.
    Input(String),
    /// Numerical convergence failure.
    Numeric(String),
    /// The command ran but its check did not pass.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) | CliError::Validation(m) => m,
        }
    }
}

impl From<chfdist::Error> for CliError {
    fn from(e: chfdist::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chfdist",
    version,
    about = "Distortion spectra of Gaussian signals through memoryless nonlinearities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Fourier coefficients to a VNA sweep or a built-in model.
    Fit(FitArgs),
    /// Predict the output spectrum for an input spectrum and drive level.
    Predict(PredictArgs),
    /// Tabulate SDR against input drive.
    SdrSweep(SweepArgs),
    /// Check the hard-limiter weights against the arcsine law.
    ValidatePrice(PriceArgs),
    /// Monte-Carlo cross-check of a prediction.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Signum,
    Tanh,
    Poly,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in analytic device instead of measured data.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Small-signal gain of the tanh model.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    /// Saturation level of the tanh model in volts.
    #[arg(long, default_value_t = 1.0)]
    pub v_sat: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub a3: f64,
    #[arg(long, default_value_t = 0.0)]
    pub a5: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "CHFDIST_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct DriveArgs {
    /// Input power in dBm into the reference resistance.
    #[arg(long, allow_negative_numbers = true)]
    pub drive_dbm: Option<f64>,
    /// Input RMS voltage.
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl DriveArgs {
    pub fn sigma(&self, r_ohm: f64) -> f64 {
        match (self.sigma, self.drive_dbm) {
            (Some(s), _) => s,
            (None, Some(p)) => chfdist::ingest::dbm_to_rms_volts(p, r_ohm),
            (None, None) => unreachable!("clap enforces one drive argument"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    /// Truncation order (automatic when omitted).
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub k_tail_tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub n_tail_tolerance: f64,
    /// Treat an unresolved harmonic tail as an error.
    #[arg(long)]
    pub strict: bool,
}

impl WeightArgs {
    pub fn options(&self) -> WeightOptions {
        WeightOptions {
            k_max: self.k_max,
            k_tail_tolerance: self.k_tail_tolerance,
            n_tail_tolerance: self.n_tail_tolerance,
            strict: self.strict,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// VNA power-sweep CSV (`p_in_dbm,s21_mag_db,s21_phase_deg`).
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub vna: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Half-period in volts (default: 4 × largest input, 1 V for signum).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = chfdist::nonlinearity::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = chfdist::ingest::DEFAULT_LOAD_OHMS)]
    pub resistance: f64,
    /// Fail when the outermost coefficients have not decayed below the tail tolerance.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub n_tail_tolerance: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Coefficient JSON written by `fit`.
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Spectrum-analyser CSV (`freq_hz,power_dbm`).
    #[arg(long)]
    pub spectrum: PathBuf,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = chfdist::ingest::DEFAULT_LOAD_OHMS)]
    pub resistance: f64,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Autoconvolution mode: same, full or circular.
    #[arg(long, default_value = "same")]
    pub mode: ConvMode,
    /// Count the DC term as distortion.
    #[arg(long)]
    pub include_dc: bool,
    /// Subtract the analyser noise floor before normalising.
    #[arg(long)]
    pub floor_clip: bool,
    /// Analyser resolution bandwidth in Hz; rescales readings to per-bin power.
    #[arg(long)]
    pub rbw_correction: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub start: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub stop: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = chfdist::ingest::DEFAULT_LOAD_OHMS)]
    pub resistance: f64,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub include_dc: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[arg(long, default_value_t = chfdist::nonlinearity::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = 9)]
    pub k_max: usize,
    /// Allowed relative error of odd-order weights.
    #[arg(long, default_value_t = 1e-9)]
    pub odd_tolerance: f64,
    /// Allowed magnitude of even-order weights.
    #[arg(long, default_value_t = 1e-12)]
    pub even_tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Coefficient JSON; the device is the series it describes.
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub coeffs: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = chfdist::nonlinearity::DEFAULT_N)]
    pub n: usize,
    /// Target spectrum CSV (`freq_hz,power_dbm`).
    #[arg(long)]
    pub spectrum: PathBuf,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = chfdist::ingest::DEFAULT_LOAD_OHMS)]
    pub resistance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4096)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 64)]
    pub n_segments: usize,
    // `--strict` here also rejects samples beyond ±c instead of clamping them.
    #[command(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Runs one command; returns the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a, stdout, stderr),
        Command::Predict(a) => commands::predict(&a, stdout, stderr),
        Command::SdrSweep(a) => commands::sdr_sweep(&a, stdout, stderr),
        Command::ValidatePrice(a) => commands::validate_price(&a, stdout),
        Command::Oracle(a) => commands::oracle(&a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, stdout, stderr),
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            code
        }
    }
}
