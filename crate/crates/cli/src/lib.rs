//! `amorph` command-line frontend.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 2 for invalid arguments, 3 for bad input data and
//! 4 for internal failures. Every failure prints a single
//! `error[<code>]: <message>` line on stderr.

mod commands;
mod params;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use params::ParamArgs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "amorph", version, about = "Attentive makeup morphing on faces with landmarks and parsing maps")]
pub struct Cli {
    /// Worker thread cap (defaults to AMORPH_THREADS, then all cores).
    #[arg(long, global = true, env = "AMORPH_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer makeup from one or two references onto a source.
    Transfer(TransferArgs),
    /// Transfer one reference onto every frame bundle in a directory.
    Batch(BatchArgs),
    /// Export the attention row of one source pixel.
    Attention(AttentionArgs),
    /// Region-wise histogram matching of the source towards the reference.
    Histmatch(HistmatchArgs),
    /// Time dense against region-bucketed attention.
    Bench(BenchArgs),
    /// Write a synthetic face bundle.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Source bundle directory (image.png, landmarks.json, parsing.png).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Reference bundle directory.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Second reference bundle directory.
    #[arg(long)]
    pub ref2: Option<PathBuf>,
    /// JSON request with bundle paths and parameters; flags override it.
    #[arg(long)]
    pub request: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output PNG.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Diagnostics JSON (defaults to the output path with a .json extension).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Directory whose subdirectories are frame bundles.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub ref2: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output directory; frame `<name>` is written as `<name>.png`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttentionArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Source pixel on the working grid as `row,col`.
    #[arg(long, value_parser = params::parse_pixel)]
    pub pixel: (usize, usize),
    #[command(flatten)]
    pub params: ParamArgs,
    /// Comma-separated visual weights; one map per weight.
    #[arg(long, value_delimiter = ',')]
    pub w_sweep: Option<Vec<f64>>,
    /// Replace visual features by zeros (position-only attention).
    #[arg(long)]
    pub zero_features: bool,
    /// Heat-map PNG; the sparse row goes next to it as JSON.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistmatchArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Visual weight.
    #[arg(short, long, default_value_t = 0.01)]
    pub w: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with generator parameters; flags override it.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub rotation: Option<f64>,
    /// Lip color as `r,g,b` in [0,1].
    #[arg(long, value_parser = params::parse_rgb)]
    pub lip: Option<[f64; 3]>,
    /// Eye-shadow tint as `r,g,b` in [0,1].
    #[arg(long, value_parser = params::parse_rgb)]
    pub eye_shadow: Option<[f64; 3]>,
    /// Output bundle directory.
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub exit: i32,
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        Self { exit: EXIT_USAGE, code: code.into(), message: message.into() }
    }

    /// Argument-level error: names the offending flag.
    pub fn flag(flag: &str, err: amorph::Error) -> Self {
        Self::usage(err.code(), format!("{flag}: {err}"))
    }
}

impl From<amorph::Error> for CliError {
    fn from(err: amorph::Error) -> Self {
        let exit = match err.kind() {
            amorph::ErrorKind::Internal => EXIT_INTERNAL,
            _ => EXIT_DATA,
        };
        Self { exit, code: err.code().into(), message: err.to_string() }
    }
}

/// Runs the CLI with process stdout/stderr.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, A>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "error[usage]: {}", line.trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    match commands::execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let message = e.message.replace('\n', " ");
            let _ = writeln!(err, "error[{}]: {}", e.code, message);
            e.exit
        }
    }
}
