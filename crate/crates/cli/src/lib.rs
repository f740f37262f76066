//! Command-line front end for FDB fingerprint segmentation.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdb_core::texture::{ShrinkageKind, Synthesis};

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fdb", version, about = "Fingerprint segmentation with factorized directional bandpass filters")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Key-value parameter file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Inline parameter override, e.g. `--params C=0.08`. Repeatable.
    #[arg(long = "params", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[arg(long, global = true, value_enum)]
    pub synthesis: Option<SynthesisArg>,

    #[arg(long, global = true, value_enum)]
    pub shrinkage: Option<ShrinkageArg>,

    /// Number of worker threads for batch commands.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Uniform bilinear rescale applied before segmentation.
    #[arg(long, global = true, value_name = "FACTOR")]
    pub resize: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segments one image and writes its ROI mask.
    Segment {
        image: PathBuf,
        /// Also write the feature image (default `<stem>_feature.png`).
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        dump_feature: Option<Option<PathBuf>>,
    },
    /// Segments a directory and scores it against ground-truth masks.
    Evaluate { image_dir: PathBuf, truth_dir: PathBuf },
    /// Grid search over C, gamma and t on a training set.
    Train {
        image_dir: PathBuf,
        truth_dir: PathBuf,
        /// Grid file with comma separated `C`, `gamma` and `t` lists.
        #[arg(long, value_name = "FILE")]
        grid: Option<PathBuf>,
    },
    /// Writes magnitude images of the filter bank.
    Filters {
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthesisArg {
    Factorized,
    Max,
    Sum,
}

impl From<SynthesisArg> for Synthesis {
    fn from(a: SynthesisArg) -> Self {
        match a {
            SynthesisArg::Factorized => Synthesis::Factorized,
            SynthesisArg::Max => Synthesis::Max,
            SynthesisArg::Sum => Synthesis::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShrinkageArg {
    Soft,
    Hard,
    Semisoft,
    Nonlinear,
}

impl From<ShrinkageArg> for ShrinkageKind {
    fn from(a: ShrinkageArg) -> Self {
        match a {
            ShrinkageArg::Soft => ShrinkageKind::Soft,
            ShrinkageArg::Hard => ShrinkageKind::Hard,
            ShrinkageArg::Semisoft => ShrinkageKind::Semisoft,
            ShrinkageArg::Nonlinear => ShrinkageKind::Nonlinear,
        }
    }
}

/// Config file first, then inline overrides and flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &global.config {
        cfg.load_file(path)?;
    }
    for kv in &global.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = global.synthesis {
        cfg.synthesis = s.into();
    }
    if let Some(s) = global.shrinkage {
        cfg.shrinkage = s.into();
    }
    if global.resize.is_some() {
        cfg.resize = global.resize;
    }
    cfg.workers = global.workers;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fdb: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::invariant(format!("cannot start worker pool: {e}")))?;
    let out = cli.global.out.as_deref();
    pool.install(|| match &cli.command {
        Command::Segment { image, dump_feature } => commands::segment(image, dump_feature.as_ref().map(Option::as_deref), out, &cfg),
        Command::Evaluate { image_dir, truth_dir } => commands::evaluate(image_dir, truth_dir, out, &cfg),
        Command::Train { image_dir, truth_dir, grid } => commands::train(image_dir, truth_dir, grid.as_deref(), out, &cfg),
        Command::Filters { width, height } => commands::filters(*width, *height, out, &cfg),
    })
}
